//! SVG drawing and CSV edge dumps.

use std::fmt::Write;

use serde::Serialize;

use ramiflow::flux_graph::{divergence, edge_cost, CostSpec, FluxGraph};
use ramiflow::network::NetworkSet;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 40.0;
const MAX_STROKE: f64 = 12.0;

/// Maps the first two coordinates into the drawing, y pointing up.
struct Frame {
    min: [f64; 2],
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a [f64]>) -> Frame {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                let x = p.get(k).copied().unwrap_or(0.0);
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        if !lo[0].is_finite() {
            lo = [0.0, 0.0];
            hi = [1.0, 1.0];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let scale = (WIDTH - 2.0 * MARGIN) / span;
        Frame { min: lo, scale, height: (hi[1] - lo[1]) * scale + 2.0 * MARGIN }
    }

    fn map(&self, p: &[f64]) -> (f64, f64) {
        let x = p.first().copied().unwrap_or(0.0);
        let y = p.get(1).copied().unwrap_or(0.0);
        (MARGIN + (x - self.min[0]) * self.scale, self.height - MARGIN - (y - self.min[1]) * self.scale)
    }
}

/// Edges drawn with stroke width proportional to `c(w)`; edges above the
/// urban planning threshold are blue. Sources are red discs, sinks blue ones,
/// with area proportional to mass. Only the first two coordinates are used.
pub fn svg(g: &FluxGraph, spec: CostSpec, sigma: Option<&NetworkSet>) -> String {
    let sigma_points = sigma.into_iter().flat_map(|s| s.segments().iter().flat_map(|(p, q)| [p.as_slice(), q.as_slice()]));
    let frame = Frame::fit(g.vertices().iter().map(|v| v.as_slice()).chain(sigma_points));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{:.2}" viewBox="0 0 {WIDTH} {:.2}">"#,
        frame.height, frame.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(s) = sigma {
        for (p, q) in s.segments() {
            let ((x1, y1), (x2, y2)) = (frame.map(p), frame.map(q));
            let _ = writeln!(
                out,
                r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#9ecae1" stroke-width="{MAX_STROKE}" stroke-linecap="round"/>"##
            );
        }
    }
    let costs: Vec<f64> = g.edges().iter().map(|e| edge_cost(e.weight, spec)).collect();
    let top = costs.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let threshold = spec.network_threshold();
    for (e, c) in g.edges().iter().zip(&costs) {
        let ((x1, y1), (x2, y2)) = (frame.map(&g.vertices()[e.tail]), frame.map(&g.vertices()[e.head]));
        let colour = match threshold {
            Some(t) if e.weight > t => "#08519c",
            _ => "#404040",
        };
        let width = 1.0 + (MAX_STROKE - 1.0) * c / top;
        let _ = writeln!(
            out,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{colour}" stroke-width="{width:.3}" stroke-linecap="round"><title>w = {:?}</title></line>"#,
            e.weight
        );
    }
    let (plus, minus) = divergence(g);
    let biggest = plus.atoms().iter().chain(minus.atoms()).map(|a| a.mass).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for (measure, colour) in [(&plus, "#cb181d"), (&minus, "#2171b5")] {
        for a in measure.atoms() {
            let (x, y) = frame.map(&a.pos);
            let r = 3.0 + 9.0 * (a.mass / biggest).sqrt();
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{colour}"/>"#);
        }
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Serialize)]
struct EdgeRow {
    edge: usize,
    tail: usize,
    head: usize,
    weight: f64,
    length: f64,
    unit_cost: f64,
    cost: f64,
}

/// One row per edge with its weight, length and cost.
pub fn csv(g: &FluxGraph, spec: CostSpec) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, e) in g.edges().iter().enumerate() {
        let length = g.edge_length(i);
        let unit_cost = edge_cost(e.weight, spec);
        w.serialize(EdgeRow { edge: i, tail: e.tail, head: e.head, weight: e.weight, length, unit_cost, cost: unit_cost * length })?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
