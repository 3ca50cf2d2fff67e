//! Irrigation patterns: finitely many mass-weighted polyline fibres.
//!
//! Each fibre stands for a class of particles that travel together. The
//! solidarity mass at a point is the total mass of fibres through it, and it
//! sets the local cost density. Patterns are kept in a canonical arrangement
//! where any two fibres that overlap along a stretch share exactly the same
//! vertices there, so solidarity mass is constant on every arrangement
//! segment.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flux_graph::{edge_cost, CostSpec};
use crate::geometry::{
    self, dist, is_finite, lerp, point_on_segment, segment_intersection, tolerance, Point, PointKey,
    SegmentIntersection, SegmentKey,
};
use crate::measures::{Atom, DiscreteMeasure};

#[derive(Debug, Clone, PartialEq)]
pub struct Fibre {
    pub polyline: Vec<Point>,
    pub mass: f64,
    /// Parameter value of every polyline vertex, increasing from 0 to 1.
    pub times: Vec<f64>,
}

impl Fibre {
    /// Fibre with uniformly spaced vertex times.
    pub fn new(polyline: Vec<Point>, mass: f64) -> Self {
        let k = polyline.len();
        let times = if k <= 1 {
            vec![0.0; k]
        } else {
            (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
        };
        Fibre { polyline, mass, times }
    }

    pub fn start(&self) -> &[f64] {
        &self.polyline[0]
    }

    pub fn end(&self) -> &[f64] {
        self.polyline.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        geometry::polyline_length(&self.polyline)
    }

    /// Arc length at every vertex.
    pub fn arc_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.polyline.len());
        let mut s = 0.0;
        out.push(0.0);
        for w in self.polyline.windows(2) {
            s += dist(&w[0], &w[1]);
            out.push(s);
        }
        out
    }

    /// Speed `|dχ/dt|` on each segment.
    pub fn speeds(&self) -> Vec<f64> {
        self.polyline
            .windows(2)
            .zip(self.times.windows(2))
            .map(|(p, t)| dist(&p[0], &p[1]) / (t[1] - t[0]))
            .collect()
    }

    /// Segments as endpoint pairs; a single-point fibre yields one degenerate segment.
    fn segments(&self) -> Vec<(&[f64], &[f64])> {
        if self.polyline.len() == 1 {
            return vec![(&self.polyline[0], &self.polyline[0])];
        }
        self.polyline
            .windows(2)
            .map(|w| (w[0].as_slice(), w[1].as_slice()))
            .collect()
    }

    /// Point at arc length `s`.
    pub fn point_at(&self, s: f64) -> Point {
        let arcs = self.arc_params();
        for i in 0..self.polyline.len().saturating_sub(1) {
            if s <= arcs[i + 1] || i + 2 == self.polyline.len() {
                let len = arcs[i + 1] - arcs[i];
                let t = if len > 0.0 { ((s - arcs[i]) / len).clamp(0.0, 1.0) } else { 0.0 };
                return lerp(&self.polyline[i], &self.polyline[i + 1], t);
            }
        }
        self.polyline[0].clone()
    }

    /// Whether the polyline returns to a point it has left.
    pub fn has_loop(&self) -> bool {
        let segs = self.segments();
        if self.polyline.len() < 2 {
            return false;
        }
        for i in 0..segs.len() {
            for j in (i + 1)..segs.len() {
                let (a, b) = segs[i];
                let (c, d) = segs[j];
                let tol = tolerance(&[a, b, c, d]);
                let hit = segment_intersection(a, b, c, d, tol);
                let looped = if j == i + 1 {
                    matches!(hit, SegmentIntersection::Overlap { .. })
                } else {
                    !matches!(hit, SegmentIntersection::Disjoint)
                };
                if looped {
                    return true;
                }
            }
        }
        false
    }
}

/// One piece of the canonical arrangement with the fibres that traverse it.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrangementSegment {
    pub a: Point,
    pub b: Point,
    pub length: f64,
    /// `(fibre index, traversed from a to b)`, one entry per traversal.
    pub traversals: Vec<(usize, bool)>,
    /// Solidarity mass: total mass of the distinct fibres on this segment.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrrigationPattern {
    dim: usize,
    fibres: Vec<Fibre>,
}

impl IrrigationPattern {
    pub fn new(dim: usize, fibres: Vec<Fibre>) -> Result<Self> {
        let mut clean = Vec::with_capacity(fibres.len());
        for (i, f) in fibres.into_iter().enumerate() {
            clean.push(validate_fibre(i, dim, f)?);
        }
        Ok(IrrigationPattern { dim, fibres: canonicalize(clean) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fibres(&self) -> &[Fibre] {
        &self.fibres
    }

    pub fn total_mass(&self) -> f64 {
        self.fibres.iter().map(|f| f.mass).sum()
    }

    /// Canonical segments in a deterministic order.
    pub fn arrangement(&self) -> Vec<ArrangementSegment> {
        let mut map: BTreeMap<SegmentKey, ArrangementSegment> = BTreeMap::new();
        for (fi, f) in self.fibres.iter().enumerate() {
            for w in f.polyline.windows(2) {
                let key = SegmentKey::of(&w[0], &w[1]);
                let forward = PointKey::of(&w[0]) == key.0;
                let seg = map.entry(key).or_insert_with(|| {
                    let (a, b) = if forward { (w[0].clone(), w[1].clone()) } else { (w[1].clone(), w[0].clone()) };
                    ArrangementSegment { length: dist(&a, &b), a, b, traversals: Vec::new(), mass: 0.0 }
                });
                if !seg.traversals.iter().any(|&(g, _)| g == fi) {
                    seg.mass += f.mass;
                }
                seg.traversals.push((fi, forward));
            }
        }
        map.into_values().collect()
    }

    /// Fibre pairs that traverse a common segment in opposite directions.
    pub fn opposite_overlaps(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for seg in self.arrangement() {
            for (i, &(f, df)) in seg.traversals.iter().enumerate() {
                for &(g, dg) in &seg.traversals[i + 1..] {
                    if f != g && df != dg {
                        let pair = (f.min(g), f.max(g));
                        if !out.contains(&pair) {
                            out.push(pair);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Verifies that distinct arrangement segments never overlap along a
    /// stretch of positive length.
    pub fn check_canonical(&self) -> Result<Vec<ArrangementSegment>> {
        let segs = self.arrangement();
        for i in 0..segs.len() {
            for j in (i + 1)..segs.len() {
                let (a, b, c, d) = (&segs[i].a, &segs[i].b, &segs[j].a, &segs[j].b);
                let tol = tolerance(&[a, b, c, d]);
                if geometry::collinear_overlap(a, b, c, d, tol).is_some() {
                    return Err(Error::NonCanonicalOverlap(segs[i].traversals[0].0, segs[j].traversals[0].0));
                }
            }
        }
        Ok(segs)
    }

    /// Index of the first fibre with a loop, if any.
    pub fn first_loop(&self) -> Option<usize> {
        self.fibres.iter().position(Fibre::has_loop)
    }
}

fn validate_fibre(i: usize, dim: usize, f: Fibre) -> Result<Fibre> {
    let ctx = || format!("fibre {i}");
    if !f.mass.is_finite() || f.mass <= 0.0 {
        return Err(Error::invalid(ctx(), format!("mass must be positive and finite, got {}", f.mass)));
    }
    if f.polyline.is_empty() {
        return Err(Error::invalid(ctx(), "polyline needs at least one point"));
    }
    if f.times.len() != f.polyline.len() {
        return Err(Error::invalid(ctx(), "times and polyline differ in length"));
    }
    for p in &f.polyline {
        if p.len() != dim {
            return Err(Error::invalid(ctx(), format!("point has {} coordinates, expected {dim}", p.len())));
        }
        if !is_finite(p) {
            return Err(Error::invalid(ctx(), "point is not finite"));
        }
    }
    let mut polyline: Vec<Point> = Vec::with_capacity(f.polyline.len());
    let mut times: Vec<f64> = Vec::with_capacity(f.times.len());
    for (p, t) in f.polyline.into_iter().zip(f.times) {
        if polyline.last().is_some_and(|q| PointKey::of(q) == PointKey::of(&p)) {
            continue;
        }
        if !t.is_finite() || times.last().is_some_and(|&s| t <= s) {
            return Err(Error::invalid(ctx(), "times must be finite and strictly increasing"));
        }
        polyline.push(p);
        times.push(t);
    }
    Ok(Fibre { polyline, mass: f.mass, times })
}

/// Splits every fibre segment at each pattern vertex lying in its interior.
/// Inserted points reuse the exact coordinates of the vertex they snap to.
fn canonicalize(fibres: Vec<Fibre>) -> Vec<Fibre> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for f in &fibres {
        for p in &f.polyline {
            if seen.insert(PointKey::of(p)) {
                vertices.push(p.clone());
            }
        }
    }
    fibres
        .into_iter()
        .map(|f| {
            let mut polyline = Vec::with_capacity(f.polyline.len());
            let mut times = Vec::with_capacity(f.times.len());
            for i in 0..f.polyline.len() {
                polyline.push(f.polyline[i].clone());
                times.push(f.times[i]);
                if i + 1 == f.polyline.len() {
                    break;
                }
                let (p, q) = (&f.polyline[i], &f.polyline[i + 1]);
                let (kp, kq) = (PointKey::of(p), PointKey::of(q));
                let mut inner: Vec<(f64, &Point)> = vertices
                    .iter()
                    .filter(|v| {
                        let k = PointKey::of(v);
                        k != kp && k != kq
                    })
                    .filter_map(|v| {
                        let tol = tolerance(&[p, q, v]);
                        point_on_segment(v, p, q, tol)
                            .filter(|&t| t > 0.0 && t < 1.0)
                            .map(|t| (t, v))
                    })
                    .collect();
                inner.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (t, v) in inner {
                    let time = f.times[i] + t * (f.times[i + 1] - f.times[i]);
                    if time > *times.last().unwrap() && time < f.times[i + 1] {
                        polyline.push(v.clone());
                        times.push(time);
                    }
                }
            }
            Fibre { polyline, mass: f.mass, times }
        })
        .collect()
}

/// Start points and end points of the fibres, weighted by fibre mass.
pub fn irrigating_measures(chi: &IrrigationPattern) -> (DiscreteMeasure, DiscreteMeasure) {
    let starts = chi.fibres.iter().map(|f| Atom { pos: f.start().to_vec(), mass: f.mass }).collect();
    let ends = chi.fibres.iter().map(|f| Atom { pos: f.end().to_vec(), mass: f.mass }).collect();
    (
        DiscreteMeasure::new(chi.dim, starts).expect("fibre masses are positive"),
        DiscreteMeasure::new(chi.dim, ends).expect("fibre masses are positive"),
    )
}

/// Total mass of the fibres passing through `x`.
pub fn solidarity_mass(chi: &IrrigationPattern, x: &[f64]) -> f64 {
    chi.fibres
        .iter()
        .filter(|f| {
            f.segments().into_iter().any(|(a, b)| {
                let tol = tolerance(&[a, b, x]);
                point_on_segment(x, a, b, tol).is_some()
            })
        })
        .map(|f| f.mass)
        .sum()
}

/// Segmentwise cost `Σ c(m) · length` over the canonical arrangement, where
/// `m` is the solidarity mass on the segment.
pub fn pattern_cost(chi: &IrrigationPattern, spec: CostSpec) -> Result<f64> {
    Ok(chi
        .check_canonical()?
        .iter()
        .map(|s| edge_cost(s.mass, spec) * s.length)
        .sum())
}

/// Re-times every fibre so that it moves at constant speed. The image of
/// each fibre, and hence the cost, is unchanged.
pub fn reparameterise_constant_speed(chi: &IrrigationPattern) -> IrrigationPattern {
    let fibres = chi
        .fibres
        .iter()
        .map(|f| {
            let arcs = f.arc_params();
            let total = *arcs.last().unwrap();
            let times = if total > 0.0 {
                let mut t: Vec<f64> = arcs.iter().map(|s| s / total).collect();
                *t.last_mut().unwrap() = 1.0;
                t
            } else {
                f.times.clone()
            };
            Fibre { polyline: f.polyline.clone(), mass: f.mass, times }
        })
        .collect();
    IrrigationPattern { dim: chi.dim, fibres }
}

pub fn is_loop_free(chi: &IrrigationPattern) -> bool {
    chi.first_loop().is_none()
}

/// A maximal connected piece of `f ∩ g`, as arc-length ranges on both fibres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SharedComponent {
    pub f: (f64, f64),
    pub g: (f64, f64),
}

pub(crate) fn shared_components(f: &Fibre, g: &Fibre) -> Vec<SharedComponent> {
    let (fa, ga) = (f.arc_params(), g.arc_params());
    let (fs, gs) = (f.segments(), g.segments());
    let mut pieces: Vec<SharedComponent> = Vec::new();
    for (i, &(a, b)) in fs.iter().enumerate() {
        let lf = fa.get(i + 1).map_or(0.0, |s| s - fa[i]);
        for (j, &(c, d)) in gs.iter().enumerate() {
            let lg = ga.get(j + 1).map_or(0.0, |s| s - ga[j]);
            let tol = tolerance(&[a, b, c, d]);
            match segment_intersection(a, b, c, d, tol) {
                SegmentIntersection::Disjoint => {}
                SegmentIntersection::Point { s, t } => {
                    let (x, y) = (fa[i] + s * lf, ga[j] + t * lg);
                    pieces.push(SharedComponent { f: (x, x), g: (y, y) });
                }
                SegmentIntersection::Overlap { s0, s1, t0, t1 } => {
                    let (y0, y1) = (ga[j] + t0 * lg, ga[j] + t1 * lg);
                    pieces.push(SharedComponent {
                        f: (fa[i] + s0 * lf, fa[i] + s1 * lf),
                        g: (y0.min(y1), y0.max(y1)),
                    });
                }
            }
        }
    }
    pieces.sort_by(|p, q| p.f.0.total_cmp(&q.f.0));
    let tol = 1e-10 * (1.0 + fa.last().unwrap() + ga.last().unwrap());
    let mut merged: Vec<SharedComponent> = Vec::new();
    for p in pieces {
        match merged.last_mut() {
            Some(cur) if p.f.0 <= cur.f.1 + tol => {
                cur.f.1 = cur.f.1.max(p.f.1);
                cur.g.0 = cur.g.0.min(p.g.0);
                cur.g.1 = cur.g.1.max(p.g.1);
            }
            _ => merged.push(p),
        }
    }
    merged
}

/// Two shared components met in the same order by both fibres: the fibres
/// connect them along different routes.
pub(crate) fn single_path_violation(f: &Fibre, g: &Fibre) -> Option<(SharedComponent, SharedComponent)> {
    let comps = shared_components(f, g);
    let tol = 1e-10 * (1.0 + f.length() + g.length());
    for i in 0..comps.len() {
        for j in (i + 1)..comps.len() {
            if comps[i].g.1 + tol < comps[j].g.0 {
                return Some((comps[i], comps[j]));
            }
        }
    }
    None
}

/// Whether fibres passing through two common points in the same order always
/// share the route between them. Requires a loop-free pattern.
pub fn check_single_path(chi: &IrrigationPattern) -> Result<bool> {
    if let Some(i) = chi.first_loop() {
        return Err(Error::PatternHasLoop(i));
    }
    for i in 0..chi.fibres.len() {
        for j in (i + 1)..chi.fibres.len() {
            if single_path_violation(&chi.fibres[i], &chi.fibres[j]).is_some() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
