//! Weighted directed geometric graphs viewed as discrete mass fluxes.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::geometry::{self, dist, is_finite, lex_cmp, Point, PointKey};
use crate::measures::{Atom, DiscreteMeasure};

/// Per-unit-length transport cost as a function of the transported mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostSpec {
    /// `c(w) = w^alpha`.
    BranchedTransport { alpha: f64 },
    /// `c(w) = min(a w, w + eps)`.
    UrbanPlanning { eps: f64, a: f64 },
}

impl CostSpec {
    /// `alpha = 1` is accepted: it degenerates to plain mass times length.
    pub fn branched(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(CostSpec::BranchedTransport { alpha })
    }

    pub fn urban(eps: f64, a: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        if !(a.is_finite() && a > 1.0) {
            return Err(Error::InvalidParameter(format!("a must exceed 1, got {a}")));
        }
        Ok(CostSpec::UrbanPlanning { eps, a })
    }

    pub fn cost(&self, w: f64) -> f64 {
        edge_cost(w, *self)
    }

    /// Mass above which network travel pays off, `eps / (a - 1)`.
    pub fn network_threshold(&self) -> Option<f64> {
        match *self {
            CostSpec::UrbanPlanning { eps, a } => Some(eps / (a - 1.0)),
            CostSpec::BranchedTransport { .. } => None,
        }
    }

    pub fn is_urban(&self) -> bool {
        matches!(self, CostSpec::UrbanPlanning { .. })
    }
}

pub fn edge_cost(w: f64, spec: CostSpec) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    match spec {
        CostSpec::BranchedTransport { alpha } => w.powf(alpha),
        CostSpec::UrbanPlanning { eps, a } => (a * w).min(w + eps),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
}

/// A finite directed graph embedded in `R^dim` with nonnegative edge weights.
///
/// Stored in canonical form: vertices are distinct and sorted
/// lexicographically by coordinates, every vertex touches an edge, parallel
/// edges are merged, zero-weight edges are dropped and edges are sorted by
/// `(tail, head)`. Two graphs describing the same edge set therefore compare
/// equal.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxGraph {
    dim: usize,
    vertices: Vec<Point>,
    edges: Vec<Edge>,
}

impl FluxGraph {
    pub fn empty(dim: usize) -> Self {
        FluxGraph { dim, vertices: Vec::new(), edges: Vec::new() }
    }

    pub fn new(dim: usize, vertices: Vec<Point>, edges: Vec<Edge>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::invalid(
                    format!("vertex {i}"),
                    format!("has {} coordinates, expected {dim}", v.len()),
                ));
            }
            if !is_finite(v) {
                return Err(Error::invalid(format!("vertex {i}"), "position is not finite"));
            }
        }
        let mut merged: BTreeMap<(PointKey, PointKey), (usize, usize, f64)> = BTreeMap::new();
        for (k, e) in edges.iter().enumerate() {
            if e.tail >= vertices.len() || e.head >= vertices.len() {
                return Err(Error::invalid(format!("edge {k}"), "vertex index out of range"));
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::invalid(
                    format!("edge {k}"),
                    format!("weight must be finite and nonnegative, got {}", e.weight),
                ));
            }
            let (kt, kh) = (PointKey::of(&vertices[e.tail]), PointKey::of(&vertices[e.head]));
            if kt == kh {
                return Err(Error::invalid(format!("edge {k}"), "tail and head coincide"));
            }
            merged
                .entry((kt, kh))
                .and_modify(|m| m.2 += e.weight)
                .or_insert((e.tail, e.head, e.weight));
        }
        let kept: Vec<(usize, usize, f64)> =
            merged.into_values().filter(|&(_, _, w)| w > 0.0).collect();

        let mut used: Vec<Point> = Vec::new();
        let mut seen: HashMap<PointKey, ()> = HashMap::new();
        for &(t, h, _) in &kept {
            for v in [t, h] {
                if seen.insert(PointKey::of(&vertices[v]), ()).is_none() {
                    used.push(vertices[v].clone());
                }
            }
        }
        used.sort_by(|a, b| lex_cmp(a, b));
        let index: HashMap<PointKey, usize> =
            used.iter().enumerate().map(|(i, p)| (PointKey::of(p), i)).collect();
        let mut out_edges: Vec<Edge> = kept
            .into_iter()
            .map(|(t, h, w)| Edge {
                tail: index[&PointKey::of(&vertices[t])],
                head: index[&PointKey::of(&vertices[h])],
                weight: w,
            })
            .collect();
        out_edges.sort_by_key(|e| (e.tail, e.head));
        Ok(FluxGraph { dim, vertices: used, edges: out_edges })
    }

    /// Builds a graph from `(tail position, head position, weight)` triples.
    /// Zero-weight and zero-length segments are skipped.
    pub fn from_segments(dim: usize, segments: impl IntoIterator<Item = (Point, Point, f64)>) -> Result<Self> {
        let mut vertices: Vec<Point> = Vec::new();
        let mut index: HashMap<PointKey, usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut id = |p: Point, vertices: &mut Vec<Point>| -> usize {
            *index.entry(PointKey::of(&p)).or_insert_with(|| {
                vertices.push(p);
                vertices.len() - 1
            })
        };
        for (p, q, w) in segments {
            if w == 0.0 || PointKey::of(&p) == PointKey::of(&q) {
                continue;
            }
            let tail = id(p, &mut vertices);
            let head = id(q, &mut vertices);
            edges.push(Edge { tail, head, weight: w });
        }
        FluxGraph::new(dim, vertices, edges)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let Edge { tail, head, .. } = self.edges[e];
        dist(&self.vertices[tail], &self.vertices[head])
    }

    pub fn vertex_index(&self, p: &[f64]) -> Option<usize> {
        let key = PointKey::of(p);
        self.vertices.iter().position(|v| PointKey::of(v) == key)
    }

    /// Index of the edge `tail -> head`, if present.
    pub fn find_edge(&self, tail: usize, head: usize) -> Option<usize> {
        self.edges
            .binary_search_by_key(&(tail, head), |e| (e.tail, e.head))
            .ok()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point, f64)> + '_ {
        self.edges
            .iter()
            .map(|e| (self.vertices[e.tail].clone(), self.vertices[e.head].clone(), e.weight))
    }

    /// Outflow minus inflow at every vertex.
    pub fn net_outflow(&self) -> Vec<f64> {
        let mut net = vec![0.0; self.vertices.len()];
        for e in &self.edges {
            net[e.tail] += e.weight;
            net[e.head] -= e.weight;
        }
        net
    }

    /// Same graph with every edge reversed.
    pub fn negated(&self) -> FluxGraph {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { tail: e.head, head: e.tail, weight: e.weight })
            .collect();
        FluxGraph::new(self.dim, self.vertices.clone(), edges).expect("reversal keeps validity")
    }

    pub fn scaled(&self, factor: f64) -> FluxGraph {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { weight: e.weight * factor, ..*e })
            .collect();
        FluxGraph::new(self.dim, self.vertices.clone(), edges).expect("scaling keeps validity")
    }

    /// Keeps only the listed edges.
    pub fn subgraph(&self, edge_ids: &[usize]) -> FluxGraph {
        let edges = edge_ids.iter().map(|&i| self.edges[i]).collect();
        FluxGraph::new(self.dim, self.vertices.clone(), edges).expect("subgraph keeps validity")
    }
}

/// Source and sink parts of the divergence, one atom per vertex with nonzero
/// net flow. Nets below `1e-12` of the vertex throughput count as zero.
pub fn divergence(g: &FluxGraph) -> (DiscreteMeasure, DiscreteMeasure) {
    let mut net = vec![0.0; g.vertices.len()];
    let mut through = vec![0.0; g.vertices.len()];
    for e in &g.edges {
        net[e.tail] += e.weight;
        net[e.head] -= e.weight;
        through[e.tail] += e.weight;
        through[e.head] += e.weight;
    }
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (v, (&n, &t)) in net.iter().zip(&through).enumerate() {
        if n.abs() <= 1e-12 * t {
            continue;
        }
        let atom = Atom { pos: g.vertices[v].clone(), mass: n.abs() };
        if n > 0.0 {
            plus.push(atom);
        } else {
            minus.push(atom);
        }
    }
    (
        DiscreteMeasure::new(g.dim, plus).expect("distinct vertices"),
        DiscreteMeasure::new(g.dim, minus).expect("distinct vertices"),
    )
}

/// Whether `g` moves `plus` onto `minus`: the signed residual
/// `div g - (plus - minus)` is within `tol` at every point.
pub fn check_mass_flux(g: &FluxGraph, plus: &DiscreteMeasure, minus: &DiscreteMeasure, tol: f64) -> bool {
    let mut residual: HashMap<PointKey, f64> = HashMap::new();
    for (v, n) in g.net_outflow().into_iter().enumerate() {
        *residual.entry(PointKey::of(&g.vertices[v])).or_default() += n;
    }
    for a in plus.atoms() {
        *residual.entry(PointKey::of(&a.pos)).or_default() -= a.mass;
    }
    for a in minus.atoms() {
        *residual.entry(PointKey::of(&a.pos)).or_default() += a.mass;
    }
    residual.values().all(|r| r.abs() <= tol)
}

pub fn graph_cost(g: &FluxGraph, spec: CostSpec) -> f64 {
    (0..g.edges.len())
        .map(|i| edge_cost(g.edges[i].weight, spec) * g.edge_length(i))
        .sum()
}

/// Mass times length summed over edges: the total variation of the flux
/// measure when no two edges overlap.
pub fn total_variation(g: &FluxGraph) -> f64 {
    (0..g.edges.len()).map(|i| g.edges[i].weight * g.edge_length(i)).sum()
}

/// Edges whose weight strictly exceeds `eps / (a - 1)`, i.e. where riding a
/// network beats paying the off-network rate.
pub fn extract_network_subgraph(g: &FluxGraph, eps: f64, a: f64) -> Vec<usize> {
    let threshold = eps / (a - 1.0);
    (0..g.edges.len()).filter(|&i| g.edges[i].weight > threshold).collect()
}

/// Vector-measure sum of two graphs.
pub fn graph_sum(g1: &FluxGraph, g2: &FluxGraph) -> Result<FluxGraph> {
    if g1.dim != g2.dim {
        return Err(Error::DimensionMismatch { expected: g1.dim, found: g2.dim });
    }
    sum_segments(g1.dim, g1.segments().chain(g2.segments()).collect())
}

/// Flux difference `g1 - g2` as a graph.
pub fn graph_difference(g1: &FluxGraph, g2: &FluxGraph) -> Result<FluxGraph> {
    graph_sum(g1, &g2.negated())
}

/// Adds weighted segments as vector measures: collinear overlapping pieces are
/// split at every endpoint, same-direction weights add and opposite ones
/// cancel. Transversal crossings are left alone.
pub fn sum_segments(dim: usize, segments: Vec<(Point, Point, f64)>) -> Result<FluxGraph> {
    let refs: Vec<(&[f64], &[f64])> =
        segments.iter().map(|(p, q, _)| (p.as_slice(), q.as_slice())).collect();
    let classes = geometry::overlap_classes(&refs);
    let mut out: Vec<(Point, Point, f64)> = Vec::new();
    for class in classes {
        if class.len() == 1 {
            out.push(segments[class[0]].clone());
            continue;
        }
        let (origin, end, _) = &segments[class[0]];
        let dir = geometry::sub(end, origin);
        let len2 = geometry::dot(&dir, &dir);
        let param = |p: &[f64]| geometry::dot(&geometry::sub(p, origin), &dir) / len2;

        let mut breaks: Vec<(f64, &Point)> = Vec::new();
        let mut spans: Vec<(f64, f64, f64)> = Vec::new();
        let mut wmax = 0.0_f64;
        for &i in &class {
            let (p, q, w) = &segments[i];
            let (tp, tq) = (param(p), param(q));
            breaks.push((tp, p));
            breaks.push((tq, q));
            let signed = if tq > tp { *w } else { -*w };
            spans.push((tp.min(tq), tp.max(tq), signed));
            wmax = wmax.max(w.abs());
        }
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex_cmp(a.1, b.1)));
        breaks.dedup_by(|a, b| PointKey::of(a.1) == PointKey::of(b.1));
        for pair in breaks.windows(2) {
            let (t0, p0) = pair[0];
            let (t1, p1) = pair[1];
            if t1 <= t0 {
                continue;
            }
            let s: f64 = spans
                .iter()
                .filter(|&&(lo, hi, _)| lo <= t0 && t1 <= hi)
                .map(|&(_, _, w)| w)
                .sum();
            if s.abs() <= 1e-12 * wmax {
                continue;
            }
            if s > 0.0 {
                out.push((p0.clone(), p1.clone(), s));
            } else {
                out.push((p1.clone(), p0.clone(), -s));
            }
        }
    }
    FluxGraph::from_segments(dim, out)
}
