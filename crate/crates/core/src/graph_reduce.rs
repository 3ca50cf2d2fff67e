//! Cycle reduction, path decomposition and long-path pruning of fluxes.

use crate::error::{Error, Result};
use crate::flux_graph::{graph_sum, sum_segments, Edge, FluxGraph};
use crate::geometry::{self, dist, Point};
use crate::measures::{Atom, DiscreteMeasure};

/// A directed simple cycle: `edges[i]` runs from `vertices[i]` to
/// `vertices[(i + 1) % len]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

impl Cycle {
    /// Smallest edge weight along the cycle.
    pub fn weight(&self, g: &FluxGraph) -> f64 {
        self.edges
            .iter()
            .map(|&e| g.edges()[e].weight)
            .fold(f64::INFINITY, f64::min)
    }
}

fn out_ranges(g: &FluxGraph) -> Vec<(usize, usize)> {
    let n = g.vertices().len();
    let mut ranges = vec![(0, 0); n];
    let edges = g.edges();
    let mut i = 0;
    for (v, range) in ranges.iter_mut().enumerate() {
        let start = i;
        while i < edges.len() && edges[i].tail == v {
            i += 1;
        }
        *range = (start, i);
    }
    ranges
}

/// First directed cycle met by a depth-first search that starts from the
/// lowest vertex index and explores heads in increasing order. The cycle is
/// rotated to begin at its smallest vertex.
pub fn find_cycle(g: &FluxGraph) -> Option<Cycle> {
    let n = g.vertices().len();
    let ranges = out_ranges(g);
    let edges = g.edges();
    // 0 = unseen, 1 = on stack, 2 = finished
    let mut state = vec![0u8; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, ranges[root].0)];
        let mut via: Vec<usize> = Vec::new();
        state[root] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < ranges[v].1 {
                let e = *next;
                *next += 1;
                if edges[e].weight <= 0.0 {
                    continue;
                }
                let h = edges[e].head;
                match state[h] {
                    0 => {
                        state[h] = 1;
                        via.push(e);
                        stack.push((h, ranges[h].0));
                    }
                    1 => {
                        let at = stack.iter().position(|&(u, _)| u == h).unwrap();
                        let mut vertices: Vec<usize> = stack[at..].iter().map(|&(u, _)| u).collect();
                        let mut cyc_edges: Vec<usize> = via[at..].to_vec();
                        cyc_edges.push(e);
                        let rot = (0..vertices.len()).min_by_key(|&i| vertices[i]).unwrap();
                        vertices.rotate_left(rot);
                        cyc_edges.rotate_left(rot);
                        return Some(Cycle { vertices, edges: cyc_edges });
                    }
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
                via.pop();
            }
        }
    }
    None
}

fn validate_cycle(g: &FluxGraph, c: &Cycle) -> Result<()> {
    let k = c.vertices.len();
    if k == 0 || c.edges.len() != k {
        return Err(Error::NotACycle("vertex and edge lists must be nonempty and of equal length".into()));
    }
    let mut seen = vec![false; g.vertices().len()];
    for i in 0..k {
        let v = c.vertices[i];
        if v >= seen.len() || seen[v] {
            return Err(Error::NotACycle(format!("vertex {v} is repeated or out of range")));
        }
        seen[v] = true;
        let e = *g
            .edges()
            .get(c.edges[i])
            .ok_or_else(|| Error::NotACycle(format!("edge {} out of range", c.edges[i])))?;
        if e.tail != v || e.head != c.vertices[(i + 1) % k] {
            return Err(Error::NotACycle(format!("edge {} does not continue the walk", c.edges[i])));
        }
    }
    Ok(())
}

/// Subtracts the cycle weight along `c`, removing its lightest edges.
/// The divergence is unchanged.
pub fn reduce_cycle(g: &FluxGraph, c: &Cycle) -> Result<FluxGraph> {
    validate_cycle(g, c)?;
    let w0 = c.weight(g);
    let mut edges: Vec<Edge> = g.edges().to_vec();
    for &e in &c.edges {
        let w = edges[e].weight;
        edges[e].weight = if w <= w0 { 0.0 } else { w - w0 };
    }
    FluxGraph::new(g.dim(), g.vertices().to_vec(), edges)
}

/// Reduces cycles one at a time until the graph is acyclic.
pub fn reduce_all_cycles(g: &FluxGraph) -> FluxGraph {
    let mut current = g.clone();
    while let Some(c) = find_cycle(&current) {
        current = reduce_cycle(&current, &c).expect("found cycles are valid");
    }
    current
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPath {
    /// Vertex indices in the decomposed graph.
    pub vertex_ids: Vec<usize>,
    pub points: Vec<Point>,
    pub weight: f64,
}

impl TransportPath {
    pub fn length(&self) -> f64 {
        geometry::polyline_length(&self.points)
    }
}

/// Weighted collection of source-to-sink paths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransportPathMeasure {
    pub dim: usize,
    pub paths: Vec<TransportPath>,
}

impl TransportPathMeasure {
    pub fn total_mass(&self) -> f64 {
        self.paths.iter().map(|p| p.weight).sum()
    }

    /// Start and end point masses of the paths.
    pub fn marginals(&self) -> (DiscreteMeasure, DiscreteMeasure) {
        let starts = self.paths.iter().map(|p| Atom { pos: p.points[0].clone(), mass: p.weight });
        let ends = self
            .paths
            .iter()
            .map(|p| Atom { pos: p.points.last().unwrap().clone(), mass: p.weight });
        (
            DiscreteMeasure::new(self.dim, starts.collect()).expect("path weights are positive"),
            DiscreteMeasure::new(self.dim, ends.collect()).expect("path weights are positive"),
        )
    }

    /// Sum of the paths as weighted graphs.
    pub fn to_graph(&self) -> FluxGraph {
        let segs = self
            .paths
            .iter()
            .flat_map(|p| p.points.windows(2).map(move |w| (w[0].clone(), w[1].clone(), p.weight)))
            .collect();
        sum_segments(self.dim, segs).expect("paths come from a valid graph")
    }

    /// Per-edge sum of path weights, indexed like `g.edges()`.
    pub fn edge_loads(&self, g: &FluxGraph) -> Vec<f64> {
        let mut load = vec![0.0; g.edges().len()];
        for p in &self.paths {
            for w in p.vertex_ids.windows(2) {
                if let Some(e) = g.find_edge(w[0], w[1]) {
                    load[e] += p.weight;
                }
            }
        }
        load
    }
}

/// Greedy flow decomposition of an acyclic flux into maximal paths.
///
/// Sources are taken in vertex order; from each, the walk follows the
/// smallest-head edge with remaining weight until it reaches a vertex with no
/// remaining outflow, and the path is peeled at its bottleneck. Each peel
/// empties an edge or a source, so there are at most `|E| + #sources` paths.
pub fn path_decompose(g: &FluxGraph) -> Result<TransportPathMeasure> {
    if find_cycle(g).is_some() {
        return Err(Error::Cyclic);
    }
    let ranges = out_ranges(g);
    let edges = g.edges();
    let mut rest: Vec<f64> = edges.iter().map(|e| e.weight).collect();
    let mut supply: Vec<f64> = g.net_outflow().into_iter().map(|n| n.max(0.0)).collect();
    let wmax = rest.iter().copied().fold(0.0_f64, f64::max);
    let eps = 1e-13 * wmax;
    let mut paths = Vec::new();

    for s in 0..g.vertices().len() {
        loop {
            if supply[s] <= eps {
                break;
            }
            let mut ids = vec![s];
            let mut used = Vec::new();
            let mut v = s;
            while let Some(e) = (ranges[v].0..ranges[v].1).find(|&e| rest[e] > eps) {
                used.push(e);
                v = edges[e].head;
                ids.push(v);
            }
            if used.is_empty() {
                break;
            }
            let b = used.iter().map(|&e| rest[e]).fold(supply[s], f64::min);
            for &e in &used {
                rest[e] = if rest[e] <= b { 0.0 } else { rest[e] - b };
                if rest[e] <= eps {
                    rest[e] = 0.0;
                }
            }
            supply[s] = if supply[s] <= b { 0.0 } else { supply[s] - b };
            let points = ids.iter().map(|&i| g.vertices()[i].clone()).collect();
            paths.push(TransportPath { vertex_ids: ids, points, weight: b });
        }
    }
    Ok(TransportPathMeasure { dim: g.dim(), paths })
}

/// Diameter of the union of the supports.
pub fn support_diameter(plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> f64 {
    let pts: Vec<&[f64]> = plus.positions().chain(minus.positions()).collect();
    geometry::diameter(&pts)
}

/// Outcome of [`prune_long_paths_report`].
#[derive(Debug, Clone)]
pub struct PruneReport {
    pub graph: FluxGraph,
    pub diameter: f64,
    /// Total weight of removed long paths, summed over rounds.
    pub removed_mass: f64,
    /// Mass-weighted length of removed long paths, summed over rounds.
    pub removed_mass_length: f64,
    pub rounds: usize,
}

/// Replaces every decomposition path longer than `2 a diam` by straight
/// source-to-sink edges (see [`prune_long_paths_report`]).
pub fn prune_long_paths(
    g: &FluxGraph,
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    a: f64,
) -> Result<FluxGraph> {
    prune_long_paths_report(g, plus, minus, a).map(|r| r.graph)
}

/// Long-path pruning with the bookkeeping needed to check the cost bounds.
///
/// Each round decomposes the graph, drops the paths longer than
/// `2 a diam(spt plus ∪ spt minus)`, and restores the divergence with straight
/// edges pairing the freed source mass with the freed sink mass, nearest pairs
/// first. Rounds repeat (with cycle reduction in between) until no path of
/// the current decomposition is too long.
pub fn prune_long_paths_report(
    g: &FluxGraph,
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    a: f64,
) -> Result<PruneReport> {
    if a.is_nan() || a <= 1.0 {
        return Err(Error::InvalidParameter(format!("a must exceed 1, got {a}")));
    }
    if find_cycle(g).is_some() {
        return Err(Error::Cyclic);
    }
    let diameter = support_diameter(plus, minus);
    let limit = 2.0 * a * diameter;
    let mut current = g.clone();
    let mut removed_mass = 0.0;
    let mut removed_mass_length = 0.0;
    let mut rounds = 0;
    const MAX_ROUNDS: usize = 64;

    while rounds < MAX_ROUNDS {
        let paths = path_decompose(&current)?;
        let (long, short): (Vec<&TransportPath>, Vec<&TransportPath>) =
            paths.paths.iter().partition(|p| p.length() > limit);
        if long.is_empty() {
            break;
        }
        rounds += 1;
        removed_mass += long.iter().map(|p| p.weight).sum::<f64>();
        removed_mass_length += long.iter().map(|p| p.weight * p.length()).sum::<f64>();

        // Remaining edge weights w'(e) = w(e) - load of long paths on e.
        let mut load = vec![0.0; current.edges().len()];
        for p in &long {
            for w in p.vertex_ids.windows(2) {
                let e = current.find_edge(w[0], w[1]).expect("path edges exist");
                load[e] += p.weight;
            }
        }
        let mut kept_edges: Vec<Edge> = current.edges().to_vec();
        for (e, l) in kept_edges.iter_mut().zip(&load) {
            e.weight = if e.weight <= *l { 0.0 } else { e.weight - l };
        }
        // Edges used only by long paths must vanish exactly.
        let mut short_use = vec![false; current.edges().len()];
        for p in &short {
            for w in p.vertex_ids.windows(2) {
                short_use[current.find_edge(w[0], w[1]).unwrap()] = true;
            }
        }
        for (e, used) in kept_edges.iter_mut().zip(&short_use) {
            if !used {
                e.weight = 0.0;
            }
        }
        let kept = FluxGraph::new(current.dim(), current.vertices().to_vec(), kept_edges)?;
        let repair = straight_repair(&long, current.dim());
        current = reduce_all_cycles(&graph_sum(&kept, &repair)?);
    }
    Ok(PruneReport { graph: current, diameter, removed_mass, removed_mass_length, rounds })
}

/// Straight edges moving the start mass of `paths` to their end mass,
/// matching the globally closest remaining pair first.
fn straight_repair(paths: &[&TransportPath], dim: usize) -> FluxGraph {
    let starts: Vec<(Point, f64)> = paths.iter().map(|p| (p.points[0].clone(), p.weight)).collect();
    let ends: Vec<(Point, f64)> = paths.iter().map(|p| (p.points.last().unwrap().clone(), p.weight)).collect();
    let from = DiscreteMeasure::from_pairs(dim, starts).expect("positive weights");
    let to = DiscreteMeasure::from_pairs(dim, ends).expect("positive weights");
    let mut sup: Vec<f64> = from.masses();
    let mut dem: Vec<f64> = to.masses();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, x) in from.atoms().iter().enumerate() {
        for (j, y) in to.atoms().iter().enumerate() {
            pairs.push((dist(&x.pos, &y.pos), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut segs = Vec::new();
    for (_, i, j) in pairs {
        let m = sup[i].min(dem[j]);
        if m <= 0.0 {
            continue;
        }
        sup[i] = if sup[i] <= m { 0.0 } else { sup[i] - m };
        dem[j] = if dem[j] <= m { 0.0 } else { dem[j] - m };
        segs.push((from.atoms()[i].pos.clone(), to.atoms()[j].pos.clone(), m));
    }
    FluxGraph::from_segments(dim, segs).expect("repair edges are valid")
}
