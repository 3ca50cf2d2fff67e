//! Spanning trees over terminals and free (Steiner) points.
//!
//! Both the local search and the brute-force oracle work with trees: nodes
//! `0..T` are the terminals, nodes `T..` are free points. Because the tree
//! is spanning and the terminal supplies balance, the flow on every edge is
//! fixed by the net supply of the subtree behind it. Zero-flow edges cost
//! nothing, so forests are covered too.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::flux_graph::{edge_cost, sum_segments, CostSpec, FluxGraph};
use crate::geometry::{self, dist, Point, PointKey};
use crate::graph_reduce::reduce_all_cycles;
use crate::measures::{check_balanced, DiscreteMeasure};

/// Net terminal supplies: atoms present in both measures cancel.
#[derive(Debug, Clone)]
pub(crate) struct Terminals {
    pub dim: usize,
    pub pos: Vec<Point>,
    /// Positive for sources, negative for sinks.
    pub supply: Vec<f64>,
    pub total: f64,
    /// Geometric scale used to make tolerances relative.
    pub scale: f64,
}

impl Terminals {
    pub fn new(plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> Result<Self> {
        check_balanced(plus, minus)?;
        let total = plus.total_mass().max(minus.total_mass());
        let mut pos: Vec<Point> = Vec::new();
        let mut supply: Vec<f64> = Vec::new();
        let mut index: HashMap<PointKey, usize> = HashMap::new();
        let signed = plus.atoms().iter().map(|a| (a, 1.0)).chain(minus.atoms().iter().map(|a| (a, -1.0)));
        for (atom, sign) in signed {
            let k = *index.entry(PointKey::of(&atom.pos)).or_insert_with(|| {
                pos.push(atom.pos.clone());
                supply.push(0.0);
                pos.len() - 1
            });
            supply[k] += sign * atom.mass;
        }
        let keep: Vec<usize> = (0..pos.len()).filter(|&i| supply[i].abs() > 1e-12 * total).collect();
        let pos: Vec<Point> = keep.iter().map(|&i| pos[i].clone()).collect();
        let supply: Vec<f64> = keep.iter().map(|&i| supply[i]).collect();
        let refs: Vec<&[f64]> = pos.iter().map(|p| p.as_slice()).collect();
        let diam = geometry::diameter(&refs);
        let scale = if diam > 0.0 { diam } else { 1.0 };
        Ok(Terminals { dim: plus.dim(), pos, supply, total, scale })
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn sources(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.supply[i] > 0.0).collect()
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.supply[i] < 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tree {
    pub edges: Vec<(usize, usize)>,
    /// Positions of the free points; node `T + k` sits at `steiner[k]`.
    pub steiner: Vec<Point>,
}

impl Tree {
    pub fn node_count(&self, t: &Terminals) -> usize {
        t.len() + self.steiner.len()
    }

    pub fn position<'a>(&'a self, t: &'a Terminals, v: usize) -> &'a [f64] {
        if v < t.len() {
            &t.pos[v]
        } else {
            &self.steiner[v - t.len()]
        }
    }

    pub fn adjacency(&self, n: usize) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); n];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            adj[u].push((v, e));
            adj[v].push((u, e));
        }
        adj
    }

    /// Deletes free point `s` (which must have no incident edges left) and
    /// shifts the labels above it.
    pub fn drop_steiner(&mut self, t: &Terminals, s: usize) {
        debug_assert!(s >= t.len());
        self.steiner.remove(s - t.len());
        for e in &mut self.edges {
            if e.0 > s {
                e.0 -= 1;
            }
            if e.1 > s {
                e.1 -= 1;
            }
        }
    }

    /// Merges node `from` (a free point) into node `into` along their edge.
    pub fn contract(&mut self, t: &Terminals, from: usize, into: usize) {
        self.edges.retain(|&(a, b)| !((a == from && b == into) || (a == into && b == from)));
        for e in &mut self.edges {
            if e.0 == from {
                e.0 = into;
            }
            if e.1 == from {
                e.1 = into;
            }
        }
        self.drop_steiner(t, from);
    }
}

/// Signed edge flows, positive when mass moves from `edges[e].0` to
/// `edges[e].1`. Values at rounding level are flushed to zero.
pub(crate) fn edge_flows(t: &Terminals, tree: &Tree) -> Vec<f64> {
    let n = tree.node_count(t);
    let adj = tree.adjacency(n);
    let mut order = Vec::with_capacity(n);
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        order.push(root);
        let mut head = order.len() - 1;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(v, e) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((u, e));
                    order.push(v);
                }
            }
        }
    }
    let mut sub: Vec<f64> = (0..n).map(|v| if v < t.len() { t.supply[v] } else { 0.0 }).collect();
    let mut flow = vec![0.0; tree.edges.len()];
    let thr = 1e-12 * t.total;
    for &v in order.iter().rev() {
        if let Some((u, e)) = parent[v] {
            // The subtree at v pushes its surplus towards u.
            let out = sub[v];
            sub[u] += out;
            let f = if tree.edges[e].0 == v { out } else { -out };
            flow[e] = if f.abs() <= thr { 0.0 } else { f };
        }
    }
    flow
}

/// Per-unit-length edge costs `c(|flow|)`.
pub(crate) fn edge_weights(t: &Terminals, tree: &Tree, spec: CostSpec) -> Vec<f64> {
    edge_flows(t, tree).into_iter().map(|f| edge_cost(f.abs(), spec)).collect()
}

pub(crate) fn tree_cost(t: &Terminals, tree: &Tree, weights: &[f64]) -> f64 {
    tree.edges
        .iter()
        .zip(weights)
        .map(|(&(u, v), w)| if *w == 0.0 { 0.0 } else { w * dist(tree.position(t, u), tree.position(t, v)) })
        .sum()
}

/// Embeds the tree as a flux graph. Collinear overlaps are merged and any
/// directed cycle this creates is reduced.
pub(crate) fn tree_to_graph(t: &Terminals, tree: &Tree) -> Result<FluxGraph> {
    let flows = edge_flows(t, tree);
    let mut segs = Vec::new();
    for (&(u, v), &f) in tree.edges.iter().zip(&flows) {
        if f == 0.0 {
            continue;
        }
        let (p, q) = (tree.position(t, u).to_vec(), tree.position(t, v).to_vec());
        if PointKey::of(&p) == PointKey::of(&q) {
            continue;
        }
        if f > 0.0 {
            segs.push((p, q, f));
        } else {
            segs.push((q, p, -f));
        }
    }
    let g = sum_segments(t.dim, segs)?;
    straighten(reduce_all_cycles(&g))
}

/// Replaces every vertex that only passes mass through (one edge in, one
/// edge out, no supply) by a straight edge; by the triangle inequality this
/// never raises the cost. Such vertices are left behind by free points whose
/// other edges carry no flow.
fn straighten(mut g: FluxGraph) -> Result<FluxGraph> {
    loop {
        let n = g.vertices().len();
        let (mut ins, mut outs) = (vec![Vec::new(); n], vec![Vec::new(); n]);
        for (i, e) in g.edges().iter().enumerate() {
            outs[e.tail].push(i);
            ins[e.head].push(i);
        }
        let edges = g.edges();
        let through = (0..n).find(|&v| {
            ins[v].len() == 1 && outs[v].len() == 1 && {
                let (a, b) = (edges[ins[v][0]].weight, edges[outs[v][0]].weight);
                (a - b).abs() <= 1e-12 * a.max(b)
            }
        });
        let Some(v) = through else { return Ok(g) };
        let (e_in, e_out) = (ins[v][0], outs[v][0]);
        let w = 0.5 * (edges[e_in].weight + edges[e_out].weight);
        let mut segs: Vec<(Point, Point, f64)> = g
            .edges()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != e_in && i != e_out)
            .map(|(_, e)| (g.vertices()[e.tail].clone(), g.vertices()[e.head].clone(), e.weight))
            .collect();
        segs.push((g.vertices()[edges[e_in].tail].clone(), g.vertices()[edges[e_out].head].clone(), w));
        g = reduce_all_cycles(&sum_segments(g.dim(), segs)?);
    }
}

/// Decodes a Prüfer sequence into the edge list of a labelled tree on `n` nodes.
pub(crate) fn prufer_decode(seq: &[usize], n: usize) -> Result<Vec<(usize, usize)>> {
    if n < 2 || seq.len() + 2 != n || seq.iter().any(|&s| s >= n) {
        return Err(Error::InvalidParameter(format!("not a Prüfer sequence for {n} nodes")));
    }
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf always exists");
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terminals(pairs_plus: &[(&[f64], f64)], pairs_minus: &[(&[f64], f64)]) -> Terminals {
        let p = DiscreteMeasure::from_pairs(2, pairs_plus.iter().map(|(x, m)| (x.to_vec(), *m))).unwrap();
        let m = DiscreteMeasure::from_pairs(2, pairs_minus.iter().map(|(x, m)| (x.to_vec(), *m))).unwrap();
        Terminals::new(&p, &m).unwrap()
    }

    #[test]
    fn coincident_atoms_cancel() {
        let t = terminals(&[(&[0.0, 0.0], 1.0), (&[1.0, 0.0], 1.0)], &[(&[1.0, 0.0], 1.0), (&[2.0, 0.0], 1.0)]);
        assert_eq!(t.len(), 2);
        assert_eq!(t.supply, vec![1.0, -1.0]);
    }

    #[test]
    fn flows_follow_subtree_supply() {
        let t = terminals(&[(&[0.0, 0.0], 1.0), (&[0.0, 2.0], 1.0)], &[(&[3.0, 1.0], 2.0)]);
        let tree = Tree { edges: vec![(0, 3), (1, 3), (3, 2)], steiner: vec![vec![1.0, 1.0]] };
        assert_eq!(edge_flows(&t, &tree), vec![1.0, 1.0, 2.0]);
        let reversed = Tree { edges: vec![(3, 0), (1, 3), (2, 3)], steiner: vec![vec![1.0, 1.0]] };
        assert_eq!(edge_flows(&t, &reversed), vec![-1.0, 1.0, -2.0]);
        let g = tree_to_graph(&t, &tree).unwrap();
        assert_eq!(g.edges().len(), 3);
    }

    #[test]
    fn prufer_round_trip_counts() {
        let mut trees = std::collections::HashSet::new();
        for a in 0..4 {
            for b in 0..4 {
                let mut e = prufer_decode(&[a, b], 4).unwrap();
                for x in &mut e {
                    *x = (x.0.min(x.1), x.0.max(x.1));
                }
                e.sort();
                trees.insert(e);
            }
        }
        // Cayley: n^(n-2) labelled trees.
        assert_eq!(trees.len(), 16);
    }
}
