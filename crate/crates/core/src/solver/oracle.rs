//! Exhaustive reference solver for tiny instances.
//!
//! Enumerates every labelled tree on the terminals plus `k <= max_steiner`
//! free points in which each free point has degree at least three (Prüfer
//! sequences where each free label appears at least twice), removes
//! duplicates under relabelling of the free points, and places the free
//! points of each tree by damped Newton steps on a smoothed cost
//! `Σ w sqrt(|p - q|^2 + eta^2)`, driving `eta` towards zero.
//!
//! Nothing here is shared with the local search except the flow and
//! embedding helpers, so the two solvers check each other.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flux_graph::{graph_cost, CostSpec, FluxGraph};
use crate::geometry::Point;
use crate::measures::DiscreteMeasure;
use nalgebra::{DMatrix, DVector};

use super::tree::{edge_weights, prufer_decode, tree_cost, tree_to_graph, Terminals, Tree};

/// Largest number of atoms per side the oracle accepts.
pub const ORACLE_MAX_ATOMS: usize = 4;
const MAX_SEQUENCES: f64 = 2e6;
const MAX_FREE_POINTS: usize = 6;

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub graph: FluxGraph,
    pub cost: f64,
    /// Number of distinct tree topologies evaluated.
    pub topologies: usize,
}

pub fn brute_force_tiny(
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    spec: CostSpec,
    max_steiner: usize,
) -> Result<FluxGraph> {
    brute_force_tiny_with(plus, minus, spec, max_steiner, Execution::default()).map(|o| o.graph)
}

pub fn brute_force_tiny_with(
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    spec: CostSpec,
    max_steiner: usize,
    exec: Execution,
) -> Result<OracleOutcome> {
    if plus.len() > ORACLE_MAX_ATOMS || minus.len() > ORACLE_MAX_ATOMS {
        return Err(Error::TooLarge(format!(
            "oracle accepts at most {ORACLE_MAX_ATOMS} atoms per side, got {} and {}",
            plus.len(),
            minus.len()
        )));
    }
    if max_steiner > MAX_FREE_POINTS {
        return Err(Error::TooLarge(format!("oracle accepts at most {MAX_FREE_POINTS} free points")));
    }
    let t = Terminals::new(plus, minus)?;
    let nt = t.len();
    if nt < 2 {
        return Ok(OracleOutcome { graph: FluxGraph::empty(plus.dim()), cost: 0.0, topologies: 0 });
    }
    let kmax = max_steiner.min(nt - 2);
    let estimate: f64 = (0..=kmax).map(|k| sequence_count(nt, k)).sum();
    if estimate > MAX_SEQUENCES {
        return Err(Error::TooLarge(format!("about {estimate:.0} tree sequences to enumerate")));
    }

    let mut topologies: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    for k in 0..=kmax {
        let mut seen: HashSet<Vec<(usize, usize)>> = HashSet::new();
        let n = nt + k;
        let mut seq = Vec::with_capacity(n - 2);
        let mut counts = vec![0usize; k];
        enumerate(nt, k, n - 2, &mut seq, &mut counts, &mut |s| {
            let edges = prufer_decode(s, n).expect("valid sequence");
            if seen.insert(canonical(&edges, nt, k)) {
                topologies.push((k, edges));
            }
        });
    }

    let centroid: Point = (0..t.dim)
        .map(|d| t.pos.iter().map(|p| p[d]).sum::<f64>() / nt as f64)
        .collect();
    let results = exec.map(topologies.len(), |i| {
        let (k, edges) = &topologies[i];
        let mut tree = Tree { edges: edges.clone(), steiner: vec![centroid.clone(); *k] };
        let weights = edge_weights(&t, &tree, spec);
        place(&t, &mut tree, &weights);
        let cost = tree_cost(&t, &tree, &weights);
        (tree, cost)
    });
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.1 < results[best].1 {
            best = i;
        }
    }
    let graph = tree_to_graph(&t, &results[best].0)?;
    let cost = graph_cost(&graph, spec);
    Ok(OracleOutcome { graph, cost, topologies: topologies.len() })
}


/// Visits every sequence of length `len` over `nt + k` labels in which each
/// of the last `k` labels occurs at least twice.
fn enumerate(
    nt: usize,
    k: usize,
    len: usize,
    seq: &mut Vec<usize>,
    counts: &mut [usize],
    visit: &mut dyn FnMut(&[usize]),
) {
    let missing: usize = counts.iter().map(|&c| 2usize.saturating_sub(c)).sum();
    if len - seq.len() < missing {
        return;
    }
    if seq.len() == len {
        visit(seq);
        return;
    }
    for label in 0..nt + k {
        seq.push(label);
        if label >= nt {
            counts[label - nt] += 1;
        }
        enumerate(nt, k, len, seq, counts, visit);
        if label >= nt {
            counts[label - nt] -= 1;
        }
        seq.pop();
    }
}

/// Smallest sorted edge list over all relabellings of the free points.
fn canonical(edges: &[(usize, usize)], nt: usize, k: usize) -> Vec<(usize, usize)> {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best: Option<Vec<(usize, usize)>> = None;
    loop {
        let relabel = |v: usize| if v < nt { v } else { nt + perm[v - nt] };
        let mut e: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (relabel(u), relabel(v));
                (a.min(b), a.max(b))
            })
            .collect();
        e.sort_unstable();
        if best.as_ref().is_none_or(|b| e < *b) {
            best = Some(e);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best.unwrap_or_default()
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Number of sequences of length `nt + k - 2` over `nt + k` labels with each
/// free label used at least twice: `L! [x^L] e^{nt x} (e^x - 1 - x)^k`.
fn sequence_count(nt: usize, k: usize) -> f64 {
    let len = nt + k - 2;
    let mut fact = vec![1.0; len + 1];
    for i in 1..=len {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut poly: Vec<f64> = (0..=len).map(|i| (nt as f64).powi(i as i32) / fact[i]).collect();
    let free: Vec<f64> = (0..=len).map(|i| if i >= 2 { 1.0 / fact[i] } else { 0.0 }).collect();
    for _ in 0..k {
        let mut next = vec![0.0; len + 1];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in free.iter().enumerate().take(len + 1 - i) {
                next[i + j] += a * b;
            }
        }
        poly = next;
    }
    poly[len] * fact[len]
}

/// Damped Newton on the smoothed cost in all free coordinates at once, with
/// a decreasing smoothing radius. The smoothed cost is strictly convex, so
/// every stage has a unique minimiser, and the last radius bounds the
/// smoothing error by `Σ w eta`.
fn place(t: &Terminals, tree: &mut Tree, weights: &[f64]) {
    let k = tree.steiner.len();
    if k == 0 {
        return;
    }
    let dim = t.dim;
    let n = k * dim;
    let mut eta = 1e-1 * t.scale;
    while eta >= 1e-11 * t.scale {
        for _ in 0..100 {
            let (f0, grad, hess) = smoothed(t, tree, weights, eta, true);
            let Some(chol) = DMatrix::from_row_slice(n, n, &hess).cholesky() else { break };
            let step = chol.solve(&DVector::from_row_slice(&grad));
            let decrement: f64 = grad.iter().zip(step.iter()).map(|(g, s)| g * s).sum();
            if decrement <= 1e-28 * t.scale * t.total {
                break;
            }
            let start = tree.steiner.clone();
            let mut lambda = 1.0;
            loop {
                for (s, p) in tree.steiner.iter_mut().enumerate() {
                    for d in 0..dim {
                        p[d] = start[s][d] - lambda * step[s * dim + d];
                    }
                }
                let (f1, _, _) = smoothed(t, tree, weights, eta, false);
                if f1 <= f0 - 0.25 * lambda * decrement || lambda < 1e-12 {
                    break;
                }
                lambda *= 0.5;
            }
        }
        eta /= 100.0;
    }
}

/// Smoothed cost and, on request, its gradient and row-major Hessian in the
/// free coordinates.
fn smoothed(t: &Terminals, tree: &Tree, weights: &[f64], eta: f64, derivatives: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let nt = t.len();
    let dim = t.dim;
    let n = if derivatives { tree.steiner.len() * dim } else { 0 };
    let mut f = 0.0;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let free = |x: usize| (x >= nt).then(|| (x - nt) * dim);
    for (&(u, v), &w) in tree.edges.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let (pu, pv) = (tree.position(t, u), tree.position(t, v));
        let d: Vec<f64> = (0..dim).map(|i| pu[i] - pv[i]).collect();
        let r = (d.iter().map(|x| x * x).sum::<f64>() + eta * eta).sqrt();
        f += w * r;
        if !derivatives {
            continue;
        }
        let (fu, fv) = (free(u), free(v));
        for i in 0..dim {
            let g = w * d[i] / r;
            if let Some(a) = fu {
                grad[a + i] += g;
            }
            if let Some(b) = fv {
                grad[b + i] -= g;
            }
            for j in 0..dim {
                let h = w * (f64::from(u8::from(i == j)) / r - d[i] * d[j] / (r * r * r));
                if let Some(a) = fu {
                    hess[(a + i) * n + a + j] += h;
                }
                if let Some(b) = fv {
                    hess[(b + i) * n + b + j] += h;
                }
                if let (Some(a), Some(b)) = (fu, fv) {
                    hess[(a + i) * n + b + j] -= h;
                    hess[(b + i) * n + a + j] -= h;
                }
            }
        }
    }
    (f, grad, hess)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pairs: &[(&[f64], f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_pairs(2, pairs.iter().map(|(p, w)| (p.to_vec(), *w))).unwrap()
    }

    #[test]
    fn sequence_count_matches_enumeration() {
        for (nt, k) in [(3, 0), (4, 1), (4, 2), (5, 2), (5, 3)] {
            let mut n = 0usize;
            let mut seq = Vec::new();
            let mut counts = vec![0; k];
            enumerate(nt, k, nt + k - 2, &mut seq, &mut counts, &mut |_| n += 1);
            assert_eq!(n as f64, sequence_count(nt, k).round(), "nt={nt} k={k}");
        }
    }

    #[test]
    fn single_pair_is_one_edge() {
        let g = brute_force_tiny(&m(&[(&[0.0, 0.0], 1.0)]), &m(&[(&[1.0, 1.0], 1.0)]), CostSpec::branched(0.5).unwrap(), 2)
            .unwrap();
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn collinear_sources_merge_or_not() {
        // Sources at 0 and 1 on a line, sink at 2: the merged route is never
        // worse, strictly better when c is strictly subadditive.
        let plus = m(&[(&[0.0, 0.0], 1.0), (&[1.0, 0.0], 1.0)]);
        let minus = m(&[(&[2.0, 0.0], 2.0)]);
        let bt = brute_force_tiny_with(&plus, &minus, CostSpec::branched(0.5).unwrap(), 1, Execution::Sequential).unwrap();
        assert!((bt.cost - (1.0 + 2f64.sqrt())).abs() < 1e-12, "{}", bt.cost);
        let up = brute_force_tiny_with(&plus, &minus, CostSpec::urban(0.5, 2.0).unwrap(), 1, Execution::Sequential).unwrap();
        assert!((up.cost - (1.5 + 2.5)).abs() < 1e-12, "{}", up.cost);
    }

    #[test]
    fn symmetric_y_matches_the_fermat_branch_point() {
        let plus = m(&[(&[0.0, 1.0], 1.0), (&[0.0, -1.0], 1.0)]);
        let minus = m(&[(&[4.0, 0.0], 2.0)]);
        let out = brute_force_tiny_with(&plus, &minus, CostSpec::branched(0.5).unwrap(), 1, Execution::Sequential).unwrap();
        // Branch at (x, 0) costs 2 sqrt(x^2 + 1) + sqrt2 (4 - x), minimal at
        // 2x / sqrt(x^2 + 1) = sqrt2, i.e. x = 1.
        let expect = 5.0 * 2f64.sqrt();
        assert!((out.cost - expect).abs() < 1e-8, "{} vs {}", out.cost, expect);
    }

    #[test]
    fn too_many_atoms_is_rejected() {
        let pts: Vec<(Vec<f64>, f64)> = (0..5).map(|i| (vec![i as f64, 0.0], 1.0)).collect();
        let plus = DiscreteMeasure::from_pairs(2, pts).unwrap();
        let minus = m(&[(&[0.0, 9.0], 5.0)]);
        let r = brute_force_tiny(&plus, &minus, CostSpec::branched(0.5).unwrap(), 1);
        assert!(matches!(r, Err(Error::TooLarge(_))));
    }
}
