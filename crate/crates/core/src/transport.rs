//! Exact solver for the finite transportation problem
//! `min Σ c_ij x_ij` s.t. row sums = supply, column sums = demand, `x ≥ 0`.
//!
//! Successive shortest augmenting paths with node potentials on the dense
//! bipartite residual graph. Every augmentation zeroes at least one remaining
//! supply, remaining demand or backward residual, and the potentials keep all
//! reduced costs nonnegative, so the final plan is optimal.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub source: usize,
    pub sink: usize,
    pub mass: f64,
}

/// Coupling between the atoms of two measures, listed in `(source, sink)` order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub entries: Vec<PlanEntry>,
}

impl TransportPlan {
    pub fn row_sums(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for e in &self.entries {
            out[e.source] += e.mass;
        }
        out
    }

    pub fn column_sums(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for e in &self.entries {
            out[e.sink] += e.mass;
        }
        out
    }

    pub fn cost(&self, cost: impl Fn(usize, usize) -> f64) -> f64 {
        self.entries.iter().map(|e| e.mass * cost(e.source, e.sink)).sum()
    }
}

/// Solves the transport problem for a dense `supply.len() x demand.len()`
/// cost matrix given in row-major order. Costs must be finite and
/// nonnegative; the two mass totals are assumed to agree (callers check).
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> (f64, TransportPlan) {
    let n = supply.len();
    let m = demand.len();
    debug_assert_eq!(cost.len(), n * m);
    if n == 0 || m == 0 {
        return (0.0, TransportPlan::default());
    }
    let total: f64 = supply.iter().sum::<f64>().max(demand.iter().sum::<f64>());
    let thr = 1e-14 * total;

    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    let mut flow = vec![0.0; n * m];
    // Potentials: index 0 is the super source, then sources, then sinks.
    let nodes = 1 + n + m;
    let mut pi = vec![0.0_f64; nodes];
    let mut dist = vec![f64::INFINITY; nodes];
    let mut done = vec![false; nodes];
    let mut pred = vec![usize::MAX; nodes];

    let src = |i: usize| 1 + i;
    let snk = |j: usize| 1 + n + j;

    loop {
        if !sup.iter().any(|&s| s > thr) || !dem.iter().any(|&d| d > thr) {
            break;
        }
        dist.fill(f64::INFINITY);
        done.fill(false);
        pred.fill(usize::MAX);
        dist[0] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u == 0 {
                for i in 0..n {
                    if sup[i] > thr {
                        let v = src(i);
                        let nd = best + (pi[0] - pi[v]).max(0.0);
                        if nd < dist[v] {
                            dist[v] = nd;
                            pred[v] = 0;
                        }
                    }
                }
            } else if u <= n {
                let i = u - 1;
                for j in 0..m {
                    let v = snk(j);
                    if done[v] {
                        continue;
                    }
                    let rc = (cost[i * m + j] + pi[u] - pi[v]).max(0.0);
                    let nd = best + rc;
                    if nd < dist[v] {
                        dist[v] = nd;
                        pred[v] = u;
                    }
                }
            } else {
                let j = u - 1 - n;
                for i in 0..n {
                    if flow[i * m + j] <= 0.0 {
                        continue;
                    }
                    let v = src(i);
                    if done[v] {
                        continue;
                    }
                    let rc = (-cost[i * m + j] + pi[u] - pi[v]).max(0.0);
                    let nd = best + rc;
                    if nd < dist[v] {
                        dist[v] = nd;
                        pred[v] = u;
                    }
                }
            }
        }

        // Cheapest active sink in true (unreduced) distance.
        let mut target = usize::MAX;
        let mut best_true = f64::INFINITY;
        for j in 0..m {
            let v = snk(j);
            if dem[j] > thr && dist[v].is_finite() {
                let d = dist[v] - pi[0] + pi[v];
                if d < best_true {
                    best_true = d;
                    target = j;
                }
            }
        }
        if target == usize::MAX {
            break;
        }

        let cap = dist
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .fold(0.0_f64, f64::max);
        for v in 0..nodes {
            pi[v] += dist[v].min(cap);
        }

        // Walk the path back and find its bottleneck.
        let mut path = Vec::new();
        let mut v = snk(target);
        while v != 0 {
            path.push(v);
            v = pred[v];
        }
        path.reverse();
        let start = path[0] - 1;
        let mut bottleneck = sup[start].min(dem[target]);
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a > n {
                // sink -> source backward residual
                let (j, i) = (a - 1 - n, b - 1);
                bottleneck = bottleneck.min(flow[i * m + j]);
            }
        }
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a <= n {
                let (i, j) = (a - 1, b - 1 - n);
                flow[i * m + j] += bottleneck;
            } else {
                let (j, i) = (a - 1 - n, b - 1);
                let f = &mut flow[i * m + j];
                *f = if *f <= bottleneck { 0.0 } else { *f - bottleneck };
            }
        }
        sup[start] = if sup[start] <= bottleneck { 0.0 } else { sup[start] - bottleneck };
        dem[target] = if dem[target] <= bottleneck { 0.0 } else { dem[target] - bottleneck };
    }

    let mut entries = Vec::new();
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0.0 {
                value += f * cost[i * m + j];
                entries.push(PlanEntry { source: i, sink: j, mass: f });
            }
        }
    }
    (value, TransportPlan { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_assignment_is_uncrossed() {
        // Sources at 0 and 1 on a line, sinks at 1 and 0.
        let cost = [1.0, 0.0, 0.0, 1.0];
        let (v, plan) = solve(&[1.0, 1.0], &[1.0, 1.0], &cost);
        assert_eq!(v, 0.0);
        assert_eq!(plan.entries.len(), 2);
    }

    #[test]
    fn split_mass_needs_backward_residual() {
        // Greedy would send source 0 to sink 0; optimum reroutes.
        let cost = [1.0, 2.0, 1.0, 10.0];
        let (v, plan) = solve(&[1.0, 1.0], &[1.0, 1.0], &cost);
        assert!((v - 3.0).abs() < 1e-12, "{v}");
        assert_eq!(plan.row_sums(2), vec![1.0, 1.0]);
        assert_eq!(plan.column_sums(2), vec![1.0, 1.0]);
    }

    #[test]
    fn unbalanced_atom_counts() {
        let cost = [1.0, 2.0, 3.0];
        let (v, plan) = solve(&[3.0], &[1.0, 1.0, 1.0], &cost);
        assert_eq!(v, 6.0);
        assert_eq!(plan.column_sums(3), vec![1.0, 1.0, 1.0]);
    }
}
