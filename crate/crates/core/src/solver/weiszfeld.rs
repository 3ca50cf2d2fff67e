//! Free-point placement for a fixed tree.
//!
//! With the topology fixed, edge flows and hence per-length weights are
//! fixed, and the cost `Σ w_e |p_u - p_v|` is convex in the free points.
//! Each free point is moved in turn to the weighted Fermat point of its
//! neighbours (Gauss–Seidel Weiszfeld). Before the Weiszfeld step we test
//! whether some neighbour is itself optimal (the balance `|R| <= w` of the
//! remaining pulls), in which case the point snaps onto it exactly; when the
//! current point sits on a neighbour that is not optimal, the step follows
//! Vardi and Zhang with damping 0.5.

use crate::geometry::{dist, Point, PointKey};

use super::tree::{Terminals, Tree};

/// Optimal position of a single point pulled towards `targets` with the given
/// weights, starting the iteration from `start`.
pub(crate) fn fermat_point(targets: &[(&[f64], f64)], start: &[f64], tol: f64, max_iters: usize) -> Point {
    let mut p = start.to_vec();
    for _ in 0..max_iters {
        let next = step(&p, targets);
        let moved = dist(&next, &p);
        p = next;
        if moved <= tol {
            break;
        }
    }
    p
}

/// One block update for a point at `p` with weighted neighbours.
fn step(p: &[f64], nbrs: &[(&[f64], f64)]) -> Point {
    let dim = p.len();
    let active: Vec<(&[f64], f64)> = nbrs.iter().copied().filter(|&(_, w)| w > 0.0).collect();
    if active.is_empty() {
        return p.to_vec();
    }
    // Is some neighbour position optimal?
    for (j, &(q, _)) in active.iter().enumerate() {
        let key = PointKey::of(q);
        if active[..j].iter().any(|&(r, _)| PointKey::of(r) == key) {
            continue;
        }
        let mut here = 0.0;
        let mut pull = vec![0.0; dim];
        for &(r, w) in &active {
            let d = dist(r, q);
            if PointKey::of(r) == key || d == 0.0 {
                here += w;
                continue;
            }
            for k in 0..dim {
                pull[k] += w * (r[k] - q[k]) / d;
            }
        }
        if pull.iter().map(|x| x * x).sum::<f64>().sqrt() <= here {
            return q.to_vec();
        }
    }
    let mut num = vec![0.0; dim];
    let mut den = 0.0;
    let mut pull = vec![0.0; dim];
    let mut stuck = 0.0;
    for &(r, w) in &active {
        let d = dist(r, p);
        if d == 0.0 {
            stuck += w;
            continue;
        }
        den += w / d;
        for k in 0..dim {
            num[k] += w * r[k] / d;
            pull[k] += w * (r[k] - p[k]) / d;
        }
    }
    if den == 0.0 {
        return p.to_vec();
    }
    let target: Point = num.iter().map(|x| x / den).collect();
    if stuck == 0.0 {
        return target;
    }
    let r = pull.iter().map(|x| x * x).sum::<f64>().sqrt();
    let gamma = (stuck / r).min(1.0);
    (0..dim)
        .map(|k| {
            let moved = (1.0 - gamma) * target[k] + gamma * p[k];
            p[k] + 0.5 * (moved - p[k])
        })
        .collect()
}

/// Moves all free points of `tree` until no point moves more than `tol`.
/// Returns the number of sweeps used.
pub(crate) fn optimize(t: &Terminals, tree: &mut Tree, weights: &[f64], tol: f64, max_sweeps: usize) -> usize {
    let n_term = t.len();
    let n = tree.node_count(t);
    let adj = tree.adjacency(n);
    for sweep in 1..=max_sweeps {
        let mut worst = 0.0_f64;
        for s in n_term..n {
            let next = {
                let nbrs: Vec<(&[f64], f64)> =
                    adj[s].iter().map(|&(v, e)| (tree.position(t, v), weights[e])).collect();
                step(&tree.steiner[s - n_term], &nbrs)
            };
            let slot = &mut tree.steiner[s - n_term];
            worst = worst.max(dist(&next, slot));
            *slot = next;
        }
        if worst <= tol {
            return sweep;
        }
    }
    max_sweeps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilateral_fermat_point_is_the_centre() {
        let s3 = 3f64.sqrt();
        let pts: [&[f64]; 3] = [&[0.0, 0.0], &[2.0, 0.0], &[1.0, s3]];
        let targets: Vec<(&[f64], f64)> = pts.iter().map(|p| (*p, 1.0)).collect();
        let p = fermat_point(&targets, &[0.3, 0.2], 1e-14, 10_000);
        assert!((p[0] - 1.0).abs() < 1e-9 && (p[1] - s3 / 3.0).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn heavy_vertex_snaps_exactly() {
        let targets: Vec<(&[f64], f64)> = vec![(&[0.0, 0.0], 3.0), (&[1.0, 0.0], 1.0), (&[0.0, 1.0], 1.0)];
        let p = fermat_point(&targets, &[0.5, 0.5], 1e-14, 100);
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn escapes_a_non_optimal_vertex() {
        let targets: Vec<(&[f64], f64)> = vec![(&[0.0, 0.0], 1.0), (&[4.0, 0.0], 1.0), (&[2.0, 3.0], 1.0)];
        let p = fermat_point(&targets, &[0.0, 0.0], 1e-13, 10_000);
        assert!(p[1] > 0.5 && (p[0] - 2.0).abs() < 1e-9, "{p:?}");
    }
}
