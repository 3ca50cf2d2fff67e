use proptest::prelude::*;
use ramiflow::geometry::dist;
use ramiflow::measures::{grid_discretize, wasserstein1, DiscreteMeasure};

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 2)
}

fn measure(max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((point(), 0.1..2.0f64), 1..=max_atoms)
        .prop_map(|pairs| DiscreteMeasure::from_pairs(2, pairs).unwrap())
}

/// Rescales `mu` to total mass one.
fn normalised(mu: DiscreteMeasure) -> DiscreteMeasure {
    let total = mu.total_mass();
    DiscreteMeasure::from_pairs(2, mu.atoms().iter().map(|a| (a.pos.clone(), a.mass / total))).unwrap()
}

fn unit_points(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(point(), n)
}

/// Cheapest perfect matching by trying every permutation.
fn best_assignment(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    fn go(i: usize, xs: &[Vec<f64>], ys: &[Vec<f64>], used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if i == xs.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..ys.len() {
            if !used[j] {
                used[j] = true;
                go(i + 1, xs, ys, used, acc + dist(&xs[i], &ys[j]), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, xs, ys, &mut vec![false; ys.len()], 0.0, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_keeps_mass_and_moves_atoms_a_little(mu in measure(8), h in 0.01..1.5f64) {
        let g = grid_discretize(&mu, h).unwrap();
        prop_assert!((g.total_mass() - mu.total_mass()).abs() <= 1e-14 * mu.total_mass());
        let bound = h * 2f64.sqrt() * (1.0 + 1e-12);
        for a in mu.atoms() {
            let nearest = g.positions().map(|p| dist(p, &a.pos)).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= bound);
        }
    }

    #[test]
    fn w1_is_a_metric(x in measure(4), y in measure(4), z in measure(4)) {
        let (x, y, z) = (normalised(x), normalised(y), normalised(z));
        let (xy, _) = wasserstein1(&x, &y).unwrap();
        let (yx, _) = wasserstein1(&y, &x).unwrap();
        let (yz, _) = wasserstein1(&y, &z).unwrap();
        let (xz, _) = wasserstein1(&x, &z).unwrap();
        let (xx, _) = wasserstein1(&x, &x).unwrap();
        prop_assert!(xy >= 0.0);
        prop_assert!((xy - yx).abs() <= 1e-9);
        prop_assert!(xz <= xy + yz + 1e-9);
        prop_assert!(xx.abs() <= 1e-12);
        if x != y {
            prop_assert!(xy > 0.0);
        }
    }

    #[test]
    fn w1_plan_has_the_right_marginals(x in measure(5), y in measure(5)) {
        let (x, y) = (normalised(x), normalised(y));
        let (_, plan) = wasserstein1(&x, &y).unwrap();
        for (r, a) in plan.row_sums(x.len()).iter().zip(x.atoms()) {
            prop_assert!((r - a.mass).abs() <= 1e-12);
        }
        for (c, b) in plan.column_sums(y.len()).iter().zip(y.atoms()) {
            prop_assert!((c - b.mass).abs() <= 1e-12);
        }
    }

    #[test]
    fn w1_matches_brute_force_assignment((xs, ys) in (1..=4usize).prop_flat_map(|n| (unit_points(n), unit_points(n)))) {
        let plus = DiscreteMeasure::from_pairs(2, xs.iter().map(|p| (p.clone(), 1.0))).unwrap();
        let minus = DiscreteMeasure::from_pairs(2, ys.iter().map(|p| (p.clone(), 1.0))).unwrap();
        let (w, _) = wasserstein1(&plus, &minus).unwrap();
        prop_assert!((w - best_assignment(&xs, &ys)).abs() <= 1e-9);
    }
}
