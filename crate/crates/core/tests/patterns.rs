use proptest::prelude::*;
use ramiflow::equivalence::{flux_to_pattern, pattern_to_flux, sigma_tolerance, single_path_reroute};
use ramiflow::flux_graph::{graph_cost, sum_segments, CostSpec};
use ramiflow::geometry::lerp;
use ramiflow::graph_reduce::reduce_all_cycles;
use ramiflow::instances;
use ramiflow::network::{cost_sigma, extract_sigma};
use ramiflow::pattern::{
    check_single_path, irrigating_measures, pattern_cost, reparameterise_constant_speed, solidarity_mass,
};

fn specs() -> impl Strategy<Value = CostSpec> {
    prop_oneof![
        (0.05..=1.0f64).prop_map(|alpha| CostSpec::branched(alpha).unwrap()),
        (0.05..2.0f64, 1.1..5.0f64).prop_map(|(eps, a)| CostSpec::urban(eps, a).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn urban_cost_dominates_mass_length(seed in any::<u64>(), eps in 0.05..2.0f64, a in 1.1..5.0f64) {
        let chi = instances::random_pattern(seed);
        let mass_length: f64 = chi.fibres().iter().map(|f| f.mass * f.length()).sum();
        prop_assert!(pattern_cost(&chi, CostSpec::urban(eps, a).unwrap()).unwrap() >= mass_length - 1e-12);
    }

    #[test]
    fn pattern_and_flux_costs_agree_without_opposite_overlaps(seed in any::<u64>(), spec in specs()) {
        let chi = instances::random_pattern(seed);
        prop_assume!(chi.opposite_overlaps().is_empty());
        let g = pattern_to_flux(&chi);
        let (pc, gc) = (pattern_cost(&chi, spec).unwrap(), graph_cost(&g, spec));
        prop_assert!((pc - gc).abs() <= 1e-9, "{pc} vs {gc}");
    }

    #[test]
    fn solidarity_jumps_up_at_junctions(seed in any::<u64>()) {
        let chi = instances::random_pattern(seed);
        for f in chi.fibres() {
            for w in f.polyline.windows(3) {
                let at = solidarity_mass(&chi, &w[1]);
                let before = solidarity_mass(&chi, &lerp(&w[0], &w[1], 0.5));
                let after = solidarity_mass(&chi, &lerp(&w[1], &w[2], 0.5));
                prop_assert!(at >= before.max(after) - 1e-12);
            }
        }
    }

    #[test]
    fn constant_speed_is_idempotent_and_free(seed in any::<u64>(), spec in specs()) {
        let chi = instances::random_pattern(seed);
        let once = reparameterise_constant_speed(&chi);
        let twice = reparameterise_constant_speed(&once);
        for (f, g) in once.fibres().iter().zip(twice.fibres()) {
            prop_assert_eq!(&f.polyline, &g.polyline);
            for (s, t) in f.times.iter().zip(&g.times) {
                prop_assert!((s - t).abs() <= 1e-12);
            }
        }
        let before = pattern_cost(&chi, spec).unwrap();
        prop_assert!((before - pattern_cost(&once, spec).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn round_trip_keeps_the_reduced_cost(seed in any::<u64>(), spec in specs()) {
        // Cycle reduction is not unique; compare with the reduction of the
        // same normalised graph the conversion starts from.
        let g = instances::random_graph(seed, 8, false);
        let reduced = reduce_all_cycles(&sum_segments(2, g.segments().collect()).unwrap());
        let back = pattern_to_flux(&flux_to_pattern(&g));
        prop_assert!((graph_cost(&back, spec) - graph_cost(&reduced, spec)).abs() <= 1e-9);
    }

    #[test]
    fn acyclic_flux_and_its_pattern_cost_the_same(seed in any::<u64>(), spec in specs()) {
        let g = instances::random_graph(seed, 8, true);
        let (gc, pc) = (graph_cost(&g, spec), pattern_cost(&flux_to_pattern(&g), spec).unwrap());
        prop_assert!((gc - pc).abs() <= 1e-12 * (1.0 + gc), "{gc} vs {pc}");
    }

    #[test]
    fn extracted_network_is_no_worse_than_the_pattern(seed in any::<u64>(), eps in 0.05..1.0f64, a in 1.2..4.0f64) {
        let chi = instances::random_pattern(seed);
        let (plus, minus) = irrigating_measures(&chi);
        let delta = 0.05;
        let sigma = extract_sigma(&chi, eps, a);
        let lhs = cost_sigma(&sigma, &plus, &minus, eps, a, delta).unwrap();
        let rhs = pattern_cost(&chi, CostSpec::urban(eps, a).unwrap()).unwrap();
        prop_assert!(lhs <= rhs + sigma_tolerance(&plus, &minus, a, delta), "{lhs} > {rhs}");
    }

    #[test]
    fn reroute_gives_single_paths_with_the_same_ends(seed in any::<u64>()) {
        // Rerouting is only cost-neutral at optima; on arbitrary fluxes it
        // must still produce single paths between the same measures.
        let g = reduce_all_cycles(&instances::random_graph(seed, 6, true));
        let chi = single_path_reroute(&g);
        prop_assert!(check_single_path(&chi).unwrap());
        let (p0, m0) = irrigating_measures(&flux_to_pattern(&g));
        let (p1, m1) = irrigating_measures(&chi);
        for (x, y) in [(&p0, &p1), (&m0, &m1)] {
            prop_assert_eq!(x.len(), y.len());
            for a in x.atoms() {
                prop_assert!((y.mass_at(&a.pos) - a.mass).abs() <= 1e-9);
            }
        }
    }
}
