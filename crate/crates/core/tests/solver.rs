use proptest::prelude::*;
use ramiflow::flux_graph::{check_mass_flux, graph_cost, CostSpec};
use ramiflow::graph_reduce::find_cycle;
use ramiflow::instances::{self, Zigzag};
use ramiflow::io::{read_graph, write_graph};
use ramiflow::solver::{brute_force_tiny, solve_discrete_report, w1_graph, SolveConfig};
use ramiflow::Execution;

fn specs() -> impl Strategy<Value = CostSpec> {
    prop_oneof![
        (0.2..=1.0f64).prop_map(|alpha| CostSpec::branched(alpha).unwrap()),
        (0.1..1.5f64, 1.2..4.0f64).prop_map(|(eps, a)| CostSpec::urban(eps, a).unwrap()),
    ]
}

fn config(seed: u64) -> SolveConfig {
    SolveConfig { seed, restarts: 3, ..SolveConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn output_is_an_acyclic_flux_no_worse_than_matching(seed in any::<u64>(), spec in specs()) {
        let (plus, minus) = instances::random_instance(seed, 3, 4.0);
        let out = solve_discrete_report(&plus, &minus, spec, &config(seed)).unwrap();
        prop_assert!(check_mass_flux(&out.graph, &plus, &minus, 1e-9));
        prop_assert!(find_cycle(&out.graph).is_none());
        prop_assert_eq!(out.cost, graph_cost(&out.graph, spec));
        let matching = graph_cost(&w1_graph(&plus, &minus).unwrap(), spec);
        prop_assert!(out.cost <= matching + 1e-12);
        for w in out.trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn runs_are_reproducible_across_executors(seed in any::<u64>(), spec in specs()) {
        let (plus, minus) = instances::random_instance(seed, 3, 4.0);
        let seq = SolveConfig { execution: Execution::Sequential, ..config(seed) };
        let par = SolveConfig { execution: Execution::Parallel, ..config(seed) };
        let a = solve_discrete_report(&plus, &minus, spec, &seq).unwrap();
        let b = solve_discrete_report(&plus, &minus, spec, &par).unwrap();
        prop_assert_eq!(write_graph(&a.graph), write_graph(&b.graph));
        prop_assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn matches_the_oracle_on_two_by_two(seed in any::<u64>(), spec in specs()) {
        let (plus, minus) = instances::random_instance(seed, 2, 4.0);
        let out = solve_discrete_report(&plus, &minus, spec, &config(seed)).unwrap();
        let oracle = graph_cost(&brute_force_tiny(&plus, &minus, spec, 2).unwrap(), spec);
        prop_assert!(out.cost <= oracle * (1.0 + 1e-4) + 1e-12, "{} vs {}", out.cost, oracle);
    }
}

#[test]
fn zigzag_oracle_matches_golden_file() {
    let f = Zigzag::standard();
    let (plus, minus) = f.measures();
    let oracle = brute_force_tiny(&plus, &minus, f.spec(), 4).unwrap();
    let golden = read_graph(include_str!("golden/zigzag_oracle.json")).unwrap();
    assert_eq!(oracle, golden);
    // The optimum is the direct pair of routes, at 3 (m1 + m2 + eps) + (m1 + eps).
    assert_eq!(golden, f.direct_graph());
    assert!((graph_cost(&golden, f.spec()) - 6.3).abs() <= 1e-12);
    assert!(graph_cost(&golden, f.spec()) < f.family_cost());
}
