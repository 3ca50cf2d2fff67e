//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`) so the lines always
//! show up in the test log.

use std::time::{Duration, Instant};

use ramiflow::equivalence::{sigma_tolerance, verify_equivalence, verify_flux};
use ramiflow::flux_graph::{divergence, graph_cost, graph_difference, total_variation, CostSpec};
use ramiflow::graph_reduce::{path_decompose, prune_long_paths_report, reduce_all_cycles, support_diameter};
use ramiflow::instances::{self, Zigzag};
use ramiflow::measures::{wasserstein1, DiscreteMeasure};
use ramiflow::network::{wasserstein_dsigma, NetworkSet};
use ramiflow::pattern::{check_single_path, pattern_cost, reparameterise_constant_speed};
use ramiflow::solver::{brute_force_tiny_with, solve_discrete_report, SolveConfig};
use ramiflow::Execution;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn urban() -> CostSpec {
    CostSpec::urban(0.5, 2.0).unwrap()
}

fn suite_config() -> SolveConfig {
    SolveConfig { seed: 7, ..SolveConfig::default() }
}

const SUITE: u64 = 20;

fn zigzag_family() -> Outcome {
    let f = Zigzag::standard();
    let costs: Vec<f64> = [0.0, 0.025, 0.05, 0.1].iter().map(|&m| graph_cost(&f.family_graph(m), f.spec())).collect();
    let spread = costs.iter().fold(0.0_f64, |acc, c| acc.max((c - costs[0]).abs()));
    let closed = f.family_cost();
    let off = costs.iter().fold(0.0_f64, |acc, c| acc.max((c - closed).abs()));
    outcome(
        spread <= 1e-9 && off <= 1e-9 && (closed - 6.6).abs() <= 1e-9,
        format!("costs {costs:?}, closed form {closed}"),
    )
}

fn cycle_lemma() -> Outcome {
    let spec = urban();
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..100 {
        let g = instances::random_graph(seed, 8, false);
        let reduced = reduce_all_cycles(&g);
        let moved = total_variation(&graph_difference(&reduced, &g).unwrap());
        let slack = graph_cost(&reduced, spec) - (graph_cost(&g, spec) - moved);
        worst = worst.max(slack);
    }
    outcome(worst <= 1e-9, format!("max F(G~) - F(G) + |J~ - J| = {worst:.3e} over 100 graphs"))
}

/// Same support, masses equal up to summation order.
fn same_measure(x: &DiscreteMeasure, y: &DiscreteMeasure) -> bool {
    let tol = 1e-12 * (1.0 + x.total_mass().max(y.total_mass()));
    x.len() == y.len() && x.positions().all(|p| (x.mass_at(p) - y.mass_at(p)).abs() <= tol && y.mass_at(p) > 0.0)
}

fn path_decomposition() -> Outcome {
    let mut worst = 0.0_f64;
    let mut marginals_exact = true;
    for seed in 0..100 {
        let g = instances::random_graph(seed, 8, true);
        let paths = path_decompose(&g).unwrap();
        let loads = paths.edge_loads(&g);
        for (e, l) in g.edges().iter().zip(&loads) {
            worst = worst.max((e.weight - l).abs());
        }
        let ((p0, m0), (p1, m1)) = (paths.marginals(), divergence(&g));
        marginals_exact &= same_measure(&p0, &p1) && same_measure(&m0, &m1);
    }
    outcome(
        worst <= 1e-12 && marginals_exact,
        format!("max edge error {worst:.3e}, marginals match divergence: {marginals_exact}"),
    )
}

fn fibre_length_bound() -> Outcome {
    let a = 2.0;
    let spec = CostSpec::urban(0.5, a).unwrap();
    let mut ok = true;
    let mut worst_len_ratio = 0.0_f64;
    let mut pruned = 0;
    for seed in 0..20 {
        let (g, plus, minus) = instances::long_path_instance(seed, a);
        let r = prune_long_paths_report(&g, &plus, &minus, a).unwrap();
        let diam = support_diameter(&plus, &minus);
        let drop = graph_cost(&g, spec) - graph_cost(&r.graph, spec);
        let removed = r.removed_mass_length;
        let detour = a * diam * r.removed_mass;
        let change = total_variation(&graph_difference(&g, &r.graph).unwrap());
        let tol = 1e-9;
        ok &= drop + tol >= removed - detour;
        ok &= removed - detour + tol >= detour;
        ok &= change <= removed + detour + tol;
        ok &= removed + detour <= 3.0 * drop + tol;
        let longest = path_decompose(&r.graph).unwrap().paths.iter().map(|p| p.length()).fold(0.0, f64::max);
        worst_len_ratio = worst_len_ratio.max(longest / (2.0 * a * diam));
        ok &= longest <= 2.0 * a * diam * (1.0 + 1e-12);
        if r.rounds > 0 {
            pruned += 1;
        }
    }
    outcome(ok && pruned > 0, format!("{pruned}/20 instances pruned, max path length / (2 a diam) = {worst_len_ratio:.4}"))
}

fn equivalence_chain() -> Outcome {
    let spec = urban();
    let delta = 1e-3;
    let cfg = suite_config();
    let mut ok = true;
    let mut worst_gap = 0.0_f64;
    let mut worst_sigma = f64::NEG_INFINITY;
    for seed in 0..SUITE {
        let (plus, minus) = instances::random_instance(seed, 3, 4.0);
        let v = verify_equivalence(&plus, &minus, spec, &cfg, delta).unwrap();
        let c = v.report.costs;
        let gap = (c.flux - c.pattern).abs();
        let sigma = c.sigma.unwrap() - c.pattern;
        worst_gap = worst_gap.max(gap);
        worst_sigma = worst_sigma.max(sigma);
        ok &= gap <= 1e-9 && sigma <= sigma_tolerance(&plus, &minus, 2.0, delta);
    }
    outcome(
        ok,
        format!("max |flux - pattern| = {worst_gap:.3e}, max sigma - pattern = {worst_sigma:.3e} (delta = {delta})"),
    )
}

fn wasserstein_sandwich() -> Outcome {
    let a = 2.5;
    let delta = 0.05;
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    let mut empty_err = 0.0_f64;
    for seed in 0..20 {
        let (plus, minus) = instances::random_instance(100 + seed, 4, 4.0);
        let sigma = instances::random_network(seed, 4.0);
        let (w1, _) = wasserstein1(&plus, &minus).unwrap();
        let (wd, _) = wasserstein_dsigma(&plus, &minus, &sigma, a, delta).unwrap();
        worst = worst.max(w1 - wd).max(wd - a * w1);
        ok &= w1 <= wd + 1e-9 && wd <= a * w1 + 1e-9;
        let (we, _) = wasserstein_dsigma(&plus, &minus, &NetworkSet::empty(2), a, delta).unwrap();
        empty_err = empty_err.max((we - a * w1).abs());
    }
    ok &= empty_err <= 1e-9;
    outcome(ok, format!("max violation {worst:.3e}, empty-network error {empty_err:.3e}"))
}

fn oracle_agreement() -> Outcome {
    let cfg = suite_config();
    let mut ok = true;
    let mut worst_ratio = 0.0_f64;
    for spec in [urban(), CostSpec::branched(0.5).unwrap()] {
        for seed in 0..SUITE {
            let (plus, minus) = instances::random_instance(seed, 3, 4.0);
            let solved = solve_discrete_report(&plus, &minus, spec, &cfg).unwrap();
            let oracle = brute_force_tiny_with(&plus, &minus, spec, 4, Execution::default()).unwrap();
            let ratio = solved.cost / oracle.cost.max(f64::MIN_POSITIVE);
            worst_ratio = worst_ratio.max(ratio);
            if solved.cost > oracle.cost * (1.0 + 1e-4) {
                ok = false;
                println!("    seed {seed} {spec:?}: solver {} > oracle {}", solved.cost, oracle.cost);
            }
        }
    }
    let f = Zigzag::standard();
    let (plus, minus) = f.measures();
    let fig = solve_discrete_report(&plus, &minus, f.spec(), &cfg).unwrap();
    ok &= fig.cost <= 6.3 + 1e-9;
    outcome(ok, format!("max solver/oracle = {worst_ratio:.6}, zigzag solver cost = {:.6}", fig.cost))
}

fn subadditivity() -> Outcome {
    let specs = [
        CostSpec::branched(0.5).unwrap(),
        CostSpec::branched(0.9).unwrap(),
        CostSpec::urban(0.5, 2.0).unwrap(),
        CostSpec::urban(0.25, 4.0).unwrap(),
    ];
    let grid: Vec<f64> = (1..=100).map(|i| 3.0 * i as f64 / 100.0).collect();
    let mut failures = 0;
    for spec in specs {
        for &u in &grid {
            for &v in &grid {
                if spec.cost(u + v) > spec.cost(u) + spec.cost(v) {
                    failures += 1;
                }
            }
        }
    }
    outcome(failures == 0, format!("{failures} violations on 4 x 100 x 100 grid points"))
}

fn reparameterisation() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..50 {
        let chi = instances::random_pattern(seed);
        let re = reparameterise_constant_speed(&chi);
        for spec in [urban(), CostSpec::branched(0.5).unwrap()] {
            worst = worst.max((pattern_cost(&chi, spec).unwrap() - pattern_cost(&re, spec).unwrap()).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max cost change {worst:.3e} over 50 patterns"))
}

fn single_path() -> Outcome {
    let spec = urban();
    let cfg = suite_config();
    let mut ok = true;
    let mut worst = 0.0_f64;
    let mut checked = 0;
    let mut record = |v: &ramiflow::equivalence::Verification| {
        let single = check_single_path(&v.rerouted).unwrap_or(false);
        let change = (pattern_cost(&v.rerouted, spec).unwrap() - v.report.costs.pattern).abs();
        worst = worst.max(change);
        checked += 1;
        single && change <= 1e-9
    };
    for seed in 0..SUITE {
        let (plus, minus) = instances::random_instance(seed, 3, 4.0);
        ok &= record(&verify_equivalence(&plus, &minus, spec, &cfg, 1e-2).unwrap());
    }
    let f = Zigzag::standard();
    let (plus, minus) = f.measures();
    for m in [0.0, f.m2 / 2.0, f.m2] {
        ok &= record(&verify_flux(&f.family_graph(m), &plus, &minus, f.spec(), 1e-2).unwrap());
    }
    outcome(ok, format!("{checked} patterns, max cost change {worst:.3e}"))
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 zigzag equal-cost family", zigzag_family, Some(Duration::from_secs(1))),
        ("2 cycle lemma", cycle_lemma, Some(Duration::from_secs(5))),
        ("3 path decomposition exactness", path_decomposition, None),
        ("4 fibre-length bound", fibre_length_bound, None),
        ("5 equivalence chain", equivalence_chain, Some(Duration::from_secs(60))),
        ("6 wasserstein sandwich", wasserstein_sandwich, None),
        ("7 oracle agreement", oracle_agreement, None),
        ("8 subadditivity", subadditivity, None),
        ("9 reparameterisation invariance", reparameterisation, None),
        ("10 single-path post-pass", single_path, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_time = limit.is_none_or(|l| took <= l);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" (limit {:.0?})", l));
        println!(
            "criterion {name}: {} - {} [{:.2?}{budget}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
