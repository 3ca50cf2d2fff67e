//! Conversions between fluxes, patterns and network sets, and the
//! numerical check that their costs line up.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flux_graph::{check_mass_flux, graph_cost, sum_segments, CostSpec, FluxGraph};
use crate::geometry::{dist, lerp, segment_intersection, tolerance, Point, PointKey, SegmentIntersection};
use crate::graph_reduce::{path_decompose, reduce_all_cycles, TransportPathMeasure};
use crate::measures::DiscreteMeasure;
use crate::network::{cost_sigma, extract_sigma, NetworkSet};
use crate::pattern::{check_single_path, pattern_cost, Fibre, IrrigationPattern};
use crate::solver::{solve_discrete, SolveConfig};

/// Pattern whose fibres are the decomposition paths of the cycle-reduced
/// graph, each carrying its path weight.
pub fn flux_to_pattern(g: &FluxGraph) -> IrrigationPattern {
    let reduced = reduce_all_cycles(&normalise(g));
    let paths = path_decompose(&reduced).expect("cycle-reduced graphs are acyclic");
    paths_to_pattern(&paths)
}

fn paths_to_pattern(paths: &TransportPathMeasure) -> IrrigationPattern {
    let fibres = paths.paths.iter().map(|p| Fibre::new(p.points.clone(), p.weight)).collect();
    IrrigationPattern::new(paths.dim, fibres).expect("paths have positive weight and finite points")
}

/// Merges collinear overlapping edges so that the graph is a sum of
/// non-overlapping segments.
fn normalise(g: &FluxGraph) -> FluxGraph {
    sum_segments(g.dim(), g.segments().collect()).expect("edges of a valid graph")
}

/// Graph on the canonical arrangement of `chi`; each segment carries the
/// signed sum of the masses crossing it, so opposite traversals cancel.
pub fn pattern_to_flux(chi: &IrrigationPattern) -> FluxGraph {
    let mut segs = Vec::new();
    for s in chi.arrangement() {
        let w: f64 = s
            .traversals
            .iter()
            .map(|&(f, fwd)| if fwd { chi.fibres()[f].mass } else { -chi.fibres()[f].mass })
            .sum();
        let scale = s.traversals.iter().map(|&(f, _)| chi.fibres()[f].mass).sum::<f64>();
        if w.abs() <= 1e-12 * scale {
            continue;
        }
        if w > 0.0 {
            segs.push((s.a, s.b, w));
        } else {
            segs.push((s.b, s.a, -w));
        }
    }
    FluxGraph::from_segments(chi.dim(), segs).expect("arrangement segments are valid")
}

/// Splits edges at transversal crossings and at vertices of other edges
/// lying in their interior, so that edges only meet at shared vertices.
pub fn split_crossings(g: &FluxGraph) -> FluxGraph {
    let segs: Vec<(Point, Point, f64)> = g.segments().collect();
    let mut cuts: Vec<Vec<(f64, Point)>> = vec![Vec::new(); segs.len()];
    let mut found: Vec<Point> = Vec::new();
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (a, b, _) = &segs[i];
            let (c, d, _) = &segs[j];
            let tol = tolerance(&[a, b, c, d]);
            if let SegmentIntersection::Point { s, t } = segment_intersection(a, b, c, d, tol) {
                // Snap to an endpoint or an earlier crossing when the meeting
                // point is one, so that rounding never duplicates a vertex.
                let raw = lerp(a, b, s);
                let near = [a, b, c, d].into_iter().chain(&found).find(|e| dist(e, &raw) <= tol).cloned();
                let p = near.unwrap_or_else(|| {
                    found.push(raw.clone());
                    raw
                });
                let at_end = |e1: &Point, e2: &Point| PointKey::of(&p) == PointKey::of(e1) || PointKey::of(&p) == PointKey::of(e2);
                if !at_end(a, b) {
                    cuts[i].push((s, p.clone()));
                }
                if !at_end(c, d) {
                    cuts[j].push((t, p));
                }
            }
        }
    }
    let mut out = Vec::new();
    for ((p, q, w), mut c) in segs.into_iter().zip(cuts) {
        c.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut prev = p;
        for (_, x) in c {
            if PointKey::of(&x) == PointKey::of(&prev) || PointKey::of(&x) == PointKey::of(&q) {
                continue;
            }
            out.push((prev, x.clone(), w));
            prev = x;
        }
        out.push((prev, q, w));
    }
    FluxGraph::from_segments(g.dim(), out).expect("pieces of valid edges")
}

/// Pattern of `g` in which fibres that pass through two common points in the
/// same order also share the route between them.
///
/// Edges are first split where they meet, so that fibres can only meet at
/// graph vertices. Then, for each pair of fibres taken in order, the later
/// fibre's route between two shared vertices is replaced by the earlier
/// fibre's; any loop this creates is cut out.
pub fn single_path_reroute(g: &FluxGraph) -> IrrigationPattern {
    let split = reduce_all_cycles(&split_crossings(&reduce_all_cycles(&normalise(g))));
    let mut paths = path_decompose(&split).expect("cycle-reduced graphs are acyclic");
    let mut routes: Vec<Vec<usize>> = paths.paths.iter().map(|p| p.vertex_ids.clone()).collect();
    const MAX_PASSES: usize = 64;
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for gi in 1..routes.len() {
            for fi in 0..gi {
                while let Some(next) = reroute_once(&routes[fi], &routes[gi]) {
                    routes[gi] = next;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    for (p, r) in paths.paths.iter_mut().zip(routes) {
        p.points = r.iter().map(|&v| split.vertices()[v].clone()).collect();
        p.vertex_ids = r;
    }
    paths_to_pattern(&paths)
}

/// Replaces the part of `g` between two vertices it shares with `f` (in the
/// same order) by the part of `f`, if the two differ.
fn reroute_once(f: &[usize], g: &[usize]) -> Option<Vec<usize>> {
    let pos_f = |v: usize| f.iter().position(|&x| x == v);
    for (gi, &p) in g.iter().enumerate() {
        let Some(fp) = pos_f(p) else { continue };
        for gj in (gi + 1..g.len()).rev() {
            let Some(fq) = pos_f(g[gj]) else { continue };
            if fq <= fp || f[fp..=fq] == g[gi..=gj] {
                continue;
            }
            let mut out: Vec<usize> = g[..gi].to_vec();
            out.extend_from_slice(&f[fp..=fq]);
            out.extend_from_slice(&g[gj + 1..]);
            return Some(remove_loops(out));
        }
    }
    None
}

fn remove_loops(route: Vec<usize>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(route.len());
    for v in route {
        if let Some(k) = out.iter().position(|&x| x == v) {
            out.truncate(k);
        }
        out.push(v);
    }
    out
}

/// One checked relation of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub holds: bool,
}

impl InequalityCheck {
    /// `lhs <= rhs + tol`.
    fn at_most(name: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        InequalityCheck { name: name.into(), lhs, rhs, tol, holds: lhs <= rhs + tol }
    }

    /// `|lhs - rhs| <= tol`.
    fn equal(name: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        InequalityCheck { name: name.into(), lhs, rhs, tol, holds: (lhs - rhs).abs() <= tol }
    }

    fn flag(name: &str, holds: bool) -> Self {
        let v = if holds { 1.0 } else { 0.0 };
        InequalityCheck { name: name.into(), lhs: v, rhs: 1.0, tol: 0.0, holds }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportCosts {
    pub flux: f64,
    pub pattern: f64,
    /// Network formulation cost; only for urban planning.
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub costs: ReportCosts,
    pub inequalities: Vec<InequalityCheck>,
    pub pass: bool,
}

/// Artefacts behind a [`VerifyReport`].
#[derive(Debug, Clone)]
pub struct Verification {
    pub report: VerifyReport,
    pub graph: FluxGraph,
    pub pattern: IrrigationPattern,
    pub rerouted: IrrigationPattern,
    pub sigma: Option<NetworkSet>,
}

/// Allowance for the sampled network metric: every transported unit may
/// enter and leave the network at a sample up to `delta` away from the ideal
/// point, once per pair of atoms.
pub fn sigma_tolerance(plus: &DiscreteMeasure, minus: &DiscreteMeasure, a: f64, delta: f64) -> f64 {
    a * delta * plus.total_mass() * (plus.len() * minus.len()) as f64 + 1e-9
}

/// Solves the instance and checks the cost relations between the three
/// formulations of the result.
pub fn verify_equivalence(
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    spec: CostSpec,
    cfg: &SolveConfig,
    delta: f64,
) -> Result<Verification> {
    let g = solve_discrete(plus, minus, spec, cfg)?;
    verify_flux(&g, plus, minus, spec, delta)
}

/// Checks the cost relations for a given flux `g` from `plus` to `minus`.
///
/// * the flux has the right divergence;
/// * its pattern costs the same as the flux;
/// * urban planning: the network read off the pattern costs no more than
///   the pattern, up to [`sigma_tolerance`];
/// * urban planning: the rerouted pattern has the single path property and
///   costs the same.
pub fn verify_flux(
    g: &FluxGraph,
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    spec: CostSpec,
    delta: f64,
) -> Result<Verification> {
    let mut checks = vec![InequalityCheck::flag("mass_flux", check_mass_flux(g, plus, minus, 1e-9))];
    let flux = graph_cost(g, spec);
    let chi = flux_to_pattern(g);
    let pattern = pattern_cost(&chi, spec)?;
    checks.push(InequalityCheck::equal("flux_equals_pattern", flux, pattern, 1e-9));

    let mut sigma_cost = None;
    let mut sigma = None;
    let mut rerouted = chi.clone();
    if let CostSpec::UrbanPlanning { eps, a } = spec {
        let net = extract_sigma(&chi, eps, a);
        let s = cost_sigma(&net, plus, minus, eps, a, delta)?;
        let tol = sigma_tolerance(plus, minus, a, delta);
        checks.push(InequalityCheck::at_most("sigma_at_most_pattern", s, pattern, tol));
        sigma_cost = Some(s);
        sigma = Some(net);

        rerouted = single_path_reroute(g);
        let single = check_single_path(&rerouted).unwrap_or(false);
        checks.push(InequalityCheck::flag("single_path", single));
        let rerouted_cost = pattern_cost(&rerouted, spec)?;
        checks.push(InequalityCheck::equal("reroute_cost_unchanged", rerouted_cost, pattern, 1e-9));
    }
    let pass = checks.iter().all(|c| c.holds);
    let report = VerifyReport { costs: ReportCosts { flux, pattern, sigma: sigma_cost }, inequalities: checks, pass };
    Ok(Verification { report, graph: g.clone(), pattern: chi, rerouted, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux_graph::divergence;
    use crate::pattern::irrigating_measures;

    fn seg(p: &[f64], q: &[f64], w: f64) -> (Point, Point, f64) {
        (p.to_vec(), q.to_vec(), w)
    }

    #[test]
    fn single_edge_is_a_single_fibre() {
        let g = FluxGraph::from_segments(2, vec![seg(&[0.0, 0.0], &[1.0, 0.0], 2.0)]).unwrap();
        let chi = flux_to_pattern(&g);
        assert_eq!(chi.fibres().len(), 1);
        assert_eq!(chi.fibres()[0].mass, 2.0);
    }

    #[test]
    fn merge_graph_gives_two_fibres_sharing_the_trunk() {
        let g = FluxGraph::from_segments(
            2,
            vec![seg(&[0.0, 1.0], &[1.0, 0.0], 1.0), seg(&[0.0, -1.0], &[1.0, 0.0], 2.0), seg(&[1.0, 0.0], &[2.0, 0.0], 3.0)],
        )
        .unwrap();
        let chi = flux_to_pattern(&g);
        assert_eq!(chi.fibres().len(), 2);
        let spec = CostSpec::branched(0.5).unwrap();
        assert!((pattern_cost(&chi, spec).unwrap() - graph_cost(&g, spec)).abs() < 1e-12);
        assert_eq!(irrigating_measures(&chi), divergence(&g));
    }

    #[test]
    fn cycles_are_reduced_first() {
        let g = FluxGraph::from_segments(
            2,
            vec![
                seg(&[0.0, 0.0], &[1.0, 0.0], 2.0),
                seg(&[1.0, 0.0], &[1.0, 1.0], 1.0),
                seg(&[1.0, 1.0], &[0.0, 0.0], 1.0),
            ],
        )
        .unwrap();
        let spec = CostSpec::urban(0.5, 2.0).unwrap();
        let chi = flux_to_pattern(&g);
        let tv_removed = 1.0 + 1.0 + 2f64.sqrt();
        assert!(pattern_cost(&chi, spec).unwrap() <= graph_cost(&g, spec) - tv_removed + 1e-12);
    }

    #[test]
    fn pattern_to_flux_examples() {
        let one = IrrigationPattern::new(2, vec![Fibre::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]], 2.0)]).unwrap();
        let g = pattern_to_flux(&one);
        assert_eq!(g.edges().len(), 2);
        assert!(g.edges().iter().all(|e| e.weight == 2.0));

        let opposite = IrrigationPattern::new(
            2,
            vec![
                Fibre::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], 1.0),
                Fibre::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]], 1.0),
            ],
        )
        .unwrap();
        assert!(pattern_to_flux(&opposite).is_empty());

        let three = IrrigationPattern::new(
            2,
            vec![
                Fibre::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]], 1.0),
                Fibre::new(vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]], 2.0),
            ],
        )
        .unwrap();
        let mut w: Vec<f64> = pattern_to_flux(&three).edges().iter().map(|e| e.weight).collect();
        w.sort_by(f64::total_cmp);
        assert_eq!(w, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn crossings_become_vertices() {
        let g = FluxGraph::from_segments(
            2,
            vec![seg(&[0.0, 0.0], &[2.0, 2.0], 1.0), seg(&[0.0, 2.0], &[2.0, 0.0], 1.0)],
        )
        .unwrap();
        let s = split_crossings(&g);
        assert_eq!(s.edges().len(), 4);
        assert!(s.vertex_index(&[1.0, 1.0]).is_some());
        let spec = CostSpec::branched(0.5).unwrap();
        assert!((graph_cost(&s, spec) - graph_cost(&g, spec)).abs() < 1e-12);
    }

    #[test]
    fn reroute_merges_parallel_routes() {
        // Two routes from A to D: directly, and through B and C.
        let g = FluxGraph::from_segments(
            2,
            vec![
                seg(&[0.0, 0.0], &[3.0, 0.0], 0.5),
                seg(&[0.0, 0.0], &[1.0, 1.0], 1.0),
                seg(&[1.0, 1.0], &[2.0, 1.0], 1.0),
                seg(&[2.0, 1.0], &[3.0, 0.0], 1.0),
            ],
        )
        .unwrap();
        let chi = flux_to_pattern(&g);
        assert!(!check_single_path(&chi).unwrap());
        let fixed = single_path_reroute(&g);
        assert!(check_single_path(&fixed).unwrap());
        assert_eq!(irrigating_measures(&fixed), irrigating_measures(&chi));
    }

    #[test]
    fn equal_measures_verify_to_zero() {
        let mu = DiscreteMeasure::from_pairs(2, vec![(vec![0.0, 0.0], 1.0)]).unwrap();
        let spec = CostSpec::urban(0.5, 2.0).unwrap();
        let cfg = SolveConfig { restarts: 1, ..SolveConfig::default() };
        let v = verify_equivalence(&mu, &mu, spec, &cfg, 0.1).unwrap();
        assert!(v.report.pass);
        assert_eq!(v.report.costs.flux, 0.0);
        assert_eq!(v.report.costs.sigma, Some(0.0));
        assert!(v.sigma.unwrap().is_empty());
    }

    #[test]
    fn single_pair_costs_agree_on_both_sides_of_the_threshold() {
        let x = vec![0.0, 0.0];
        let y = vec![3.0, 4.0];
        let spec = CostSpec::urban(0.5, 2.0).unwrap();
        let cfg = SolveConfig { restarts: 1, ..SolveConfig::default() };
        for m in [0.3, 0.5, 2.0] {
            let plus = DiscreteMeasure::from_pairs(2, vec![(x.clone(), m)]).unwrap();
            let minus = DiscreteMeasure::from_pairs(2, vec![(y.clone(), m)]).unwrap();
            let v = verify_equivalence(&plus, &minus, spec, &cfg, 0.05).unwrap();
            let expect = spec.cost(m) * 5.0;
            assert!(v.report.pass, "{:?}", v.report);
            assert!((v.report.costs.flux - expect).abs() < 1e-12);
            assert!((v.report.costs.sigma.unwrap() - expect).abs() < 1e-9, "{:?}", v.report.costs);
            assert_eq!(v.sigma.unwrap().is_empty(), m <= 0.5);
        }
    }
}
