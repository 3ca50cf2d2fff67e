//! Reference and seeded random instances used by the tests, the benches and
//! the `verify --suite` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flux_graph::{sum_segments, CostSpec, FluxGraph};
use crate::geometry::Point;
use crate::measures::DiscreteMeasure;
use crate::network::NetworkSet;
use crate::pattern::{Fibre, IrrigationPattern};

/// The four-point zigzag urban planning instance with a one-parameter family of
/// equally cheap fluxes.
///
/// `A = (0, s)` sends `m1 + m2`, `B = (1, 0)` receives `m1`, `C = (2, 0)`
/// sends `m1` and `D = (3, s)` receives `m1 + m2`, with `s = sqrt(a^2 - 1)`
/// so that the slanted sides have length `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zigzag {
    pub m1: f64,
    pub m2: f64,
    pub eps: f64,
    pub a: f64,
}

impl Zigzag {
    pub fn standard() -> Self {
        Zigzag { m1: 1.0, m2: 0.1, eps: 0.5, a: 2.0 }
    }

    pub fn spec(&self) -> CostSpec {
        CostSpec::UrbanPlanning { eps: self.eps, a: self.a }
    }

    pub fn height(&self) -> f64 {
        (self.a * self.a - 1.0).sqrt()
    }

    /// `[A, B, C, D]`.
    pub fn points(&self) -> [Point; 4] {
        let s = self.height();
        [vec![0.0, s], vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, s]]
    }

    pub fn measures(&self) -> (DiscreteMeasure, DiscreteMeasure) {
        let [a, b, c, d] = self.points();
        let plus = DiscreteMeasure::from_pairs(2, vec![(a, self.m1 + self.m2), (c, self.m1)]).unwrap();
        let minus = DiscreteMeasure::from_pairs(2, vec![(b, self.m1), (d, self.m1 + self.m2)]).unwrap();
        (plus, minus)
    }

    /// Family member with `m in [0, m2]` routed through the bottom edge.
    pub fn family_graph(&self, m: f64) -> FluxGraph {
        let [a, b, c, d] = self.points();
        FluxGraph::from_segments(
            2,
            vec![
                (a.clone(), b.clone(), self.m1 + m),
                (c.clone(), d.clone(), self.m1 + m),
                (a, d, self.m2 - m),
                (b, c, m),
            ],
        )
        .unwrap()
    }

    /// `2 a m1 + 2 a eps + 3 a m2`, the cost of every family member.
    pub fn family_cost(&self) -> f64 {
        2.0 * self.a * self.m1 + 2.0 * self.a * self.eps + 3.0 * self.a * self.m2
    }

    /// Straight `A -> D` carrying `m1 + m2` plus `C -> B` carrying `m1`.
    pub fn direct_graph(&self) -> FluxGraph {
        let [a, b, c, d] = self.points();
        FluxGraph::from_segments(2, vec![(a, d, self.m1 + self.m2), (c, b, self.m1)]).unwrap()
    }

    /// `3 (m1 + m2 + eps) + (m1 + eps)`, valid when both routes carry more
    /// than the network threshold.
    pub fn direct_cost(&self) -> f64 {
        3.0 * (self.m1 + self.m2 + self.eps) + (self.m1 + self.eps)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn random_point(r: &mut ChaCha8Rng, side: f64) -> Point {
    vec![r.gen_range(0.0..side), r.gen_range(0.0..side)]
}

/// Balanced planar measures with `1..=max_atoms` atoms per side inside a
/// square of diameter `diameter`. Masses lie in `[0.2, 2]` before the sinks
/// are rescaled to match the sources.
pub fn random_instance(seed: u64, max_atoms: usize, diameter: f64) -> (DiscreteMeasure, DiscreteMeasure) {
    let mut r = rng(seed, 1);
    let side = diameter / 2f64.sqrt();
    let n = r.gen_range(1..=max_atoms);
    let m = r.gen_range(1..=max_atoms);
    let plus: Vec<(Point, f64)> = (0..n).map(|_| (random_point(&mut r, side), r.gen_range(0.2..2.0))).collect();
    let raw: Vec<(Point, f64)> = (0..m).map(|_| (random_point(&mut r, side), r.gen_range(0.2..2.0))).collect();
    let total: f64 = plus.iter().map(|p| p.1).sum();
    let raw_total: f64 = raw.iter().map(|p| p.1).sum();
    let minus = raw.into_iter().map(|(p, w)| (p, w * total / raw_total)).collect::<Vec<_>>();
    (DiscreteMeasure::from_pairs(2, plus).unwrap(), DiscreteMeasure::from_pairs(2, minus).unwrap())
}

/// Random planar graph on `3..=max_vertices` vertices with weights in
/// `(0, 2]`. With `acyclic`, edges only run from lower to higher creation
/// index; otherwise a random directed cycle is planted as well.
pub fn random_graph(seed: u64, max_vertices: usize, acyclic: bool) -> FluxGraph {
    let mut r = rng(seed, 2);
    let n = r.gen_range(3..=max_vertices.max(3));
    let pts: Vec<Point> = (0..n).map(|_| random_point(&mut r, 4.0)).collect();
    let weight = |r: &mut ChaCha8Rng| 2.0 - r.gen_range(0.0..2.0);
    let mut segs: Vec<(Point, Point, f64)> = Vec::new();
    let count = r.gen_range(n..=2 * n);
    for _ in 0..count {
        let i = r.gen_range(0..n);
        let mut j = r.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let (t, h) = if acyclic && i > j { (j, i) } else { (i, j) };
        segs.push((pts[t].clone(), pts[h].clone(), weight(&mut r)));
    }
    if !acyclic {
        let len = r.gen_range(2..=n);
        let mut order: Vec<usize> = (0..n).collect();
        for k in (1..n).rev() {
            order.swap(k, r.gen_range(0..=k));
        }
        for k in 0..len {
            let (t, h) = (order[k], order[(k + 1) % len]);
            segs.push((pts[t].clone(), pts[h].clone(), weight(&mut r)));
        }
    }
    FluxGraph::from_segments(2, segs).unwrap()
}

/// Random pattern of `1..=4` fibres with `2..=5` vertices each, masses in
/// `[0.1, 2]` and irregular vertex times.
pub fn random_pattern(seed: u64) -> IrrigationPattern {
    let mut r = rng(seed, 3);
    let count = r.gen_range(1..=4);
    let fibres = (0..count)
        .map(|_| {
            let k = r.gen_range(2..=5);
            let polyline: Vec<Point> = (0..k).map(|_| random_point(&mut r, 3.0)).collect();
            let mut times = vec![0.0];
            for _ in 1..k {
                let last = *times.last().unwrap();
                times.push(last + r.gen_range(0.05..1.0));
            }
            Fibre { polyline, mass: r.gen_range(0.1..2.0), times }
        })
        .collect();
    IrrigationPattern::new(2, fibres).unwrap()
}

/// `0..=4` random segments inside a square of diameter `diameter`.
pub fn random_network(seed: u64, diameter: f64) -> NetworkSet {
    let mut r = rng(seed, 4);
    let side = diameter / 2f64.sqrt();
    let count = r.gen_range(0..=4);
    let segs = (0..count).map(|_| (random_point(&mut r, side), random_point(&mut r, side))).collect();
    NetworkSet::new(2, segs).unwrap()
}

/// A flux in which every unit of mass takes a short route or a long detour,
/// for exercising long-path pruning. Returns the graph and its marginals.
pub fn long_path_instance(seed: u64, a: f64) -> (FluxGraph, DiscreteMeasure, DiscreteMeasure) {
    let mut r = rng(seed, 5);
    let pairs = r.gen_range(1..=3);
    let mut segs: Vec<(Point, Point, f64)> = Vec::new();
    for _ in 0..pairs {
        let s = random_point(&mut r, 1.0);
        let t = random_point(&mut r, 1.0);
        let short = r.gen_range(0.1..1.5);
        let detour = r.gen_range(0.1..1.5);
        let reach = a * r.gen_range(3.0..6.0);
        let angle = r.gen_range(0.0..std::f64::consts::TAU);
        let (dx, dy) = (reach * angle.cos(), reach * angle.sin());
        let w1 = vec![s[0] + dx, s[1] + dy];
        let w2 = vec![t[0] + dx, t[1] + dy];
        segs.push((s.clone(), t.clone(), short));
        segs.push((s, w1.clone(), detour));
        segs.push((w1, w2.clone(), detour));
        segs.push((w2, t, detour));
    }
    let g = sum_segments(2, segs).unwrap();
    let (plus, minus) = crate::flux_graph::divergence(&g);
    (g, plus, minus)
}
