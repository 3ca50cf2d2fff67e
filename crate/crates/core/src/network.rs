//! Network sets and the two-speed metric they induce.
//!
//! Travel along the network costs 1 per unit length and travel anywhere else
//! costs `a > 1`. Distances are computed on an auxiliary graph whose nodes
//! are the query points plus points sampled along every segment at spacing
//! at most `delta`; riding between consecutive samples costs their distance,
//! and any two nodes are joined by an off-network jump costing `a` times
//! their distance. Entry and exit are thus restricted to sample points, so
//! the value overestimates the continuous metric by `O(delta)`.
//!
//! Samples sit at dyadic fractions `i / 2^j` of each segment, so halving
//! `delta` only ever adds nodes and can never increase a distance.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flux_graph::CostSpec;
use crate::geometry::{self, dist, is_finite, lerp, Point, PointKey};
use crate::measures::{check_balanced, DiscreteMeasure};
use crate::pattern::IrrigationPattern;
use crate::transport::{self, TransportPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSet {
    dim: usize,
    segments: Vec<(Point, Point)>,
}

impl NetworkSet {
    pub fn empty(dim: usize) -> Self {
        NetworkSet { dim, segments: Vec::new() }
    }

    pub fn new(dim: usize, segments: Vec<(Point, Point)>) -> Result<Self> {
        for (i, (p, q)) in segments.iter().enumerate() {
            if p.len() != dim || q.len() != dim {
                return Err(Error::invalid(format!("segment {i}"), format!("endpoints must have {dim} coordinates")));
            }
            if !is_finite(p) || !is_finite(q) {
                return Err(Error::invalid(format!("segment {i}"), "endpoint is not finite"));
            }
            if PointKey::of(p) == PointKey::of(q) {
                return Err(Error::invalid(format!("segment {i}"), "segment is degenerate"));
            }
        }
        Ok(NetworkSet { dim, segments })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[(Point, Point)] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Adds segments, keeping the existing ones first.
    pub fn with_segments(&self, extra: impl IntoIterator<Item = (Point, Point)>) -> Result<Self> {
        let mut segs = self.segments.clone();
        segs.extend(extra);
        NetworkSet::new(self.dim, segs)
    }
}

/// Length of the union of the segments; collinear overlaps count once.
pub fn h1_length(sigma: &NetworkSet) -> f64 {
    let refs: Vec<(&[f64], &[f64])> =
        sigma.segments.iter().map(|(p, q)| (p.as_slice(), q.as_slice())).collect();
    let mut total = 0.0;
    for class in geometry::overlap_classes(&refs) {
        if class.len() == 1 {
            let (p, q) = refs[class[0]];
            total += dist(p, q);
            continue;
        }
        let (origin, end) = refs[class[0]];
        let dir = geometry::sub(end, origin);
        let unit = geometry::scale(&dir, 1.0 / geometry::norm(&dir));
        let mut spans: Vec<(f64, f64)> = class
            .iter()
            .map(|&i| {
                let (p, q) = refs[i];
                let tp = geometry::dot(&geometry::sub(p, origin), &unit);
                let tq = geometry::dot(&geometry::sub(q, origin), &unit);
                (tp.min(tq), tp.max(tq))
            })
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut lo, mut hi) = spans[0];
        for &(s, e) in &spans[1..] {
            if s > hi {
                total += hi - lo;
                lo = s;
                hi = e;
            } else {
                hi = hi.max(e);
            }
        }
        total += hi - lo;
    }
    total
}

/// Auxiliary graph for the two-speed metric.
#[derive(Debug, Clone)]
pub struct SampledNetwork {
    dim: usize,
    /// Flat coordinates; the query points come first.
    coords: Vec<f64>,
    /// Up to two on-network neighbours per node with their riding cost.
    chain: Vec<Vec<(usize, f64)>>,
    a: f64,
}

impl SampledNetwork {
    pub fn build(sigma: &NetworkSet, a: f64, delta: f64, points: &[&[f64]]) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!("refinement step must be positive, got {delta}")));
        }
        if !(a.is_finite() && a > 1.0) {
            return Err(Error::InvalidParameter(format!("a must exceed 1, got {a}")));
        }
        let dim = sigma.dim;
        let mut coords: Vec<f64> = Vec::new();
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            coords.extend_from_slice(p);
        }
        let mut chain: Vec<Vec<(usize, f64)>> = vec![Vec::new(); points.len()];
        for (p, q) in &sigma.segments {
            let len = dist(p, q);
            let mut k: u64 = 1;
            while len / (k as f64) > delta {
                k *= 2;
            }
            let step = len / (k as f64);
            let first = chain.len();
            for i in 0..=k {
                let t = i as f64 / k as f64;
                coords.extend(lerp(p, q, t));
                chain.push(Vec::with_capacity(2));
            }
            for i in 0..k as usize {
                chain[first + i].push((first + i + 1, step));
                chain[first + i + 1].push((first + i, step));
            }
        }
        Ok(SampledNetwork { dim, coords, chain, a })
    }

    pub fn node_count(&self) -> usize {
        self.chain.len()
    }

    fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Distances from query point `source` to each query point in `targets`.
    pub fn distances(&self, source: usize, targets: &[usize]) -> Vec<f64> {
        let n = self.node_count();
        let mut d = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut pending = targets.iter().filter(|&&t| t != source).count();
        let mut is_target = vec![false; n];
        for &t in targets {
            is_target[t] = true;
        }
        d[source] = 0.0;
        while pending > 0 {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (v, (&dv, &fin)) in d.iter().zip(&done).enumerate() {
                if !fin && dv < best {
                    best = dv;
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if is_target[u] && u != source {
                pending -= 1;
            }
            for &(v, c) in &self.chain[u] {
                if best + c < d[v] {
                    d[v] = best + c;
                }
            }
            let pu = self.node(u);
            let a = self.a;
            for v in 0..n {
                if done[v] {
                    continue;
                }
                let pv = &self.coords[v * self.dim..(v + 1) * self.dim];
                let mut s = 0.0;
                for k in 0..self.dim {
                    let diff = pu[k] - pv[k];
                    s += diff * diff;
                }
                let nd = best + a * s.sqrt();
                if nd < d[v] {
                    d[v] = nd;
                }
            }
        }
        targets.iter().map(|&t| d[t]).collect()
    }
}

/// Two-speed distance between `x` and `y` on the sampled network. The search
/// always starts from the lexicographically smaller point, so swapping the
/// arguments gives the same bits.
pub fn d_sigma(x: &[f64], y: &[f64], sigma: &NetworkSet, a: f64, delta: f64) -> Result<f64> {
    let (x, y) = if geometry::lex_cmp(y, x).is_lt() { (y, x) } else { (x, y) };
    let net = SampledNetwork::build(sigma, a, delta, &[x, y])?;
    Ok(net.distances(0, &[1])[0])
}

/// Matrix of two-speed distances, rows indexed by `plus` atoms.
pub fn dsigma_matrix(
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    sigma: &NetworkSet,
    a: f64,
    delta: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    let points: Vec<&[f64]> = plus.positions().chain(minus.positions()).collect();
    let net = SampledNetwork::build(sigma, a, delta, &points)?;
    let (n, m) = (plus.len(), minus.len());
    // The metric is symmetric: run one search per atom of the smaller side.
    let rows_from_plus = n <= m;
    let (count, offset, others): (usize, usize, Vec<usize>) = if rows_from_plus {
        (n, 0, (n..n + m).collect())
    } else {
        (m, n, (0..n).collect())
    };
    let rows = exec.map(count, |i| net.distances(offset + i, &others));
    let mut cost = vec![0.0; n * m];
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row.into_iter().enumerate() {
            let (i, j) = if rows_from_plus { (r, c) } else { (c, r) };
            cost[i * m + j] = v;
        }
    }
    Ok(cost)
}

/// Optimal transport cost for the ground metric `d_sigma`.
pub fn wasserstein_dsigma(
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    sigma: &NetworkSet,
    a: f64,
    delta: f64,
) -> Result<(f64, TransportPlan)> {
    wasserstein_dsigma_with(plus, minus, sigma, a, delta, Execution::default())
}

pub fn wasserstein_dsigma_with(
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    sigma: &NetworkSet,
    a: f64,
    delta: f64,
    exec: Execution,
) -> Result<(f64, TransportPlan)> {
    check_balanced(plus, minus)?;
    if sigma.dim != plus.dim() {
        return Err(Error::DimensionMismatch { expected: plus.dim(), found: sigma.dim });
    }
    let cost = dsigma_matrix(plus, minus, sigma, a, delta, exec)?;
    Ok(transport::solve(&plus.masses(), &minus.masses(), &cost))
}

/// Transport cost plus `eps` per unit of network length.
pub fn cost_sigma(
    sigma: &NetworkSet,
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    eps: f64,
    a: f64,
    delta: f64,
) -> Result<f64> {
    let (w, _) = wasserstein_dsigma(plus, minus, sigma, a, delta)?;
    Ok(w + eps * h1_length(sigma))
}

/// Arrangement segments of `chi` whose solidarity mass strictly exceeds
/// `eps / (a - 1)`.
pub fn extract_sigma(chi: &IrrigationPattern, eps: f64, a: f64) -> NetworkSet {
    let threshold = eps / (a - 1.0);
    let segments = chi
        .arrangement()
        .into_iter()
        .filter(|s| s.mass > threshold)
        .map(|s| (s.a, s.b))
        .collect();
    NetworkSet { dim: chi.dim(), segments }
}

/// Convenience wrapper taking the urban planning parameters from a spec.
pub fn extract_sigma_for(chi: &IrrigationPattern, spec: CostSpec) -> Option<NetworkSet> {
    match spec {
        CostSpec::UrbanPlanning { eps, a } => Some(extract_sigma(chi, eps, a)),
        CostSpec::BranchedTransport { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::wasserstein1;
    use crate::pattern::Fibre;

    fn net(segs: &[(&[f64], &[f64])]) -> NetworkSet {
        NetworkSet::new(2, segs.iter().map(|(p, q)| (p.to_vec(), q.to_vec())).collect()).unwrap()
    }

    #[test]
    fn h1_examples() {
        assert_eq!(h1_length(&net(&[(&[0.0, 0.0], &[1.0, 0.0])])), 1.0);
        assert_eq!(h1_length(&net(&[(&[0.0, 0.0], &[1.0, 0.0]), (&[1.0, 0.0], &[0.0, 0.0])])), 1.0);
        assert_eq!(h1_length(&net(&[(&[0.0, 0.0], &[1.0, 0.0]), (&[0.5, 0.0], &[1.5, 0.0])])), 1.5);
    }

    #[test]
    fn dsigma_examples() {
        let empty = NetworkSet::empty(2);
        let d = d_sigma(&[0.0, 0.0], &[3.0, 4.0], &empty, 2.0, 0.1).unwrap();
        assert_eq!(d, 10.0);
        let s = net(&[(&[0.0, 0.0], &[1.0, 0.0])]);
        assert_eq!(d_sigma(&[0.0, 0.0], &[1.0, 0.0], &s, 2.0, 0.01).unwrap(), 1.0);
        let d = d_sigma(&[0.0, 0.0], &[2.0, 0.0], &s, 2.0, 0.01).unwrap();
        assert!((d - 3.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn dsigma_rejects_bad_parameters() {
        let s = NetworkSet::empty(2);
        assert!(d_sigma(&[0.0, 0.0], &[1.0, 0.0], &s, 2.0, 0.0).is_err());
        assert!(d_sigma(&[0.0, 0.0], &[1.0, 0.0], &s, 1.0, 0.1).is_err());
    }

    #[test]
    fn empty_network_scales_w1() {
        let plus = DiscreteMeasure::from_pairs(2, vec![(vec![0.0, 0.0], 1.0), (vec![1.0, 0.0], 2.0)]).unwrap();
        let minus = DiscreteMeasure::from_pairs(2, vec![(vec![0.0, 3.0], 1.5), (vec![2.0, 2.0], 1.5)]).unwrap();
        let (w, _) = wasserstein1(&plus, &minus).unwrap();
        let (wd, _) = wasserstein_dsigma(&plus, &minus, &NetworkSet::empty(2), 2.5, 0.1).unwrap();
        assert!((wd - 2.5 * w).abs() < 1e-9);
    }

    #[test]
    fn cost_sigma_examples() {
        let x = vec![0.0, 0.0];
        let y = vec![2.0, 0.0];
        let plus = DiscreteMeasure::from_pairs(2, vec![(x.clone(), 1.0)]).unwrap();
        let minus = DiscreteMeasure::from_pairs(2, vec![(y.clone(), 1.0)]).unwrap();
        let empty = cost_sigma(&NetworkSet::empty(2), &plus, &minus, 0.5, 2.0, 0.1).unwrap();
        assert_eq!(empty, 4.0);
        let road = NetworkSet::new(2, vec![(x, y)]).unwrap();
        let built = cost_sigma(&road, &plus, &minus, 0.5, 2.0, 0.1).unwrap();
        assert!((built - 3.0).abs() < 1e-12);
        let far = road.with_segments([(vec![10.0, 10.0], vec![10.0, 12.0])]).unwrap();
        let more = cost_sigma(&far, &plus, &minus, 0.5, 2.0, 0.1).unwrap();
        assert!((more - built - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extract_sigma_examples() {
        let chi = IrrigationPattern::new(
            2,
            vec![
                Fibre::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]], 1.0),
                Fibre::new(vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]], 2.0),
            ],
        )
        .unwrap();
        let s = extract_sigma(&chi, 0.5, 2.0);
        assert_eq!(s.segments().len(), 3);
        assert_eq!(h1_length(&s), 3.0);
        let light = IrrigationPattern::new(2, vec![Fibre::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], 0.5)]).unwrap();
        assert!(extract_sigma(&light, 0.5, 2.0).is_empty());
        assert!(extract_sigma(&light, 0.4, 2.0).segments().len() == 1);
    }
}
