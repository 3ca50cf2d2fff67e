//! Small n-dimensional vector and segment toolkit.
//!
//! Points are plain `Vec<f64>`. Every predicate here takes an absolute
//! tolerance computed by [`tolerance`] from the coordinates involved, so that
//! snapping behaves the same regardless of where an instance sits in space.

use std::cmp::Ordering;

pub type Point = Vec<f64>;

/// Relative snapping precision used throughout the crate.
pub const GEOM_EPS: f64 = 1e-12;

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Point {
    a.iter().map(|x| x * s).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `a + t (b - a)`.
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Point {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

pub fn is_finite(p: &[f64]) -> bool {
    p.iter().all(|x| x.is_finite())
}

pub fn max_abs(points: &[&[f64]]) -> f64 {
    points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Absolute tolerance for predicates involving `points`.
pub fn tolerance(points: &[&[f64]]) -> f64 {
    GEOM_EPS * (1.0 + max_abs(points))
}

/// Lexicographic total order on coordinates.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Bitwise identity of a point, with `-0.0` folded onto `0.0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointKey(Vec<u64>);

impl PointKey {
    pub fn of(p: &[f64]) -> Self {
        PointKey(
            p.iter()
                .map(|&x| if x == 0.0 { 0.0_f64.to_bits() } else { x.to_bits() })
                .collect(),
        )
    }
}

/// Unordered pair of endpoint keys identifying a segment as a point set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentKey(pub PointKey, pub PointKey);

impl SegmentKey {
    pub fn of(a: &[f64], b: &[f64]) -> Self {
        let (ka, kb) = (PointKey::of(a), PointKey::of(b));
        if ka <= kb {
            SegmentKey(ka, kb)
        } else {
            SegmentKey(kb, ka)
        }
    }
}

/// Parameter of the orthogonal projection of `p` onto segment `ab`, clamped
/// to `[0, 1]`, and the distance from `p` to that projection.
pub fn project_onto_segment(p: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let d = sub(b, a);
    let len2 = dot(&d, &d);
    if len2 == 0.0 {
        return (0.0, dist(p, a));
    }
    let t = (dot(&sub(p, a), &d) / len2).clamp(0.0, 1.0);
    let q = lerp(a, b, t);
    (t, dist(p, &q))
}

/// Parameter `t` in `[0, 1]` if `p` lies on segment `ab` within `tol`.
pub fn point_on_segment(p: &[f64], a: &[f64], b: &[f64], tol: f64) -> Option<f64> {
    let (t, d) = project_onto_segment(p, a, b);
    (d <= tol).then_some(t)
}

/// How two segments `p1q1` and `p2q2` meet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentIntersection {
    Disjoint,
    /// A single point at parameter `s` on the first segment and `t` on the second.
    Point { s: f64, t: f64 },
    /// A collinear overlap of positive length; `s0 < s1` on the first segment,
    /// `t0`, `t1` the matching parameters on the second.
    Overlap { s0: f64, s1: f64, t0: f64, t1: f64 },
}

pub fn segment_intersection(
    p1: &[f64],
    q1: &[f64],
    p2: &[f64],
    q2: &[f64],
    tol: f64,
) -> SegmentIntersection {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    if a == 0.0 || e == 0.0 {
        // Degenerate segments are treated as points.
        if a == 0.0 && e == 0.0 {
            return if dist(p1, p2) <= tol {
                SegmentIntersection::Point { s: 0.0, t: 0.0 }
            } else {
                SegmentIntersection::Disjoint
            };
        }
        if a == 0.0 {
            return match point_on_segment(p1, p2, q2, tol) {
                Some(t) => SegmentIntersection::Point { s: 0.0, t },
                None => SegmentIntersection::Disjoint,
            };
        }
        return match point_on_segment(p2, p1, q1, tol) {
            Some(s) => SegmentIntersection::Point { s, t: 0.0 },
            None => SegmentIntersection::Disjoint,
        };
    }
    let b = dot(&d1, &d2);
    let c = dot(&d1, &r);
    let f = dot(&d2, &r);
    let denom = a * e - b * b;
    // a e - b^2 carries rounding noise of a few ulps of a e.
    if denom <= 1e-13 * a * e {
        return parallel_intersection(p1, q1, p2, q2, &d1, &d2, a, e, tol);
    }
    let mut s = ((b * f - c * e) / denom).clamp(0.0, 1.0);
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    let c1 = lerp(p1, q1, s);
    let c2 = lerp(p2, q2, t);
    if dist(&c1, &c2) <= tol {
        SegmentIntersection::Point { s, t }
    } else {
        SegmentIntersection::Disjoint
    }
}

#[allow(clippy::too_many_arguments)]
fn parallel_intersection(
    p1: &[f64],
    q1: &[f64],
    p2: &[f64],
    q2: &[f64],
    d1: &[f64],
    d2: &[f64],
    a: f64,
    e: f64,
    tol: f64,
) -> SegmentIntersection {
    let (_, off) = line_distance(p2, p1, d1, a);
    if off > tol {
        return SegmentIntersection::Disjoint;
    }
    let sp = dot(&sub(p2, p1), d1) / a;
    let sq = dot(&sub(q2, p1), d1) / a;
    let lo = sp.min(sq).max(0.0);
    let hi = sp.max(sq).min(1.0);
    let len = a.sqrt();
    if (hi - lo) * len > tol {
        let t_of = |s: f64| dot(&sub(&lerp(p1, q1, s), p2), d2) / e;
        SegmentIntersection::Overlap {
            s0: lo,
            s1: hi,
            t0: t_of(lo).clamp(0.0, 1.0),
            t1: t_of(hi).clamp(0.0, 1.0),
        }
    } else if (lo - hi) * len <= tol {
        let s = ((lo + hi) / 2.0).clamp(0.0, 1.0);
        let t = (dot(&sub(&lerp(p1, q1, s), p2), d2) / e).clamp(0.0, 1.0);
        SegmentIntersection::Point { s, t }
    } else {
        SegmentIntersection::Disjoint
    }
}

/// Projection parameter (unclamped) and distance of `p` from the line through
/// `origin` with direction `d` (`a = |d|^2`).
fn line_distance(p: &[f64], origin: &[f64], d: &[f64], a: f64) -> (f64, f64) {
    let w = sub(p, origin);
    let s = dot(&w, d) / a;
    let perp: Point = w.iter().zip(d).map(|(wi, di)| wi - s * di).collect();
    (s, norm(&perp))
}

/// Positive-length collinear overlap of `ab` with `cd`, as a parameter
/// interval on `ab`.
pub fn collinear_overlap(a: &[f64], b: &[f64], c: &[f64], d: &[f64], tol: f64) -> Option<(f64, f64)> {
    match segment_intersection(a, b, c, d, tol) {
        SegmentIntersection::Overlap { s0, s1, .. } => Some((s0, s1)),
        _ => None,
    }
}

/// Partition segment indices into classes of transitively collinear-overlapping
/// segments. Classes are returned in order of their smallest member.
pub fn overlap_classes(segments: &[(&[f64], &[f64])]) -> Vec<Vec<usize>> {
    let n = segments.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = segments[i];
            let (c, d) = segments[j];
            let tol = tolerance(&[a, b, c, d]);
            if collinear_overlap(a, b, c, d, tol).is_some() {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = classes.len();
            classes.push(Vec::new());
        }
        classes[slot[r]].push(i);
    }
    classes
}

/// Largest pairwise distance in a point cloud.
pub fn diameter(points: &[&[f64]]) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.max(dist(points[i], points[j]));
        }
    }
    best
}

pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| dist(&w[0], &w[1])).sum()
}
