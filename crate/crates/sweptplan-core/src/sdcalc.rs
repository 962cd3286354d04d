//! Signed-distance oracle for placed convex shapes.
//!
//! The oracle evaluates signed distance by maximizing the support-gap
//! `cost_C(c) - support_D(c)` over unit directions `c`: a dense angular scan
//! followed by golden-section refinement of every local maximum. It never
//! touches the certificate machinery, so audits and property tests compare
//! two genuinely independent code paths.
//!
//! Positive values are the separation distance, negative values the
//! penetration depth (the smallest translation norm that separates the sets).

use crate::geom::{GeomError, PlacedShape, Vec2};

/// Number of directions in the initial angular scan.
const SCAN_SAMPLES: usize = 3600;

/// Golden-section refinement stops when the angle bracket is this narrow.
const REFINE_TOL_RAD: f64 = 1e-10;

/// Signed distance value together with the maximizing unit direction.
///
/// The direction points from the second set toward the first: it is the `c`
/// attaining `sd = cost_C(c) - support_D(c)` over unit vectors.
#[derive(Clone, Copy, Debug)]
pub struct SignedDistanceResult {
    pub sd: f64,
    pub direction: Vec2,
}

/// Signed distance between two placed convex shapes.
pub fn signed_distance(
    c: &PlacedShape,
    d: &PlacedShape,
) -> Result<SignedDistanceResult, GeomError> {
    signed_distance_of_hulls(std::slice::from_ref(c), std::slice::from_ref(d))
}

/// Signed distance between the convex hulls of two groups of placed shapes.
///
/// The hull never needs to be constructed: its cost is the minimum of the
/// member costs and its support the maximum of the member supports. This is
/// what interval audits use for the hull of two consecutive vehicle poses.
pub fn signed_distance_of_hulls(
    cs: &[PlacedShape],
    ds: &[PlacedShape],
) -> Result<SignedDistanceResult, GeomError> {
    if cs.is_empty() || ds.is_empty() {
        return Err(GeomError::EmptyHull);
    }
    let gap = |theta: f64| {
        let c = Vec2::from_angle(theta);
        let cost = cs
            .iter()
            .map(|s| s.cost_unchecked(c))
            .fold(f64::INFINITY, f64::min);
        let support = ds
            .iter()
            .map(|s| s.support_unchecked(c))
            .fold(f64::NEG_INFINITY, f64::max);
        cost - support
    };
    let (sd, theta) = maximize_over_directions(&gap);
    Ok(SignedDistanceResult {
        sd,
        direction: Vec2::from_angle(theta),
    })
}

/// Euclidean distance from a point to a placed convex shape (zero inside).
///
/// Polytope-like shapes get the exact answer through their transformed
/// vertex hull; curved shapes fall back to the direction-scan oracle.
pub fn distance_point_to_convex(q: Vec2, c: &PlacedShape) -> f64 {
    if let Some(vertices) = c.vertex_list() {
        let hull = convex_hull_2d(&vertices);
        return distance_point_to_polygon(q, &hull);
    }
    let gap = |theta: f64| {
        let dir = Vec2::from_angle(theta);
        q.dot(dir) - c.support_unchecked(dir)
    };
    let (sd, _) = maximize_over_directions(&gap);
    sd.max(0.0)
}

/// Convex hull by monotone chain: counterclockwise, starting from the
/// lexicographically smallest point, collinear interior points removed.
pub fn convex_hull_2d(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: Vec2, a: Vec2, b: Vec2| (a - o).x * (b - o).y - (a - o).y * (b - o).x;
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Distance from a point to a convex polygon given in counterclockwise order.
///
/// Returns zero for points inside or on the boundary. Degenerate polygons
/// (single point, segment) are handled.
pub fn distance_point_to_polygon(q: Vec2, polygon: &[Vec2]) -> f64 {
    match polygon.len() {
        0 => f64::INFINITY,
        1 => (q - polygon[0]).norm(),
        2 => distance_point_to_segment(q, polygon[0], polygon[1]),
        n => {
            let mut inside = true;
            let mut min_d = f64::INFINITY;
            for i in 0..n {
                let a = polygon[i];
                let b = polygon[(i + 1) % n];
                let cross = (b - a).x * (q - a).y - (b - a).y * (q - a).x;
                if cross < 0.0 {
                    inside = false;
                }
                min_d = min_d.min(distance_point_to_segment(q, a, b));
            }
            if inside {
                0.0
            } else {
                min_d
            }
        }
    }
}

fn distance_point_to_segment(q: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (q - a).norm();
    }
    let t = ((q - a).dot(ab) / len2).clamp(0.0, 1.0);
    (q - (a + ab * t)).norm()
}

/// Maximizes a periodic function of the direction angle.
///
/// Dense scan over [0, 2pi), then golden-section refinement of the global
/// best sample and every strict local maximum.
fn maximize_over_directions(f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let step = std::f64::consts::TAU / SCAN_SAMPLES as f64;
    let vals: Vec<f64> = (0..SCAN_SAMPLES).map(|i| f(i as f64 * step)).collect();
    let mut best_i = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v > vals[best_i] {
            best_i = i;
        }
    }
    let refine = |i: usize| {
        let theta = i as f64 * step;
        golden_section_max(f, theta - step, theta + step)
    };
    let (mut best_v, mut best_t) = refine(best_i);
    for i in 0..SCAN_SAMPLES {
        let prev = vals[(i + SCAN_SAMPLES - 1) % SCAN_SAMPLES];
        let next = vals[(i + 1) % SCAN_SAMPLES];
        if vals[i] >= prev && vals[i] >= next && (vals[i] > prev || vals[i] > next) {
            let (v, t) = refine(i);
            if v > best_v {
                best_v = v;
                best_t = t;
            }
        }
    }
    (best_v, best_t.rem_euclid(std::f64::consts::TAU))
}

fn golden_section_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > REFINE_TOL_RAD {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (f(mid), mid)
}
