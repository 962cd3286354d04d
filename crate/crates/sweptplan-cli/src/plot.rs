//! Native SVG rendering of a solved plan: obstacles, the knot path, vehicle
//! bodies at knots, per-interval endpoint hulls, and the fine swept outline.
//!
//! Output is plain shapes with fixed three-decimal coordinates and no
//! timestamps, so identical inputs render identical bytes.

use std::fmt::Write as _;

use sweptplan_core::dynamics::simulate_fine;
use sweptplan_core::sdcalc::convex_hull_2d;
use sweptplan_core::transcribe::{Scenario, Trajectory, TranscribeError};
use sweptplan_core::{ConvexShape, Pose2, Vec2};

/// Boundary polygon of a shape in its local frame.
///
/// Polytopes use their vertices; curved shapes are approximated by support
/// points in `RESOLUTION` directions. Display-only, so the approximation is
/// fine.
fn outline(shape: &ConvexShape) -> Vec<Vec2> {
    const RESOLUTION: usize = 128;
    let points = match shape {
        ConvexShape::Point { q } => vec![*q],
        ConvexShape::Polytope { vertices } => vertices.clone(),
        _ => (0..RESOLUTION)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / RESOLUTION as f64;
                support_point(shape, Vec2::from_angle(theta))
            })
            .collect(),
    };
    convex_hull_2d(&points)
}

/// A boundary point of `shape` achieving the support value in direction `c`.
fn support_point(shape: &ConvexShape, c: Vec2) -> Vec2 {
    match shape {
        ConvexShape::Point { q } => *q,
        ConvexShape::Polytope { vertices } => vertices
            .iter()
            .copied()
            .max_by(|a, b| a.dot(c).partial_cmp(&b.dot(c)).expect("finite support"))
            .expect("nonempty polytope"),
        ConvexShape::Ball { r } => Vec2::new(c.x * r, c.y * r),
        ConvexShape::Ellipsoid { p } => {
            let pc = *p * c;
            let denom = p.quad(c).sqrt();
            if denom > 0.0 {
                Vec2::new(pc.x / denom, pc.y / denom)
            } else {
                Vec2::new(0.0, 0.0)
            }
        }
        ConvexShape::Inflated { base, r } => {
            let b = support_point(base, c);
            Vec2::new(b.x + c.x * r, b.y + c.y * r)
        }
        ConvexShape::Hull { members } => members
            .iter()
            .map(|m| support_point(m, c))
            .max_by(|a, b| a.dot(c).partial_cmp(&b.dot(c)).expect("finite support"))
            .expect("nonempty hull"),
    }
}

fn place(points: &[Vec2], pose: &Pose2) -> Vec<Vec2> {
    points.iter().map(|p| pose.transform(*p)).collect()
}

struct Bounds {
    lo: Vec2,
    hi: Vec2,
}

impl Bounds {
    fn new() -> Self {
        Bounds {
            lo: Vec2::new(f64::INFINITY, f64::INFINITY),
            hi: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn add(&mut self, p: Vec2) {
        self.lo.x = self.lo.x.min(p.x);
        self.lo.y = self.lo.y.min(p.y);
        self.hi.x = self.hi.x.max(p.x);
        self.hi.y = self.hi.y.max(p.y);
    }

    fn add_all(&mut self, ps: &[Vec2]) {
        for &p in ps {
            self.add(p);
        }
    }
}

fn polygon(out: &mut String, points: &[Vec2], style: &str) {
    out.push_str("<polygon points=\"");
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{:.3},{:.3}", p.x, p.y);
    }
    let _ = writeln!(out, "\" {style}/>");
}

fn polyline(out: &mut String, points: &[Vec2], style: &str) {
    out.push_str("<polyline points=\"");
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{:.3},{:.3}", p.x, p.y);
    }
    let _ = writeln!(out, "\" {style}/>");
}

/// Renders the solved trajectory over the scenario geometry.
///
/// `substeps` controls the fine flow used for the swept outline; it should
/// match the audit resolution so the figure shows what the audit measured.
pub fn render_plan(
    scenario: &Scenario,
    traj: &Trajectory,
    substeps: usize,
) -> Result<String, TranscribeError> {
    let body = outline(&scenario.vehicle_shape);
    let obstacles: Vec<Vec<Vec2>> = scenario
        .obstacles
        .iter()
        .map(|o| place(&outline(&o.shape), &o.pose.to_pose()))
        .collect();

    let knot_bodies: Vec<Vec<Vec2>> = traj
        .states
        .iter()
        .map(|x| place(&body, &x.pose()))
        .collect();
    let path: Vec<Vec2> = traj.states.iter().map(|x| x.position()).collect();

    let mut fine_hulls = Vec::with_capacity(traj.inputs.len());
    let mut endpoint_hulls = Vec::with_capacity(traj.inputs.len());
    for (k, u) in traj.inputs.iter().enumerate() {
        let fine = simulate_fine(&traj.states[k], u, traj.dt, substeps, &scenario.car)?;
        let mut fine_points = Vec::with_capacity(fine.len() * body.len());
        for x in &fine {
            fine_points.extend(place(&body, &x.pose()));
        }
        fine_hulls.push(convex_hull_2d(&fine_points));
        let mut ends = knot_bodies[k].clone();
        ends.extend_from_slice(&knot_bodies[k + 1]);
        endpoint_hulls.push(convex_hull_2d(&ends));
    }

    let mut bounds = Bounds::new();
    for poly in obstacles.iter().chain(&fine_hulls).chain(&knot_bodies) {
        bounds.add_all(poly);
    }
    bounds.add_all(&path);
    let margin = 5.0;
    let lo = Vec2::new(bounds.lo.x - margin, bounds.lo.y - margin);
    let hi = Vec2::new(bounds.hi.x + margin, bounds.hi.y + margin);
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"{:.0}\" viewBox=\"{:.3} {:.3} {:.3} {:.3}\">",
        (900.0 * h / w).round(),
        lo.x,
        lo.y,
        w,
        h
    );
    let _ = writeln!(
        out,
        "<g transform=\"matrix(1 0 0 -1 0 {:.3})\">",
        lo.y + hi.y
    );
    let _ = writeln!(
        out,
        "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{w:.3}\" height=\"{h:.3}\" fill=\"#ffffff\"/>",
        lo.x, lo.y
    );
    for poly in &obstacles {
        polygon(
            &mut out,
            poly,
            "fill=\"#c9c9c9\" stroke=\"#6e6e6e\" stroke-width=\"0.15\"",
        );
    }
    for hull in &endpoint_hulls {
        polygon(
            &mut out,
            hull,
            "fill=\"none\" stroke=\"#9db8d2\" stroke-width=\"0.08\" stroke-dasharray=\"0.6 0.4\"",
        );
    }
    for hull in &fine_hulls {
        polygon(
            &mut out,
            hull,
            "fill=\"none\" stroke=\"#d9822b\" stroke-width=\"0.12\"",
        );
    }
    for poly in &knot_bodies {
        polygon(
            &mut out,
            poly,
            "fill=\"none\" stroke=\"#2f6fad\" stroke-width=\"0.12\"",
        );
    }
    polyline(
        &mut out,
        &path,
        "fill=\"none\" stroke=\"#24323f\" stroke-width=\"0.1\"",
    );
    for p in &path {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"0.3\" fill=\"#24323f\"/>",
            p.x, p.y
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}
