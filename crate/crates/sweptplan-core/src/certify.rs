//! Differentiable collision-avoidance certificates.
//!
//! A certificate for "the signed distance between the vehicle body `A` at
//! state `x` and an obstacle `B` placed at `(S, d)` is at least `gamma`" is a
//! variable triple `(c, alpha, beta)` satisfying
//!
//! ```text
//! alpha <= cost_{A_i}(R(x)'c)            for every member A_i of A,
//! beta  >= support_{B_j}(S'c)            for every member B_j of B,
//! gamma <= alpha - beta + c·(p(x) - d),
//! |c| = 1.
//! ```
//!
//! For a single pose this system is feasible exactly when the signed
//! distance is at least `gamma`. For a motion interval the same idea covers
//! the swept volume: member rows are emitted at both endpoint poses and the
//! gamma row additionally subtracts the interval's deviation radius bound
//! `r(v, delta)` (see [`crate::sweptfit`]) and a slack margin `w`.
//!
//! Every row is continuously differentiable in the state and certificate
//! variables; member costs and supports of ellipsoid members use the
//! smoothed form so the rows stay smooth at `c = 0`. Single-member sides are
//! eliminated where the theory allows: `alpha` (`beta`) drops out of the
//! discrete rows when the vehicle (obstacle) has one member, and `beta`
//! drops out of the interval rows for a static single-member obstacle.

use serde::{Deserialize, Serialize};

use crate::dynamics::CarState;
use crate::geom::{
    smoothed_ellipsoid_support, ConvexShape, Pose2, Rot2, SymMat2, Vec2, DEFAULT_SMOOTHING_EPS,
};
use crate::sweptfit::RadiusModel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CertifyError {
    #[error("certificate shapes must decompose into points, polytopes, balls, ellipsoids, or hulls of those")]
    UnsupportedShape,
    #[error("the norm relaxation |c| <= 1 is only sound for gamma > 0, got {0}")]
    RelaxationNeedsPositiveGamma(f64),
    #[error("interval certificates need a radius model")]
    MissingRadiusModel,
}

/// Planning mode: certify knot poses only, or whole motion intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanningMode {
    Discrete,
    Continuous,
}

/// How the unit-direction constraint is imposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormConstraint {
    /// `c'c - 1 = 0`.
    Equality,
    /// `c'c - 1 <= 0`; sound only when `gamma > 0`.
    Relaxed,
}

/// One convex member of a decomposed shape, in body coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HullMember {
    Vertex(Vec2),
    Ellipsoid(SymMat2),
}

/// Flattens a shape into hull members.
///
/// Polytopes become one vertex member each; balls become origin-centered
/// ellipsoids (zero-radius balls degrade to a vertex); hulls concatenate
/// their members. Minkowski-inflated shapes have no member decomposition
/// here and are rejected.
pub fn hull_members(shape: &ConvexShape) -> Result<Vec<HullMember>, CertifyError> {
    let mut out = Vec::new();
    collect_members(shape, &mut out)?;
    Ok(out)
}

fn collect_members(shape: &ConvexShape, out: &mut Vec<HullMember>) -> Result<(), CertifyError> {
    match shape {
        ConvexShape::Point { q } => out.push(HullMember::Vertex(*q)),
        ConvexShape::Polytope { vertices } => {
            out.extend(vertices.iter().map(|v| HullMember::Vertex(*v)));
        }
        ConvexShape::Ellipsoid { p } => out.push(HullMember::Ellipsoid(*p)),
        ConvexShape::Ball { r } => {
            if *r == 0.0 {
                out.push(HullMember::Vertex(Vec2::ZERO));
            } else {
                out.push(HullMember::Ellipsoid(SymMat2::scaled_identity(r * r)));
            }
        }
        ConvexShape::Hull { members } => {
            for m in members {
                collect_members(m, out)?;
            }
        }
        ConvexShape::Inflated { .. } => return Err(CertifyError::UnsupportedShape),
    }
    Ok(())
}

/// Certificate decision variables for one (pose, obstacle) or
/// (interval, obstacle) pairing. Eliminated variables are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateVars {
    pub c: Vec2,
    pub alpha: f64,
    pub beta: f64,
}

/// Column roles of a residual block's dense Jacobian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertCol {
    /// Component `i` of the interval-start state, `0..5`.
    StateK(usize),
    /// Component `i` of the interval-end state (interval rows only).
    StateK1(usize),
    /// Component `i` of the direction `c`, `0..2`.
    C(usize),
    Alpha,
    Beta,
}

/// Residual values and dense Jacobian over an ordered column slice.
///
/// Inequalities use the convention `g <= 0` feasible; equalities `h = 0`.
#[derive(Clone, Debug)]
pub struct ResidualBlock {
    pub cols: Vec<CertCol>,
    pub ineq: Vec<f64>,
    pub ineq_jac: Vec<Vec<f64>>,
    pub eq: Vec<f64>,
    pub eq_jac: Vec<Vec<f64>>,
}

impl ResidualBlock {
    pub fn max_ineq(&self) -> f64 {
        self.ineq.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_eq_abs(&self) -> f64 {
        self.eq.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// An obstacle: a shape, its placement, and the per-interval sweep slack.
///
/// The placement is either fixed or a per-step schedule (one pose per knot).
#[derive(Clone, Debug)]
pub struct ObstacleSpec {
    pub shape: ConvexShape,
    pub path: ObstaclePath,
    /// Sweep slack margin `w >= 0` added to interval certificates [m].
    pub w: f64,
}

#[derive(Clone, Debug)]
pub enum ObstaclePath {
    Static(Pose2),
    Schedule(Vec<Pose2>),
}

impl ObstacleSpec {
    pub fn fixed(shape: ConvexShape, pose: Pose2, w: f64) -> Self {
        ObstacleSpec {
            shape,
            path: ObstaclePath::Static(pose),
            w,
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self.path, ObstaclePath::Static(_))
    }

    pub fn pose_at(&self, k: usize) -> Pose2 {
        match &self.path {
            ObstaclePath::Static(p) => *p,
            ObstaclePath::Schedule(ps) => ps[k.min(ps.len() - 1)],
        }
    }
}

/// Certificate template for one vehicle/obstacle pairing.
///
/// Construction decides the member decomposition and which variables are
/// eliminated, so variable and row counts are fixed before any evaluation.
#[derive(Clone, Debug)]
pub struct CertProblem {
    vehicle: Vec<HullMember>,
    obstacle: Vec<HullMember>,
    pub mode: PlanningMode,
    pub norm: NormConstraint,
    pub gamma: f64,
    pub eps: f64,
    eliminate_alpha: bool,
    eliminate_beta: bool,
    layout: Layout,
}

#[derive(Clone, Debug)]
struct Layout {
    cols: Vec<CertCol>,
    xk: [Option<usize>; 5],
    xk1: [Option<usize>; 5],
    c: [usize; 2],
    alpha: Option<usize>,
    beta: Option<usize>,
}

impl Layout {
    fn build(mode: PlanningMode, eliminate_alpha: bool, eliminate_beta: bool) -> Layout {
        let mut cols = Vec::new();
        let mut xk = [None; 5];
        let mut xk1 = [None; 5];
        let state_k_range = match mode {
            PlanningMode::Discrete => 0..3,
            PlanningMode::Continuous => 0..5,
        };
        for i in state_k_range {
            xk[i] = Some(cols.len());
            cols.push(CertCol::StateK(i));
        }
        if mode == PlanningMode::Continuous {
            for (i, slot) in xk1.iter_mut().enumerate().take(3) {
                *slot = Some(cols.len());
                cols.push(CertCol::StateK1(i));
            }
        }
        let c = [cols.len(), cols.len() + 1];
        cols.push(CertCol::C(0));
        cols.push(CertCol::C(1));
        let alpha = (!eliminate_alpha).then(|| {
            cols.push(CertCol::Alpha);
            cols.len() - 1
        });
        let beta = (!eliminate_beta).then(|| {
            cols.push(CertCol::Beta);
            cols.len() - 1
        });
        Layout {
            cols,
            xk,
            xk1,
            c,
            alpha,
            beta,
        }
    }
}

/// Value and gradients of one member's cost or support term.
struct MemberTerm {
    value: f64,
    d_c: Vec2,
    d_psi: f64,
}

/// Cost of a vehicle member in the frame rotated by `rot`, differentiable
/// in both the direction and the rotation angle.
fn vehicle_cost_term(member: &HullMember, rot: Rot2, c: Vec2, eps: f64) -> MemberTerm {
    match member {
        HullMember::Vertex(a) => MemberTerm {
            value: c.dot(rot.apply(*a)),
            d_c: rot.apply(*a),
            d_psi: c.dot(rot.derivative_apply(*a)),
        },
        HullMember::Ellipsoid(p) => {
            let m = rot.rotate_sym(*p);
            let (sval, grad) = smoothed_ellipsoid_support(m, c, eps);
            let rc = rot.apply_transpose(c);
            let drc = rot.derivative_transpose_apply(c);
            MemberTerm {
                value: -sval,
                d_c: -grad,
                d_psi: -(drc.dot(*p * rc)) / sval,
            }
        }
    }
}

/// Support of an obstacle member under a fixed placement rotation.
fn obstacle_support_term(member: &HullMember, rot: Rot2, c: Vec2, eps: f64) -> MemberTerm {
    match member {
        HullMember::Vertex(b) => MemberTerm {
            value: c.dot(rot.apply(*b)),
            d_c: rot.apply(*b),
            d_psi: 0.0,
        },
        HullMember::Ellipsoid(q) => {
            let (sval, grad) = smoothed_ellipsoid_support(rot.rotate_sym(*q), c, eps);
            MemberTerm {
                value: sval,
                d_c: grad,
                d_psi: 0.0,
            }
        }
    }
}

impl CertProblem {
    /// Template for a single-pose certificate.
    pub fn new_discrete(
        vehicle: &ConvexShape,
        obstacle: &ConvexShape,
        gamma: f64,
        norm: NormConstraint,
    ) -> Result<Self, CertifyError> {
        Self::build(vehicle, obstacle, PlanningMode::Discrete, gamma, norm, true)
    }

    /// Template for a motion-interval certificate.
    ///
    /// `obstacle_static` records whether the obstacle placement is constant
    /// over the interval; that is what licenses eliminating `beta` for
    /// single-member obstacles.
    pub fn new_continuous(
        vehicle: &ConvexShape,
        obstacle: &ConvexShape,
        gamma: f64,
        norm: NormConstraint,
        obstacle_static: bool,
    ) -> Result<Self, CertifyError> {
        Self::build(
            vehicle,
            obstacle,
            PlanningMode::Continuous,
            gamma,
            norm,
            obstacle_static,
        )
    }

    fn build(
        vehicle: &ConvexShape,
        obstacle: &ConvexShape,
        mode: PlanningMode,
        gamma: f64,
        norm: NormConstraint,
        obstacle_static: bool,
    ) -> Result<Self, CertifyError> {
        if norm == NormConstraint::Relaxed && gamma <= 0.0 {
            return Err(CertifyError::RelaxationNeedsPositiveGamma(gamma));
        }
        let vehicle = hull_members(vehicle)?;
        let obstacle = hull_members(obstacle)?;
        let eliminate_alpha = match mode {
            // With member rows at both interval endpoints there are always at
            // least two alpha rows, so alpha stays a variable.
            PlanningMode::Continuous => false,
            PlanningMode::Discrete => vehicle.len() == 1,
        };
        let eliminate_beta = match mode {
            PlanningMode::Continuous => obstacle.len() == 1 && obstacle_static,
            PlanningMode::Discrete => obstacle.len() == 1,
        };
        let layout = Layout::build(mode, eliminate_alpha, eliminate_beta);
        Ok(CertProblem {
            vehicle,
            obstacle,
            mode,
            norm,
            gamma,
            eps: DEFAULT_SMOOTHING_EPS,
            eliminate_alpha,
            eliminate_beta,
            layout,
        })
    }

    pub fn n_vehicle_members(&self) -> usize {
        self.vehicle.len()
    }

    pub fn n_obstacle_members(&self) -> usize {
        self.obstacle.len()
    }

    pub fn has_alpha(&self) -> bool {
        !self.eliminate_alpha
    }

    pub fn has_beta(&self) -> bool {
        !self.eliminate_beta
    }

    /// Number of certificate decision variables (`c` plus retained
    /// `alpha`/`beta`).
    pub fn var_count(&self) -> usize {
        2 + usize::from(!self.eliminate_alpha) + usize::from(!self.eliminate_beta)
    }

    /// `(inequality rows, equality rows)` emitted per evaluation.
    pub fn row_counts(&self) -> (usize, usize) {
        let n_a = self.vehicle.len();
        let n_b = self.obstacle.len();
        let member_rows = match self.mode {
            PlanningMode::Discrete => {
                let a_rows = if self.eliminate_alpha { 0 } else { n_a };
                let b_rows = if self.eliminate_beta { 0 } else { n_b };
                a_rows + b_rows
            }
            PlanningMode::Continuous => {
                let b_rows = if self.eliminate_beta { 0 } else { 2 * n_b };
                2 * n_a + b_rows
            }
        };
        match self.norm {
            NormConstraint::Equality => (member_rows + 1, 1),
            NormConstraint::Relaxed => (member_rows + 2, 0),
        }
    }

    pub fn cols(&self) -> &[CertCol] {
        &self.layout.cols
    }

    /// Residual block for a single pose against one obstacle placement.
    pub fn discrete_residuals(
        &self,
        x: &CarState,
        obstacle_pose: &Pose2,
        vars: &CertificateVars,
    ) -> ResidualBlock {
        assert_eq!(
            self.mode,
            PlanningMode::Discrete,
            "discrete template required"
        );
        let lay = &self.layout;
        let n_cols = lay.cols.len();
        let rot = Rot2::from_angle(x.psi);
        let c = vars.c;
        let mut ineq = Vec::new();
        let mut ineq_jac: Vec<Vec<f64>> = Vec::new();

        let mut gamma_row = vec![0.0; n_cols];
        // gamma row: gamma - alpha + beta - c·(p - d) <= 0, with eliminated
        // variables replaced by their defining member term.
        let p_minus_d = x.position() - obstacle_pose.translation;
        let mut gamma_val = self.gamma - c.dot(p_minus_d);
        gamma_row[lay.c[0]] -= p_minus_d.x;
        gamma_row[lay.c[1]] -= p_minus_d.y;
        gamma_row[lay.xk[0].unwrap()] = -c.x;
        gamma_row[lay.xk[1].unwrap()] = -c.y;

        if let Some(ai) = lay.alpha {
            gamma_val -= vars.alpha;
            gamma_row[ai] = -1.0;
            for member in &self.vehicle {
                let t = vehicle_cost_term(member, rot, c, self.eps);
                let mut row = vec![0.0; n_cols];
                row[ai] = 1.0;
                row[lay.c[0]] = -t.d_c.x;
                row[lay.c[1]] = -t.d_c.y;
                row[lay.xk[2].unwrap()] = -t.d_psi;
                ineq.push(vars.alpha - t.value);
                ineq_jac.push(row);
            }
        } else {
            let t = vehicle_cost_term(&self.vehicle[0], rot, c, self.eps);
            gamma_val -= t.value;
            gamma_row[lay.c[0]] -= t.d_c.x;
            gamma_row[lay.c[1]] -= t.d_c.y;
            gamma_row[lay.xk[2].unwrap()] -= t.d_psi;
        }

        if let Some(bi) = lay.beta {
            gamma_val += vars.beta;
            gamma_row[bi] = 1.0;
            for member in &self.obstacle {
                let t = obstacle_support_term(member, obstacle_pose.rotation, c, self.eps);
                let mut row = vec![0.0; n_cols];
                row[bi] = -1.0;
                row[lay.c[0]] = t.d_c.x;
                row[lay.c[1]] = t.d_c.y;
                ineq.push(t.value - vars.beta);
                ineq_jac.push(row);
            }
        } else {
            let t = obstacle_support_term(&self.obstacle[0], obstacle_pose.rotation, c, self.eps);
            gamma_val += t.value;
            gamma_row[lay.c[0]] += t.d_c.x;
            gamma_row[lay.c[1]] += t.d_c.y;
        }

        ineq.push(gamma_val);
        ineq_jac.push(gamma_row);
        self.finish_block(lay, ineq, ineq_jac, c)
    }

    /// Residual block for one motion interval against one obstacle.
    ///
    /// Member rows are emitted at both endpoint poses; the gamma row
    /// subtracts the interval deviation radius `r(v_k, delta_k)` from the
    /// fitted model and the obstacle's sweep slack `w`. Inputs do not enter:
    /// the fitted radius bound already covers every admissible input.
    #[allow(clippy::too_many_arguments)]
    pub fn continuous_residuals(
        &self,
        x_k: &CarState,
        x_k1: &CarState,
        obstacle_pose_k: &Pose2,
        obstacle_pose_k1: &Pose2,
        w: f64,
        radius_model: &RadiusModel,
        vars: &CertificateVars,
    ) -> ResidualBlock {
        assert_eq!(
            self.mode,
            PlanningMode::Continuous,
            "continuous template required"
        );
        let lay = &self.layout;
        let n_cols = lay.cols.len();
        let c = vars.c;
        let rot_k = Rot2::from_angle(x_k.psi);
        let rot_k1 = Rot2::from_angle(x_k1.psi);
        let p_shift = x_k1.position() - x_k.position();
        let d_shift = obstacle_pose_k1.translation - obstacle_pose_k.translation;
        let mut ineq = Vec::new();
        let mut ineq_jac: Vec<Vec<f64>> = Vec::new();

        let ai = lay
            .alpha
            .expect("alpha is never eliminated in interval mode");
        for member in &self.vehicle {
            let t = vehicle_cost_term(member, rot_k, c, self.eps);
            let mut row = vec![0.0; n_cols];
            row[ai] = 1.0;
            row[lay.c[0]] = -t.d_c.x;
            row[lay.c[1]] = -t.d_c.y;
            row[lay.xk[2].unwrap()] = -t.d_psi;
            ineq.push(vars.alpha - t.value);
            ineq_jac.push(row);
        }
        for member in &self.vehicle {
            // Same member at the far pose, shifted by c·(p_{k+1} - p_k).
            let t = vehicle_cost_term(member, rot_k1, c, self.eps);
            let mut row = vec![0.0; n_cols];
            row[ai] = 1.0;
            row[lay.c[0]] = -t.d_c.x - p_shift.x;
            row[lay.c[1]] = -t.d_c.y - p_shift.y;
            row[lay.xk1[2].unwrap()] = -t.d_psi;
            row[lay.xk[0].unwrap()] = c.x;
            row[lay.xk[1].unwrap()] = c.y;
            row[lay.xk1[0].unwrap()] = -c.x;
            row[lay.xk1[1].unwrap()] = -c.y;
            ineq.push(vars.alpha - t.value - c.dot(p_shift));
            ineq_jac.push(row);
        }

        let mut gamma_row = vec![0.0; n_cols];
        let p_minus_d = x_k.position() - obstacle_pose_k.translation;
        let radius = radius_model.eval(x_k.v, x_k.delta);
        let mut gamma_val = self.gamma - vars.alpha - c.dot(p_minus_d) + radius.value + w;
        gamma_row[ai] = -1.0;
        gamma_row[lay.c[0]] -= p_minus_d.x;
        gamma_row[lay.c[1]] -= p_minus_d.y;
        gamma_row[lay.xk[0].unwrap()] = -c.x;
        gamma_row[lay.xk[1].unwrap()] = -c.y;
        gamma_row[lay.xk[3].unwrap()] = radius.dv;
        gamma_row[lay.xk[4].unwrap()] = radius.ddelta;

        if let Some(bi) = lay.beta {
            gamma_val += vars.beta;
            gamma_row[bi] = 1.0;
            for member in &self.obstacle {
                let t = obstacle_support_term(member, obstacle_pose_k.rotation, c, self.eps);
                let mut row = vec![0.0; n_cols];
                row[bi] = -1.0;
                row[lay.c[0]] = t.d_c.x;
                row[lay.c[1]] = t.d_c.y;
                ineq.push(t.value - vars.beta);
                ineq_jac.push(row);
            }
            for member in &self.obstacle {
                let t = obstacle_support_term(member, obstacle_pose_k1.rotation, c, self.eps);
                let mut row = vec![0.0; n_cols];
                row[bi] = -1.0;
                row[lay.c[0]] = t.d_c.x + d_shift.x;
                row[lay.c[1]] = t.d_c.y + d_shift.y;
                ineq.push(t.value + c.dot(d_shift) - vars.beta);
                ineq_jac.push(row);
            }
        } else {
            // Static single-member obstacle: both endpoint supports coincide.
            let t = obstacle_support_term(&self.obstacle[0], obstacle_pose_k.rotation, c, self.eps);
            gamma_val += t.value;
            gamma_row[lay.c[0]] += t.d_c.x;
            gamma_row[lay.c[1]] += t.d_c.y;
        }

        ineq.push(gamma_val);
        ineq_jac.push(gamma_row);
        self.finish_block(lay, ineq, ineq_jac, c)
    }

    fn finish_block(
        &self,
        lay: &Layout,
        mut ineq: Vec<f64>,
        mut ineq_jac: Vec<Vec<f64>>,
        c: Vec2,
    ) -> ResidualBlock {
        let n_cols = lay.cols.len();
        let norm_val = c.norm_squared() - 1.0;
        let mut norm_row = vec![0.0; n_cols];
        norm_row[lay.c[0]] = 2.0 * c.x;
        norm_row[lay.c[1]] = 2.0 * c.y;
        let (eq, eq_jac) = match self.norm {
            NormConstraint::Equality => (vec![norm_val], vec![norm_row]),
            NormConstraint::Relaxed => {
                ineq.push(norm_val);
                ineq_jac.push(norm_row);
                (Vec::new(), Vec::new())
            }
        };
        ResidualBlock {
            cols: lay.cols.clone(),
            ineq,
            ineq_jac,
            eq,
            eq_jac,
        }
    }

    /// Centroid of the obstacle members under a placement, used to aim the
    /// initial certificate direction.
    pub fn obstacle_centroid(&self, pose: &Pose2) -> Vec2 {
        let mut sum = Vec2::ZERO;
        for m in &self.obstacle {
            sum = sum
                + match m {
                    HullMember::Vertex(b) => *b,
                    HullMember::Ellipsoid(_) => Vec2::ZERO,
                };
        }
        pose.transform(sum / self.obstacle.len() as f64)
    }

    /// Initial certificate variables at a state guess: the direction points
    /// from the obstacle centroid toward the vehicle position, and
    /// `alpha`/`beta` take their defining values at that direction.
    pub fn initial_vars(
        &self,
        x_k: &CarState,
        x_k1: Option<&CarState>,
        pose_k: &Pose2,
        pose_k1: Option<&Pose2>,
    ) -> CertificateVars {
        let centroid = self.obstacle_centroid(pose_k);
        let c = (x_k.position() - centroid)
            .normalized()
            .unwrap_or(Vec2::new(1.0, 0.0));
        self.seed_vars_along(x_k, x_k1, pose_k, pose_k1, c)
    }

    /// Certificate variables for a fixed direction `c`: `alpha` and `beta`
    /// take the values that make their tightest member row active, which
    /// keeps every member row satisfied and concentrates any remaining
    /// violation in the gamma row.
    pub fn seed_vars_along(
        &self,
        x_k: &CarState,
        x_k1: Option<&CarState>,
        pose_k: &Pose2,
        pose_k1: Option<&Pose2>,
        c: Vec2,
    ) -> CertificateVars {
        let rot_k = Rot2::from_angle(x_k.psi);
        let mut alpha = self
            .vehicle
            .iter()
            .map(|m| vehicle_cost_term(m, rot_k, c, self.eps).value)
            .fold(f64::INFINITY, f64::min);
        let mut beta = self
            .obstacle
            .iter()
            .map(|m| obstacle_support_term(m, pose_k.rotation, c, self.eps).value)
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(x1) = x_k1 {
            let rot_k1 = Rot2::from_angle(x1.psi);
            let shift = c.dot(x1.position() - x_k.position());
            alpha = alpha.min(
                self.vehicle
                    .iter()
                    .map(|m| vehicle_cost_term(m, rot_k1, c, self.eps).value + shift)
                    .fold(f64::INFINITY, f64::min),
            );
        }
        if let Some(p1) = pose_k1 {
            let shift = c.dot(p1.translation - pose_k.translation);
            beta = beta.max(
                self.obstacle
                    .iter()
                    .map(|m| obstacle_support_term(m, p1.rotation, c, self.eps).value + shift)
                    .fold(f64::NEG_INFINITY, f64::max),
            );
        }
        CertificateVars { c, alpha, beta }
    }
}

/// Variable/constraint counts of this crate's certificate formulation next
/// to the classical dual-multiplier reformulation, per obstacle pairing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FormulationStats {
    pub ours_vars: usize,
    pub ours_cons: usize,
    /// Dual-reformulation counts; `None` where no published baseline exists
    /// (interval mode).
    pub dual_vars: Option<usize>,
    pub dual_cons: Option<usize>,
}

/// Shape family the counts are specialized to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeFamily {
    /// Vehicle with `n_a` vertices against an obstacle with `n_b` vertices,
    /// `m_a`/`m_b` faces.
    Polytope,
    /// Single-ellipsoid vehicle against a single-ellipsoid obstacle.
    Ellipsoid,
}

/// Added variables and constraints per obstacle pairing, excluding what the
/// trajectory problem already carries.
///
/// `n` is the ambient dimension. Interval-mode counts keep `beta` (the
/// general, moving-obstacle row structure); a static single-member obstacle
/// additionally drops `beta` and its rows.
pub fn formulation_stats(
    n: usize,
    n_a: usize,
    n_b: usize,
    m_a: usize,
    m_b: usize,
    mode: PlanningMode,
    family: ShapeFamily,
) -> FormulationStats {
    match (mode, family) {
        (PlanningMode::Discrete, ShapeFamily::Polytope) => FormulationStats {
            ours_vars: 2 + n,
            ours_cons: 2 + n_a + n_b,
            dual_vars: Some(m_a + m_b),
            dual_cons: Some(2 + n + m_a + m_b),
        },
        (PlanningMode::Discrete, ShapeFamily::Ellipsoid) => FormulationStats {
            ours_vars: n,
            ours_cons: 2,
            dual_vars: Some(2 * (n + 1)),
            dual_cons: Some(4 + n),
        },
        (PlanningMode::Continuous, ShapeFamily::Polytope) => FormulationStats {
            ours_vars: 2 + n,
            ours_cons: 2 + 2 * n_a + 2 * n_b,
            dual_vars: None,
            dual_cons: None,
        },
        (PlanningMode::Continuous, ShapeFamily::Ellipsoid) => FormulationStats {
            ours_vars: 2 + n,
            ours_cons: 6,
            dual_vars: None,
            dual_cons: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::PlacedShape;
    use crate::sdcalc::signed_distance;
    use crate::sweptfit::{DomainBox, RadiusModel};

    fn car_body() -> ConvexShape {
        ConvexShape::polytope(vec![
            Vec2::new(2.5, 1.0),
            Vec2::new(-2.5, 1.0),
            Vec2::new(-2.5, -1.0),
            Vec2::new(2.5, -1.0),
        ])
        .unwrap()
    }

    fn wall() -> ConvexShape {
        ConvexShape::polytope(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 45.0),
            Vec2::new(0.0, 45.0),
        ])
        .unwrap()
    }

    fn test_radius_model() -> RadiusModel {
        // A smooth nonzero bound for derivative tests.
        RadiusModel {
            degree: 2,
            domain: DomainBox {
                v_min: 0.0,
                v_max: 15.0,
                delta_min: -0.6,
                delta_max: 0.6,
            },
            coeffs: vec![0.3, 0.05, 0.02, 0.08, -0.01, 0.12],
        }
    }

    #[test]
    fn member_decomposition() {
        assert_eq!(hull_members(&car_body()).unwrap().len(), 4);
        let ball = ConvexShape::ball(0.5).unwrap();
        assert!(matches!(
            hull_members(&ball).unwrap()[0],
            HullMember::Ellipsoid(_)
        ));
        let mix = ConvexShape::hull(vec![car_body(), ball]).unwrap();
        assert_eq!(hull_members(&mix).unwrap().len(), 5);
        let inflated = ConvexShape::inflated(car_body(), 0.2).unwrap();
        assert_eq!(hull_members(&inflated), Err(CertifyError::UnsupportedShape));
    }

    #[test]
    fn discrete_polytope_counts() {
        let prob =
            CertProblem::new_discrete(&car_body(), &wall(), 0.0, NormConstraint::Equality).unwrap();
        assert_eq!(prob.var_count(), 4);
        assert_eq!(prob.row_counts(), (9, 1));
        assert_eq!(prob.cols().len(), 7);
        let x = CarState::new(10.0, 3.0, 0.2, 5.0, 0.0);
        let vars = prob.initial_vars(&x, None, &Pose2::IDENTITY, None);
        let block = prob.discrete_residuals(&x, &Pose2::IDENTITY, &vars);
        assert_eq!(block.ineq.len(), 9);
        assert_eq!(block.eq.len(), 1);
        assert_eq!(block.ineq_jac[0].len(), 7);
    }

    #[test]
    fn single_member_sides_eliminate_their_variable() {
        let disk = ConvexShape::ball(1.0).unwrap();
        let prob = CertProblem::new_discrete(&disk, &disk, 0.0, NormConstraint::Equality).unwrap();
        assert_eq!(prob.var_count(), 2);
        assert_eq!(prob.row_counts(), (1, 1));
        assert!(!prob.cols().contains(&CertCol::Alpha));
        assert!(!prob.cols().contains(&CertCol::Beta));
    }

    #[test]
    fn relaxed_norm_needs_positive_gamma() {
        let err = CertProblem::new_discrete(&car_body(), &wall(), 0.0, NormConstraint::Relaxed);
        assert!(matches!(
            err,
            Err(CertifyError::RelaxationNeedsPositiveGamma(_))
        ));
        let ok =
            CertProblem::new_discrete(&car_body(), &wall(), 0.1, NormConstraint::Relaxed).unwrap();
        // Relaxed norm is an inequality row, not an equality.
        assert_eq!(ok.row_counts(), (10, 0));
    }

    #[test]
    fn oracle_witness_satisfies_rows_and_gamma_row_reads_sd() {
        // For a separated pair, the oracle's witness direction with defining
        // alpha/beta values must satisfy every row, and the gamma row value
        // must equal gamma - sd.
        let x = CarState::new(10.0, 30.0, 0.35, 5.0, 0.0);
        let wall_pose = Pose2::new(50.0, 0.0, 0.0);
        let sd = signed_distance(
            &PlacedShape::new(car_body(), x.pose()),
            &PlacedShape::new(wall(), wall_pose),
        )
        .unwrap();
        let prob =
            CertProblem::new_discrete(&car_body(), &wall(), 0.0, NormConstraint::Equality).unwrap();
        let rot = Rot2::from_angle(x.psi);
        let c = sd.direction;
        let alpha = hull_members(&car_body())
            .unwrap()
            .iter()
            .map(|m| vehicle_cost_term(m, rot, c, prob.eps).value)
            .fold(f64::INFINITY, f64::min);
        let beta = hull_members(&wall())
            .unwrap()
            .iter()
            .map(|m| obstacle_support_term(m, wall_pose.rotation, c, prob.eps).value)
            .fold(f64::NEG_INFINITY, f64::max);
        let vars = CertificateVars { c, alpha, beta };
        let block = prob.discrete_residuals(&x, &wall_pose, &vars);
        assert!(block.max_ineq() <= 1e-8, "max row {}", block.max_ineq());
        assert!(block.max_eq_abs() <= 1e-8);
        let gamma_row = block.ineq[block.ineq.len() - 1];
        assert!(
            (gamma_row - (prob.gamma - sd.sd)).abs() <= 1e-8,
            "gamma row {} vs gamma - sd {}",
            gamma_row,
            prob.gamma - sd.sd
        );
    }

    fn check_block_jacobian(
        prob: &CertProblem,
        eval: &dyn Fn(&[f64]) -> ResidualBlock,
        z0: &[f64],
    ) {
        let block0 = eval(z0);
        let n = z0.len();
        let h = 1e-6;
        for col in 0..n {
            let mut zp = z0.to_vec();
            let mut zm = z0.to_vec();
            zp[col] += h;
            zm[col] -= h;
            let bp = eval(&zp);
            let bm = eval(&zm);
            for row in 0..block0.ineq.len() {
                let fd = (bp.ineq[row] - bm.ineq[row]) / (2.0 * h);
                let an = block0.ineq_jac[row][col];
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                    "ineq row {row} col {col} ({:?}): analytic {an} vs fd {fd}",
                    prob.cols()[col]
                );
            }
            for row in 0..block0.eq.len() {
                let fd = (bp.eq[row] - bm.eq[row]) / (2.0 * h);
                let an = block0.eq_jac[row][col];
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                    "eq row {row} col {col}: analytic {an} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn discrete_jacobian_matches_finite_differences() {
        let vehicle = ConvexShape::hull(vec![
            car_body(),
            ConvexShape::ellipsoid(SymMat2::new(2.0, 0.3, 1.0)).unwrap(),
        ])
        .unwrap();
        let obstacle = ConvexShape::hull(vec![wall(), ConvexShape::ball(0.8).unwrap()]).unwrap();
        let prob =
            CertProblem::new_discrete(&vehicle, &obstacle, 0.0, NormConstraint::Equality).unwrap();
        let pose = Pose2::new(30.0, 5.0, 0.4);
        // Pack (p_x, p_y, psi, c_x, c_y, alpha, beta) and perturb everything.
        let eval = |z: &[f64]| {
            let x = CarState::new(z[0], z[1], z[2], 5.0, 0.1);
            let vars = CertificateVars {
                c: Vec2::new(z[3], z[4]),
                alpha: z[5],
                beta: z[6],
            };
            prob.discrete_residuals(&x, &pose, &vars)
        };
        check_block_jacobian(&prob, &eval, &[4.0, 20.0, 0.3, 0.8, -0.6, -1.0, 2.0]);
    }

    #[test]
    fn continuous_jacobian_matches_finite_differences() {
        let prob =
            CertProblem::new_continuous(&car_body(), &wall(), 0.0, NormConstraint::Equality, true)
                .unwrap();
        let model = test_radius_model();
        let pose = Pose2::new(50.0, 0.0, 0.0);
        // Pack (x_k 5, x_k1 first 3, c 2, alpha, beta); v_{k+1}, delta_{k+1}
        // are absent from the layout because no row depends on them.
        let eval = |z: &[f64]| {
            let x_k = CarState::new(z[0], z[1], z[2], z[3], z[4]);
            let x_k1 = CarState::new(z[5], z[6], z[7], 9.0, -0.2);
            let vars = CertificateVars {
                c: Vec2::new(z[8], z[9]),
                alpha: z[10],
                beta: z[11],
            };
            prob.continuous_residuals(&x_k, &x_k1, &pose, &pose, 0.0, &model, &vars)
        };
        let z0 = [
            40.0, 24.0, 0.15, 8.0, 0.15, 47.0, 26.0, -0.1, -0.9, 0.3, -2.0, 51.0,
        ];
        check_block_jacobian(&prob, &eval, &z0);
    }

    #[test]
    fn continuous_counts_match_formulation_stats() {
        let prob =
            CertProblem::new_continuous(&car_body(), &wall(), 0.0, NormConstraint::Equality, true)
                .unwrap();
        let stats = formulation_stats(
            2,
            4,
            4,
            4,
            4,
            PlanningMode::Continuous,
            ShapeFamily::Polytope,
        );
        assert_eq!(prob.var_count(), stats.ours_vars);
        let (ineq, eq) = prob.row_counts();
        assert_eq!(ineq + eq, stats.ours_cons);
    }

    #[test]
    fn static_interval_rows_duplicate_obstacle_groups() {
        let prob =
            CertProblem::new_continuous(&car_body(), &wall(), 0.0, NormConstraint::Equality, true)
                .unwrap();
        let model = test_radius_model();
        let pose = Pose2::new(50.0, 0.0, 0.0);
        let x_k = CarState::new(40.0, 25.0, 0.1, 9.0, 0.05);
        let x_k1 = CarState::new(46.0, 26.0, -0.05, 9.5, 0.0);
        let vars = prob.initial_vars(&x_k, Some(&x_k1), &pose, Some(&pose));
        let block = prob.continuous_residuals(&x_k, &x_k1, &pose, &pose, 0.0, &model, &vars);
        let n_b = prob.n_obstacle_members();
        let first = 2 * prob.n_vehicle_members();
        for j in 0..n_b {
            assert!(
                (block.ineq[first + j] - block.ineq[first + n_b + j]).abs() < 1e-12,
                "static endpoint support rows must coincide"
            );
        }
    }

    #[test]
    fn pinned_formulation_counts() {
        let d = formulation_stats(2, 4, 4, 4, 4, PlanningMode::Discrete, ShapeFamily::Polytope);
        assert_eq!((d.ours_vars, d.ours_cons), (4, 10));
        assert_eq!((d.dual_vars, d.dual_cons), (Some(8), Some(12)));
        let e = formulation_stats(
            2,
            1,
            1,
            0,
            0,
            PlanningMode::Discrete,
            ShapeFamily::Ellipsoid,
        );
        assert_eq!((e.ours_vars, e.ours_cons), (2, 2));
        assert_eq!((e.dual_vars, e.dual_cons), (Some(6), Some(6)));
        let c = formulation_stats(
            2,
            4,
            4,
            4,
            4,
            PlanningMode::Continuous,
            ShapeFamily::Polytope,
        );
        assert_eq!((c.ours_vars, c.ours_cons), (4, 18));
        assert_eq!(c.dual_vars, None);
    }
}
