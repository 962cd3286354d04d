//! Scenario description, direct transcription, and trajectory audits.
//!
//! A [`Scenario`] (deserialized from JSON) describes one planning task:
//! start and goal states, horizon, vehicle body, obstacles, bounds, and the
//! clearance target. [`build_ocp`] transcribes it by multiple shooting into
//! a block-sparse [`NlpProblem`]:
//!
//! * decision vector `z = [x_0..x_N | u_0..u_{N-1} | certificates]`,
//! * equality rows pin the start and goal poses, tie consecutive states
//!   through exact RK4 defects, and hold certificate directions on the unit
//!   circle,
//! * inequality rows are the per-knot (or per-interval) collision
//!   certificates from [`crate::certify`],
//! * speed, steering, and input limits become variable bounds.
//!
//! [`audit_trajectory`] re-checks a solved plan against the independent
//! signed-distance oracle on a fine time grid, so certificate claims are
//! validated by machinery that shares no code with the residuals.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{
    CertCol, CertProblem, CertificateVars, CertifyError, NormConstraint, ObstacleSpec, PlanningMode,
};
use crate::dynamics::{
    rk4_step_with_jacobian, simulate_fine, vehicle_shape, CarInput, CarParams, CarState,
    DynamicsError,
};
use crate::geom::{ConvexShape, GeomError, PlacedShape, Pose2, Vec2};
use crate::nlp::{self, Block, BlockRef, NlpError, NlpProblem, SolveReport, SolverOptions};
use crate::sdcalc::{signed_distance, signed_distance_of_hulls};
use crate::sweptfit::RadiusModel;

#[derive(Debug, thiserror::Error)]
pub enum TranscribeError {
    #[error("scenario: {0}")]
    Schema(String),
    #[error("continuous mode requires a deviation-radius model")]
    MissingRadiusModel,
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
}

/// Supported scenario file schema version.
pub const SCENARIO_SCHEMA: u32 = 1;

/// One planning task, as stored in a scenario JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub mode: PlanningMode,
    /// Unit-circle handling for certificate directions.
    #[serde(default = "default_norm")]
    pub norm: NormConstraint,
    /// Start state `(p_x, p_y, psi, v, delta)`; only the pose is pinned.
    pub start: [f64; 5],
    /// Goal state; only the pose is pinned.
    pub goal: [f64; 5],
    /// Horizon length [s].
    pub t_f: f64,
    /// Number of shooting intervals.
    pub n: usize,
    /// Clearance target [m]; certificates enforce `sd >= gamma`.
    pub gamma: f64,
    pub car: CarParams,
    pub vehicle_shape: ConvexShape,
    pub obstacles: Vec<ScenarioObstacle>,
    pub bounds: Bounds,
}

fn default_norm() -> NormConstraint {
    NormConstraint::Equality
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioObstacle {
    pub shape: ConvexShape,
    pub pose: PoseSpec,
    /// Sweep slack margin [m] added to interval certificates.
    #[serde(default)]
    pub w: f64,
}

impl ScenarioObstacle {
    pub fn to_spec(&self) -> ObstacleSpec {
        ObstacleSpec::fixed(self.shape.clone(), self.pose.to_pose(), self.w)
    }
}

/// Obstacle placement in the world frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PoseSpec {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub psi: f64,
}

impl PoseSpec {
    pub fn to_pose(self) -> Pose2 {
        Pose2::new(self.x, self.y, self.psi)
    }
}

/// Box limits on speed, inputs, and steering angle, each as `[lo, hi]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Bounds {
    pub v: [f64; 2],
    pub a: [f64; 2],
    pub s: [f64; 2],
    pub delta: [f64; 2],
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, TranscribeError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| TranscribeError::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Shooting interval length [s].
    pub fn dt(&self) -> f64 {
        self.t_f / self.n as f64
    }

    pub fn validate(&self) -> Result<(), TranscribeError> {
        let fail = |msg: String| Err(TranscribeError::Schema(msg));
        if self.schema != SCENARIO_SCHEMA {
            return fail(format!(
                "schema {} not supported (expected {SCENARIO_SCHEMA})",
                self.schema
            ));
        }
        if self.n < 1 {
            return fail("need at least one shooting interval".into());
        }
        if !(self.t_f > 0.0 && self.t_f.is_finite()) {
            return fail(format!("horizon t_f = {} must be positive", self.t_f));
        }
        if !(self.car.wheelbase > 0.0 && self.car.wheelbase.is_finite()) {
            return fail(format!("wheelbase {} must be positive", self.car.wheelbase));
        }
        if self.start.iter().chain(&self.goal).any(|v| !v.is_finite()) || !self.gamma.is_finite() {
            return fail("start, goal, and gamma must be finite".into());
        }
        for (name, [lo, hi]) in [
            ("v", self.bounds.v),
            ("a", self.bounds.a),
            ("s", self.bounds.s),
            ("delta", self.bounds.delta),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return fail(format!(
                    "bound {name} = [{lo}, {hi}] must be a finite interval"
                ));
            }
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        if self.bounds.delta[0] <= -half_pi || self.bounds.delta[1] >= half_pi {
            return fail("steering bounds must stay inside (-pi/2, pi/2)".into());
        }
        self.vehicle_shape.validate()?;
        for (i, obs) in self.obstacles.iter().enumerate() {
            obs.shape.validate()?;
            if !(obs.w >= 0.0 && obs.w.is_finite()) {
                return fail(format!(
                    "obstacle {i}: sweep slack w = {} must be >= 0",
                    obs.w
                ));
            }
            if !(obs.pose.x.is_finite() && obs.pose.y.is_finite() && obs.pose.psi.is_finite()) {
                return fail(format!("obstacle {i}: pose must be finite"));
            }
        }
        Ok(())
    }
}

/// Column layout of the transcription's decision vector.
#[derive(Clone, Debug)]
pub struct VarLayout {
    /// `N + 1` knot states.
    pub n_knots: usize,
    /// `N` shooting intervals.
    pub n_intervals: usize,
    /// Certificate slots per obstacle: knots in discrete mode, intervals in
    /// continuous mode.
    pub n_cert_slots: usize,
    pub n_z: usize,
    input_offset: usize,
    cert_offset: Vec<usize>,
    cert_width: Vec<usize>,
}

impl VarLayout {
    pub fn state_col(&self, k: usize, i: usize) -> usize {
        debug_assert!(k < self.n_knots && i < 5);
        5 * k + i
    }

    pub fn input_col(&self, k: usize, i: usize) -> usize {
        debug_assert!(k < self.n_intervals && i < 2);
        self.input_offset + 2 * k + i
    }

    /// First column of the certificate variables for `(obstacle, slot)`.
    pub fn cert_start(&self, obstacle: usize, slot: usize) -> usize {
        debug_assert!(slot < self.n_cert_slots);
        self.cert_offset[obstacle] + slot * self.cert_width[obstacle]
    }

    pub fn cert_width(&self, obstacle: usize) -> usize {
        self.cert_width[obstacle]
    }
}

/// A transcribed scenario, ready to solve.
pub struct Ocp {
    pub problem: NlpProblem,
    pub layout: VarLayout,
    pub templates: Vec<CertProblem>,
    pub scenario: Scenario,
    pub dt: f64,
}

fn unpack_cert_vars(cols: &[CertCol], zb: &[f64]) -> (CarState, CarState, CertificateVars) {
    let mut xk = [0.0; 5];
    let mut xk1 = [0.0; 5];
    let mut c = [0.0; 2];
    let mut alpha = 0.0;
    let mut beta = 0.0;
    for (val, col) in zb.iter().zip(cols) {
        match col {
            CertCol::StateK(i) => xk[*i] = *val,
            CertCol::StateK1(i) => xk1[*i] = *val,
            CertCol::C(i) => c[*i] = *val,
            CertCol::Alpha => alpha = *val,
            CertCol::Beta => beta = *val,
        }
    }
    (
        CarState::from_array(xk),
        CarState::from_array(xk1),
        CertificateVars {
            c: Vec2::new(c[0], c[1]),
            alpha,
            beta,
        },
    )
}

/// Transcribes a scenario into a block-sparse NLP.
///
/// Continuous mode needs the fitted deviation-radius model; discrete mode
/// ignores it.
pub fn build_ocp(
    scenario: &Scenario,
    radius_model: Option<&RadiusModel>,
) -> Result<Ocp, TranscribeError> {
    scenario.validate()?;
    let n = scenario.n;
    let dt = scenario.dt();
    let car = scenario.car;
    let radius = match (scenario.mode, radius_model) {
        (PlanningMode::Continuous, None) => return Err(TranscribeError::MissingRadiusModel),
        (_, m) => m.cloned().map(Arc::new),
    };

    let mut templates = Vec::with_capacity(scenario.obstacles.len());
    for obs in &scenario.obstacles {
        let t = match scenario.mode {
            PlanningMode::Discrete => CertProblem::new_discrete(
                &scenario.vehicle_shape,
                &obs.shape,
                scenario.gamma,
                scenario.norm,
            )?,
            PlanningMode::Continuous => CertProblem::new_continuous(
                &scenario.vehicle_shape,
                &obs.shape,
                scenario.gamma,
                scenario.norm,
                true,
            )?,
        };
        templates.push(t);
    }

    let n_cert_slots = match scenario.mode {
        PlanningMode::Discrete => n + 1,
        PlanningMode::Continuous => n,
    };
    let input_offset = 5 * (n + 1);
    let mut next = input_offset + 2 * n;
    let mut cert_offset = Vec::with_capacity(templates.len());
    let mut cert_width = Vec::with_capacity(templates.len());
    for t in &templates {
        cert_offset.push(next);
        cert_width.push(t.var_count());
        next += n_cert_slots * t.var_count();
    }
    let layout = VarLayout {
        n_knots: n + 1,
        n_intervals: n,
        n_cert_slots,
        n_z: next,
        input_offset,
        cert_offset,
        cert_width,
    };

    let n_z = layout.n_z;
    let (in_off, n_inputs) = (layout.input_offset, 2 * n);
    let mut problem = NlpProblem::new(n_z, move |z: &[f64]| {
        let mut f = 0.0;
        let mut grad = vec![0.0; n_z];
        for j in in_off..in_off + n_inputs {
            f += z[j] * z[j];
            grad[j] = 2.0 * z[j];
        }
        (f, grad)
    });

    for k in 0..layout.n_knots {
        problem.lower[layout.state_col(k, 3)] = scenario.bounds.v[0];
        problem.upper[layout.state_col(k, 3)] = scenario.bounds.v[1];
        problem.lower[layout.state_col(k, 4)] = scenario.bounds.delta[0];
        problem.upper[layout.state_col(k, 4)] = scenario.bounds.delta[1];
    }
    for k in 0..layout.n_intervals {
        problem.lower[layout.input_col(k, 0)] = scenario.bounds.a[0];
        problem.upper[layout.input_col(k, 0)] = scenario.bounds.a[1];
        problem.lower[layout.input_col(k, 1)] = scenario.bounds.s[0];
        problem.upper[layout.input_col(k, 1)] = scenario.bounds.s[1];
    }

    // Start and goal pin the pose components only; speed and steering at the
    // endpoints stay free inside their bounds.
    for (name, knot, target) in [
        ("pin_start", 0usize, scenario.start),
        ("pin_goal", n, scenario.goal),
    ] {
        let cols: Vec<usize> = (0..3).map(|i| layout.state_col(knot, i)).collect();
        let pin = [target[0], target[1], target[2]];
        problem.eq_blocks.push(Block::new(name, cols, 3, move |zb| {
            let vals = (0..3).map(|i| zb[i] - pin[i]).collect();
            let jac = (0..3)
                .map(|r| (0..3).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
                .collect();
            (vals, jac)
        }));
    }

    // Shooting defects, scaled by 1/dt so their magnitude reads as a state
    // rate and stays comparable to the other rows.
    for k in 0..n {
        let mut cols: Vec<usize> = (0..5).map(|i| layout.state_col(k, i)).collect();
        cols.extend((0..2).map(|i| layout.input_col(k, i)));
        cols.extend((0..5).map(|i| layout.state_col(k + 1, i)));
        problem
            .eq_blocks
            .push(Block::new(format!("defect[{k}]"), cols, 5, move |zb| {
                let x = CarState::new(zb[0], zb[1], zb[2], zb[3], zb[4]);
                let u = CarInput::new(zb[5], zb[6]);
                match rk4_step_with_jacobian(&x, &u, dt, &car) {
                    Ok((xn, jx, ju)) => {
                        let xn = xn.to_array();
                        let vals = (0..5).map(|i| (xn[i] - zb[7 + i]) / dt).collect();
                        let jac = (0..5)
                            .map(|r| {
                                let mut row = Vec::with_capacity(12);
                                row.extend(jx[r].iter().map(|v| v / dt));
                                row.extend(ju[r].iter().map(|v| v / dt));
                                for c in 0..5 {
                                    row.push(if r == c { -1.0 / dt } else { 0.0 });
                                }
                                row
                            })
                            .collect();
                        (vals, jac)
                    }
                    // Out-of-domain states surface as a named non-finite
                    // evaluation instead of a panic.
                    Err(_) => (vec![f64::NAN; 5], vec![vec![f64::NAN; 12]; 5]),
                }
            }));
    }

    let specs: Vec<ObstacleSpec> = scenario.obstacles.iter().map(|o| o.to_spec()).collect();
    let mut cert_block_refs: Vec<(BlockRef, Option<BlockRef>)> =
        Vec::with_capacity(specs.len() * layout.n_cert_slots);
    for (o, (spec, template)) in specs.iter().zip(&templates).enumerate() {
        let (n_ineq, n_eq) = template.row_counts();
        for slot in 0..layout.n_cert_slots {
            let cert_start = layout.cert_start(o, slot);
            let has_alpha = template.has_alpha();
            let cols: Vec<usize> = template
                .cols()
                .iter()
                .map(|c| match c {
                    CertCol::StateK(i) => layout.state_col(slot, *i),
                    CertCol::StateK1(i) => layout.state_col(slot + 1, *i),
                    CertCol::C(i) => cert_start + i,
                    CertCol::Alpha => cert_start + 2,
                    CertCol::Beta => cert_start + 2 + usize::from(has_alpha),
                })
                .collect();
            let eval = {
                let template = template.clone();
                let pose_k = spec.pose_at(slot);
                let pose_k1 = spec.pose_at(slot + 1);
                let w = spec.w;
                let radius = radius.clone();
                move |zb: &[f64]| {
                    let (xk, xk1, vars) = unpack_cert_vars(template.cols(), zb);
                    match template.mode {
                        PlanningMode::Discrete => template.discrete_residuals(&xk, &pose_k, &vars),
                        PlanningMode::Continuous => template.continuous_residuals(
                            &xk,
                            &xk1,
                            &pose_k,
                            &pose_k1,
                            w,
                            radius.as_deref().expect("radius model checked at build"),
                            &vars,
                        ),
                    }
                }
            };
            let ineq_eval = eval.clone();
            let ineq_ref = BlockRef::Ineq(problem.ineq_blocks.len());
            problem.ineq_blocks.push(Block::new(
                format!("cert[o{o},k{slot}]"),
                cols.clone(),
                n_ineq,
                move |zb| {
                    let b = ineq_eval(zb);
                    (b.ineq, b.ineq_jac)
                },
            ));
            let eq_ref = if n_eq > 0 {
                let r = BlockRef::Eq(problem.eq_blocks.len());
                problem.eq_blocks.push(Block::new(
                    format!("norm[o{o},k{slot}]"),
                    cols,
                    n_eq,
                    move |zb| {
                        let b = eval(zb);
                        (b.eq, b.eq_jac)
                    },
                ));
                Some(r)
            } else {
                None
            };
            cert_block_refs.push((ineq_ref, eq_ref));
        }
    }

    for j in in_off..in_off + n_inputs {
        problem.objective_hess_diag[j] = 2.0;
    }

    // A certificate direction near zero length sits at a stationary point of
    // the penalized subproblem where the unit-norm row has no gradient, and
    // the row that pushes states away from the obstacle loses its lever arm
    // with it. The repair hook pulls such directions back to the unit circle
    // between outer passes, re-seeding the slot's scale variables for the
    // recovered direction and invalidating its multiplier estimates.
    if !specs.is_empty() {
        let repair_layout = layout.clone();
        let repair_templates = templates.clone();
        let repair_specs = specs.clone();
        let mode = scenario.mode;
        problem.repair = Some(Box::new(move |z: &mut [f64]| {
            let mut stale = Vec::new();
            for (o, (spec, template)) in repair_specs.iter().zip(&repair_templates).enumerate() {
                for slot in 0..repair_layout.n_cert_slots {
                    let base = repair_layout.cert_start(o, slot);
                    let c = Vec2::new(z[base], z[base + 1]);
                    let len = c.norm();
                    if len >= 0.5 {
                        continue;
                    }
                    let state_at = |k: usize| {
                        CarState::new(
                            z[repair_layout.state_col(k, 0)],
                            z[repair_layout.state_col(k, 1)],
                            z[repair_layout.state_col(k, 2)],
                            z[repair_layout.state_col(k, 3)],
                            z[repair_layout.state_col(k, 4)],
                        )
                    };
                    let x_k = state_at(slot);
                    let pose_k = spec.pose_at(slot);
                    let (x_k1, pose_k1) = match mode {
                        PlanningMode::Discrete => (None, None),
                        PlanningMode::Continuous => {
                            (Some(state_at(slot + 1)), Some(spec.pose_at(slot + 1)))
                        }
                    };
                    let anchor = match &x_k1 {
                        Some(x1) => (x_k.position() + x1.position()) / 2.0,
                        None => x_k.position(),
                    };
                    let dir = match c.normalized() {
                        Some(d) if len > 1e-3 => d,
                        _ => (anchor - template.obstacle_centroid(&pose_k))
                            .normalized()
                            .unwrap_or(Vec2::new(1.0, 0.0)),
                    };
                    let vars = template.seed_vars_along(
                        &x_k,
                        x_k1.as_ref(),
                        &pose_k,
                        pose_k1.as_ref(),
                        dir,
                    );
                    z[base] = vars.c.x;
                    z[base + 1] = vars.c.y;
                    let mut at = base + 2;
                    if template.has_alpha() {
                        z[at] = vars.alpha;
                        at += 1;
                    }
                    if template.has_beta() {
                        z[at] = vars.beta;
                    }
                    let idx = o * repair_layout.n_cert_slots + slot;
                    stale.push(cert_block_refs[idx].0);
                    if let Some(r) = cert_block_refs[idx].1 {
                        stale.push(r);
                    }
                }
            }
            stale
        }));
    }

    Ok(Ocp {
        problem,
        layout,
        templates,
        scenario: scenario.clone(),
        dt,
    })
}

impl Ocp {
    /// Straight-line warm start: poses interpolate start to goal, speed is
    /// the average required, inputs are zero, and each certificate starts at
    /// its aimed initial value.
    pub fn initial_guess(&self) -> Vec<f64> {
        let s = &self.scenario;
        let n = self.layout.n_intervals;
        let start = CarState::from_array(s.start);
        let goal = CarState::from_array(s.goal);
        let dist = (goal.position() - start.position()).norm();
        let v_guess = (dist / s.t_f).clamp(s.bounds.v[0], s.bounds.v[1]);
        let mut z = vec![0.0; self.layout.n_z];
        let mut states = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let tau = k as f64 / n as f64;
            let x = CarState::new(
                start.p_x + tau * (goal.p_x - start.p_x),
                start.p_y + tau * (goal.p_y - start.p_y),
                start.psi + tau * (goal.psi - start.psi),
                v_guess,
                0.0_f64.clamp(s.bounds.delta[0], s.bounds.delta[1]),
            );
            for (i, v) in x.to_array().into_iter().enumerate() {
                z[self.layout.state_col(k, i)] = v;
            }
            states.push(x);
        }
        // Inputs stay zero; zero is always inside the shipped bounds, and
        // the projection in the solver covers the general case.
        for (o, template) in self.templates.iter().enumerate() {
            for slot in 0..self.layout.n_cert_slots {
                let spec = self.scenario.obstacles[o].to_spec();
                let (x_k1, pose_k1) = match template.mode {
                    PlanningMode::Discrete => (None, None),
                    PlanningMode::Continuous => {
                        (Some(&states[slot + 1]), Some(spec.pose_at(slot + 1)))
                    }
                };
                let vars = template.initial_vars(
                    &states[slot],
                    x_k1,
                    &spec.pose_at(slot),
                    pose_k1.as_ref(),
                );
                let base = self.layout.cert_start(o, slot);
                z[base] = vars.c.x;
                z[base + 1] = vars.c.y;
                let mut at = base + 2;
                if template.has_alpha() {
                    z[at] = vars.alpha;
                    at += 1;
                }
                if template.has_beta() {
                    z[at] = vars.beta;
                }
            }
        }
        z
    }

    pub fn decode_trajectory(&self, z: &[f64]) -> Trajectory {
        let mut states = Vec::with_capacity(self.layout.n_knots);
        for k in 0..self.layout.n_knots {
            states.push(CarState::new(
                z[self.layout.state_col(k, 0)],
                z[self.layout.state_col(k, 1)],
                z[self.layout.state_col(k, 2)],
                z[self.layout.state_col(k, 3)],
                z[self.layout.state_col(k, 4)],
            ));
        }
        let mut inputs = Vec::with_capacity(self.layout.n_intervals);
        for k in 0..self.layout.n_intervals {
            inputs.push(CarInput::new(
                z[self.layout.input_col(k, 0)],
                z[self.layout.input_col(k, 1)],
            ));
        }
        Trajectory {
            dt: self.dt,
            states,
            inputs,
        }
    }

    /// Certificate variables per obstacle and slot.
    pub fn decode_certs(&self, z: &[f64]) -> Vec<Vec<CertificateVars>> {
        self.templates
            .iter()
            .enumerate()
            .map(|(o, template)| {
                (0..self.layout.n_cert_slots)
                    .map(|slot| {
                        let base = self.layout.cert_start(o, slot);
                        let c = Vec2::new(z[base], z[base + 1]);
                        let mut at = base + 2;
                        let alpha = if template.has_alpha() {
                            at += 1;
                            z[at - 1]
                        } else {
                            0.0
                        };
                        let beta = if template.has_beta() { z[at] } else { 0.0 };
                        CertificateVars { c, alpha, beta }
                    })
                    .collect()
            })
            .collect()
    }

    /// `(certificate variables, certificate rows)` added per obstacle slot.
    pub fn cert_bookkeeping(&self, obstacle: usize) -> (usize, usize) {
        let t = &self.templates[obstacle];
        let (ineq, eq) = t.row_counts();
        (t.var_count(), ineq + eq)
    }
}

/// Result of one scenario solve.
pub struct PlanResult {
    pub z: Vec<f64>,
    pub report: SolveReport,
    pub trajectory: Trajectory,
}

/// Builds, warm-starts, and solves a scenario.
pub fn solve_scenario(
    scenario: &Scenario,
    radius_model: Option<&RadiusModel>,
    opts: &SolverOptions,
) -> Result<(Ocp, PlanResult), TranscribeError> {
    let ocp = build_ocp(scenario, radius_model)?;
    let z0 = ocp.initial_guess();
    let (z, report) = nlp::solve(&ocp.problem, &z0, opts)?;
    let trajectory = ocp.decode_trajectory(&z);
    Ok((
        ocp,
        PlanResult {
            z,
            report,
            trajectory,
        },
    ))
}

/// A knot-point trajectory with zero-order-hold inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    /// Interval length [s].
    pub dt: f64,
    pub states: Vec<CarState>,
    pub inputs: Vec<CarInput>,
}

impl Trajectory {
    /// Sum of squared inputs, the transcription objective.
    pub fn input_cost(&self) -> f64 {
        self.inputs.iter().map(|u| u.a * u.a + u.s * u.s).sum()
    }

    /// Renders `k,t,p_x,p_y,psi,v,delta,a,s` rows at nine significant
    /// digits. The final knot has no input; its input cells stay empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t,p_x,p_y,psi,v,delta,a,s\n");
        for (k, x) in self.states.iter().enumerate() {
            let t = self.dt * k as f64;
            let (a, s) = match self.inputs.get(k) {
                Some(u) => (fmt_sig(u.a, 9), fmt_sig(u.s, 9)),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{k},{},{},{},{},{},{},{a},{s}\n",
                fmt_sig(t, 9),
                fmt_sig(x.p_x, 9),
                fmt_sig(x.p_y, 9),
                fmt_sig(x.psi, 9),
                fmt_sig(x.v, 9),
                fmt_sig(x.delta, 9),
            ));
        }
        out
    }
}

/// Formats `x` with `sig` significant digits, like C's `%.{sig}g`: fixed
/// notation for moderate magnitudes, exponent notation otherwise, trailing
/// zeros trimmed.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mant, exp) = sci.split_once('e').expect("exponent formatting");
    let exp: i32 = exp.parse().expect("numeric exponent");
    if exp < -4 || exp >= sig as i32 {
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}e{exp}")
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    }
}

/// Signed distance of one fine-grid pose to the nearest obstacle.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AuditRow {
    /// Shooting interval the pose belongs to.
    pub interval: usize,
    /// Substep index within the interval, `0..=substeps`.
    pub pose_index: usize,
    /// Reference-point x position of the pose [m].
    pub p_x: f64,
    /// Reference-point y position of the pose [m].
    pub p_y: f64,
    /// Minimum signed distance over all obstacles [m].
    pub sd: f64,
}

/// Oracle-based re-check of a solved trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    /// Per interval: signed distance from the hull of the two endpoint body
    /// placements to the nearest obstacle [m].
    pub interval_hull_sd: Vec<f64>,
    /// Smallest fine-grid signed distance; `None` without obstacles.
    pub min_fine_sd: Option<f64>,
    /// Smallest endpoint-hull signed distance; `None` without obstacles.
    pub min_hull_sd: Option<f64>,
}

/// Flows each interval's dynamics on a fine grid and measures true signed
/// distances with the scan-based oracle.
///
/// This is the independent check of what the certificates promised: in
/// discrete mode only knots are certified, so interior rows may dip
/// negative; in continuous mode every row should clear `gamma` up to the
/// fitted bound's conservatism.
pub fn audit_trajectory(
    scenario: &Scenario,
    traj: &Trajectory,
    substeps: usize,
) -> Result<AuditReport, TranscribeError> {
    if traj.states.len() != scenario.n + 1 || traj.inputs.len() != scenario.n {
        return Err(TranscribeError::Schema(format!(
            "trajectory has {} states and {} inputs for n = {}",
            traj.states.len(),
            traj.inputs.len(),
            scenario.n
        )));
    }
    let placed_obstacles: Vec<PlacedShape> = scenario
        .obstacles
        .iter()
        .map(|o| PlacedShape::new(o.shape.clone(), o.pose.to_pose()))
        .collect();
    let per_interval: Vec<(Vec<AuditRow>, f64)> = (0..scenario.n)
        .into_par_iter()
        .map(|k| -> Result<(Vec<AuditRow>, f64), TranscribeError> {
            let fine = simulate_fine(
                &traj.states[k],
                &traj.inputs[k],
                traj.dt,
                substeps,
                &scenario.car,
            )?;
            let mut rows = Vec::with_capacity(fine.len());
            for (j, x) in fine.iter().enumerate() {
                let body = vehicle_shape(x, &scenario.vehicle_shape);
                let mut sd = f64::INFINITY;
                for obs in &placed_obstacles {
                    sd = sd.min(signed_distance(&body, obs)?.sd);
                }
                rows.push(AuditRow {
                    interval: k,
                    pose_index: j,
                    p_x: x.p_x,
                    p_y: x.p_y,
                    sd,
                });
            }
            let endpoints = [
                vehicle_shape(&traj.states[k], &scenario.vehicle_shape),
                vehicle_shape(&traj.states[k + 1], &scenario.vehicle_shape),
            ];
            let mut hull_sd = f64::INFINITY;
            for obs in &placed_obstacles {
                hull_sd = hull_sd
                    .min(signed_distance_of_hulls(&endpoints, std::slice::from_ref(obs))?.sd);
            }
            Ok((rows, hull_sd))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut interval_hull_sd = Vec::with_capacity(scenario.n);
    for (r, h) in per_interval {
        rows.extend(r);
        interval_hull_sd.push(h);
    }
    let (min_fine_sd, min_hull_sd) = if placed_obstacles.is_empty() {
        (None, None)
    } else {
        (
            rows.iter().map(|r| r.sd).reduce(f64::min),
            interval_hull_sd.iter().cloned().reduce(f64::min),
        )
    };
    Ok(AuditReport {
        rows,
        interval_hull_sd,
        min_fine_sd,
        min_hull_sd,
    })
}

/// Renders audit rows as `interval,pose_index,sd` CSV.
pub fn audit_to_csv(report: &AuditReport) -> String {
    let mut out = String::from("interval,pose_index,sd\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.interval,
            r.pose_index,
            fmt_sig(r.sd, 9)
        ));
    }
    out
}
