//! Kinematic car model and fixed-step integrators.
//!
//! State is `(p_x, p_y, psi, v, delta)`: planar position of the rear axle,
//! heading, forward speed, and steering angle. Inputs are `(a, s)`:
//! acceleration and steering rate. The continuous-time model is
//!
//! ```text
//! d/dt (p_x, p_y, psi, v, delta) = (v cos psi, v sin psi, v tan(delta)/L, a, s)
//! ```
//!
//! Discretization is classic fourth-order Runge-Kutta with zero-order-hold
//! inputs, with exact step Jacobians obtained by differentiating the stage
//! recursion.

use crate::geom::{ConvexShape, PlacedShape, Pose2, Vec2};

/// Errors from dynamics evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("steering angle {0} leaves the model's domain (|delta| < pi/2)")]
    SteeringOutOfRange(f64),
    #[error("substep count must be at least 1")]
    NoSubsteps,
    #[error("state or input contains a non-finite value")]
    NonFinite,
}

/// Car state `(p_x, p_y, psi, v, delta)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CarState {
    /// Position x [m]
    pub p_x: f64,
    /// Position y [m]
    pub p_y: f64,
    /// Heading [rad]
    pub psi: f64,
    /// Forward speed [m/s]
    pub v: f64,
    /// Steering angle [rad]
    pub delta: f64,
}

impl CarState {
    pub fn new(p_x: f64, p_y: f64, psi: f64, v: f64, delta: f64) -> Self {
        CarState {
            p_x,
            p_y,
            psi,
            v,
            delta,
        }
    }

    #[inline]
    pub fn to_array(self) -> [f64; 5] {
        [self.p_x, self.p_y, self.psi, self.v, self.delta]
    }

    #[inline]
    pub fn from_array(a: [f64; 5]) -> Self {
        CarState::new(a[0], a[1], a[2], a[3], a[4])
    }

    #[inline]
    pub fn position(self) -> Vec2 {
        Vec2::new(self.p_x, self.p_y)
    }

    /// Rigid placement of the vehicle body frame.
    #[inline]
    pub fn pose(self) -> Pose2 {
        Pose2::new(self.p_x, self.p_y, self.psi)
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Car input `(a, s)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CarInput {
    /// Acceleration [m/s^2]
    pub a: f64,
    /// Steering rate [rad/s]
    pub s: f64,
}

impl CarInput {
    pub const ZERO: CarInput = CarInput { a: 0.0, s: 0.0 };

    pub fn new(a: f64, s: f64) -> Self {
        CarInput { a, s }
    }

    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.s.is_finite()
    }
}

/// Car geometry parameters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CarParams {
    /// Wheelbase length [m]
    pub wheelbase: f64,
}

impl Default for CarParams {
    fn default() -> Self {
        CarParams { wheelbase: 2.7 }
    }
}

/// State time derivative of the kinematic car.
pub fn car_derivative(
    x: &CarState,
    u: &CarInput,
    p: &CarParams,
) -> Result<CarState, DynamicsError> {
    if !x.is_finite() || !u.is_finite() {
        return Err(DynamicsError::NonFinite);
    }
    if x.delta.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(DynamicsError::SteeringOutOfRange(x.delta));
    }
    Ok(CarState::new(
        x.v * x.psi.cos(),
        x.v * x.psi.sin(),
        x.v * x.delta.tan() / p.wheelbase,
        u.a,
        u.s,
    ))
}

type Mat5 = [[f64; 5]; 5];
type Mat5x2 = [[f64; 2]; 5];

const ZERO5: Mat5 = [[0.0; 5]; 5];
const ZERO5X2: Mat5x2 = [[0.0; 2]; 5];

fn identity5() -> Mat5 {
    let mut m = ZERO5;
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn mat5_mul(a: &Mat5, b: &Mat5) -> Mat5 {
    let mut out = ZERO5;
    for i in 0..5 {
        for k in 0..5 {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..5 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn mat5_mul_5x2(a: &Mat5, b: &Mat5x2) -> Mat5x2 {
    let mut out = ZERO5X2;
    for i in 0..5 {
        for k in 0..5 {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..2 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn mat5_axpy(out: &mut Mat5, k: f64, a: &Mat5) {
    for i in 0..5 {
        for j in 0..5 {
            out[i][j] += k * a[i][j];
        }
    }
}

fn mat5x2_axpy(out: &mut Mat5x2, k: f64, a: &Mat5x2) {
    for i in 0..5 {
        for j in 0..2 {
            out[i][j] += k * a[i][j];
        }
    }
}

/// `df/dx` of the continuous-time model at `(x, u)`.
fn derivative_state_jacobian(x: &CarState, p: &CarParams) -> Mat5 {
    let mut a = ZERO5;
    let (sin_psi, cos_psi) = x.psi.sin_cos();
    let cos_delta = x.delta.cos();
    a[0][2] = -x.v * sin_psi;
    a[0][3] = cos_psi;
    a[1][2] = x.v * cos_psi;
    a[1][3] = sin_psi;
    a[2][3] = x.delta.tan() / p.wheelbase;
    a[2][4] = x.v / (p.wheelbase * cos_delta * cos_delta);
    a
}

/// `df/du` of the continuous-time model (constant).
fn derivative_input_jacobian() -> Mat5x2 {
    let mut b = ZERO5X2;
    b[3][0] = 1.0;
    b[4][1] = 1.0;
    b
}

fn state_axpy(x: &CarState, k: f64, rate: &CarState) -> CarState {
    CarState::new(
        x.p_x + k * rate.p_x,
        x.p_y + k * rate.p_y,
        x.psi + k * rate.psi,
        x.v + k * rate.v,
        x.delta + k * rate.delta,
    )
}

/// One RK4 step of length `dt` under zero-order-hold input.
pub fn rk4_step(
    x: &CarState,
    u: &CarInput,
    dt: f64,
    p: &CarParams,
) -> Result<CarState, DynamicsError> {
    let k1 = car_derivative(x, u, p)?;
    let k2 = car_derivative(&state_axpy(x, 0.5 * dt, &k1), u, p)?;
    let k3 = car_derivative(&state_axpy(x, 0.5 * dt, &k2), u, p)?;
    let k4 = car_derivative(&state_axpy(x, dt, &k3), u, p)?;
    let mut out = state_axpy(x, dt / 6.0, &k1);
    out = state_axpy(&out, dt / 3.0, &k2);
    out = state_axpy(&out, dt / 3.0, &k3);
    out = state_axpy(&out, dt / 6.0, &k4);
    Ok(out)
}

/// RK4 step together with its exact Jacobians `(x+, dx+/dx, dx+/du)`.
///
/// The Jacobians differentiate the discrete step itself (stage chain rule),
/// not the continuous-time model, so finite differences of [`rk4_step`]
/// reproduce them to rounding error.
pub fn rk4_step_with_jacobian(
    x: &CarState,
    u: &CarInput,
    dt: f64,
    p: &CarParams,
) -> Result<(CarState, Mat5, Mat5x2), DynamicsError> {
    let b = derivative_input_jacobian();

    let k1 = car_derivative(x, u, p)?;
    let a1 = derivative_state_jacobian(x, p);
    let d1x = a1;
    let d1u = b;

    let x2 = state_axpy(x, 0.5 * dt, &k1);
    let k2 = car_derivative(&x2, u, p)?;
    let a2 = derivative_state_jacobian(&x2, p);
    let mut s2 = identity5();
    mat5_axpy(&mut s2, 0.5 * dt, &d1x);
    let d2x = mat5_mul(&a2, &s2);
    let mut t2 = ZERO5X2;
    mat5x2_axpy(&mut t2, 0.5 * dt, &d1u);
    let mut d2u = mat5_mul_5x2(&a2, &t2);
    mat5x2_axpy(&mut d2u, 1.0, &b);

    let x3 = state_axpy(x, 0.5 * dt, &k2);
    let k3 = car_derivative(&x3, u, p)?;
    let a3 = derivative_state_jacobian(&x3, p);
    let mut s3 = identity5();
    mat5_axpy(&mut s3, 0.5 * dt, &d2x);
    let d3x = mat5_mul(&a3, &s3);
    let mut t3 = ZERO5X2;
    mat5x2_axpy(&mut t3, 0.5 * dt, &d2u);
    let mut d3u = mat5_mul_5x2(&a3, &t3);
    mat5x2_axpy(&mut d3u, 1.0, &b);

    let x4 = state_axpy(x, dt, &k3);
    let k4 = car_derivative(&x4, u, p)?;
    let a4 = derivative_state_jacobian(&x4, p);
    let mut s4 = identity5();
    mat5_axpy(&mut s4, dt, &d3x);
    let d4x = mat5_mul(&a4, &s4);
    let mut t4 = ZERO5X2;
    mat5x2_axpy(&mut t4, dt, &d3u);
    let mut d4u = mat5_mul_5x2(&a4, &t4);
    mat5x2_axpy(&mut d4u, 1.0, &b);

    let mut out = state_axpy(x, dt / 6.0, &k1);
    out = state_axpy(&out, dt / 3.0, &k2);
    out = state_axpy(&out, dt / 3.0, &k3);
    out = state_axpy(&out, dt / 6.0, &k4);

    let mut jx = identity5();
    mat5_axpy(&mut jx, dt / 6.0, &d1x);
    mat5_axpy(&mut jx, dt / 3.0, &d2x);
    mat5_axpy(&mut jx, dt / 3.0, &d3x);
    mat5_axpy(&mut jx, dt / 6.0, &d4x);

    let mut ju = ZERO5X2;
    mat5x2_axpy(&mut ju, dt / 6.0, &d1u);
    mat5x2_axpy(&mut ju, dt / 3.0, &d2u);
    mat5x2_axpy(&mut ju, dt / 3.0, &d3u);
    mat5x2_axpy(&mut ju, dt / 6.0, &d4u);

    Ok((out, jx, ju))
}

/// Simulates one zero-order-hold interval with `m` RK4 substeps.
///
/// Returns the `m + 1` states including both endpoints. This is the fine
/// flow used as ground truth for swept-volume sampling and audits.
pub fn simulate_fine(
    x: &CarState,
    u: &CarInput,
    dt: f64,
    m: usize,
    p: &CarParams,
) -> Result<Vec<CarState>, DynamicsError> {
    if m == 0 {
        return Err(DynamicsError::NoSubsteps);
    }
    let h = dt / m as f64;
    let mut states = Vec::with_capacity(m + 1);
    states.push(*x);
    let mut cur = *x;
    for _ in 0..m {
        cur = rk4_step(&cur, u, h, p)?;
        states.push(cur);
    }
    Ok(states)
}

/// Places the vehicle body shape at the state's pose.
pub fn vehicle_shape(x: &CarState, body: &ConvexShape) -> PlacedShape {
    PlacedShape::new(body.clone(), x.pose())
}
