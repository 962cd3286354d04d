//! Swept-volume deviation radius: sampling and a one-sided polynomial bound.
//!
//! Over one zero-order-hold interval the vehicle body sweeps a region that
//! the convex hull of its two endpoint placements does not quite cover. The
//! deviation radius of the interval is the farthest any body vertex strays
//! from that hull along the fine flow. Inflating the hull by the radius
//! therefore covers the swept region.
//!
//! [`sample_radius`] measures the radius for one `(state, input)` pair;
//! [`generate_samples`] tabulates the worst case over an input grid for every
//! `(v, delta)` cell; [`fit_radius_model`] fits polynomial coefficients that
//! upper-bound every sample by solving a small linear program (minimize the
//! total overshoot subject to one-sidedness at the samples and nonnegativity
//! on a 21x21 domain grid).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_fine, CarInput, CarParams, CarState, DynamicsError};
use crate::geom::ConvexShape;
use crate::lp::{self, LpError};
use crate::sdcalc::{convex_hull_2d, distance_point_to_polygon};

/// Radii below this are treated as exactly zero when deciding whether a
/// sample set describes straight-line motion.
const ZERO_RADIUS_TOL: f64 = 1e-9;

/// Nonnegativity grid resolution per axis for the fit.
const NONNEG_GRID: usize = 21;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweptFitError {
    #[error("swept-volume sampling needs a polytope-like body shape")]
    PolytopeRequired,
    #[error("sampling grid is empty or degenerate")]
    EmptyGrid,
    #[error("fit needs at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("fit data contains a non-finite value")]
    NonFinite,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("radius fit LP failed: {0}")]
    Lp(#[from] LpError),
}

/// One measured deviation radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusSample {
    /// Speed at the start of the interval [m/s]
    pub v: f64,
    /// Steering angle at the start of the interval [rad]
    pub delta: f64,
    /// Input held over the interval (the worst case for this cell)
    pub input: CarInput,
    /// Measured deviation radius [m]
    pub radius: f64,
}

/// Rectangular `(v, delta)` domain of a fitted model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub v_min: f64,
    pub v_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl DomainBox {
    pub fn contains(&self, v: f64, delta: f64) -> bool {
        v >= self.v_min && v <= self.v_max && delta >= self.delta_min && delta <= self.delta_max
    }

    fn is_finite(&self) -> bool {
        [self.v_min, self.v_max, self.delta_min, self.delta_max]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Polynomial upper bound `r(v, delta)` on the deviation radius.
///
/// Coefficients multiply monomials of the domain-normalized coordinates
/// (each axis mapped to [-1, 1]), ordered by total degree and then by
/// descending speed exponent; see [`monomial_exponents`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusModel {
    pub degree: usize,
    pub domain: DomainBox,
    pub coeffs: Vec<f64>,
}

/// Model value and partial derivatives at a query point.
#[derive(Clone, Copy, Debug)]
pub struct RadiusEval {
    pub value: f64,
    pub dv: f64,
    pub ddelta: f64,
    /// True when the query was outside the domain and got clamped; the
    /// clamped coordinate then reports a zero partial derivative.
    pub clamped: bool,
}

impl RadiusModel {
    pub fn validate(&self) -> Result<(), SweptFitError> {
        if !self.domain.is_finite() || self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SweptFitError::NonFinite);
        }
        let need = monomial_exponents(self.degree).len();
        if self.coeffs.len() != need {
            return Err(SweptFitError::TooFewSamples {
                got: self.coeffs.len(),
                need,
            });
        }
        Ok(())
    }

    /// Evaluates the bound and its partials, clamping queries to the domain.
    pub fn eval(&self, v: f64, delta: f64) -> RadiusEval {
        let vc = v.clamp(self.domain.v_min, self.domain.v_max);
        let dc = delta.clamp(self.domain.delta_min, self.domain.delta_max);
        let clamped = vc != v || dc != delta;
        let (tv, sv) = normalize(vc, self.domain.v_min, self.domain.v_max);
        let (td, sd) = normalize(dc, self.domain.delta_min, self.domain.delta_max);
        let mut pow_v = vec![1.0f64; self.degree + 1];
        let mut pow_d = vec![1.0f64; self.degree + 1];
        for i in 1..=self.degree {
            pow_v[i] = pow_v[i - 1] * tv;
            pow_d[i] = pow_d[i - 1] * td;
        }
        let mut value = 0.0;
        let mut dtv = 0.0;
        let mut dtd = 0.0;
        for (&w, &(j, k)) in self.coeffs.iter().zip(&monomial_exponents(self.degree)) {
            value += w * pow_v[j] * pow_d[k];
            if j > 0 {
                dtv += w * j as f64 * pow_v[j - 1] * pow_d[k];
            }
            if k > 0 {
                dtd += w * k as f64 * pow_v[j] * pow_d[k - 1];
            }
        }
        RadiusEval {
            value,
            dv: if vc != v { 0.0 } else { dtv * sv },
            ddelta: if dc != delta { 0.0 } else { dtd * sd },
            clamped,
        }
    }
}

/// `(r, dr/dv, dr/ddelta)` of the fitted bound at `(v, delta)`.
pub fn eval_radius(model: &RadiusModel, v: f64, delta: f64) -> (f64, f64, f64) {
    let e = model.eval(v, delta);
    (e.value, e.dv, e.ddelta)
}

/// Exponent pairs `(j, k)` for `v^j delta^k`, total degree at most `degree`,
/// ordered by total degree then by descending `j`.
pub fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
    for t in 0..=degree {
        for j in (0..=t).rev() {
            out.push((j, t - j));
        }
    }
    out
}

/// Maps `x` in `[lo, hi]` to `[-1, 1]`; returns the value and its slope.
/// Degenerate (zero-width) axes map to 0 with zero slope.
fn normalize(x: f64, lo: f64, hi: f64) -> (f64, f64) {
    let width = hi - lo;
    if width <= 1e-12 {
        return (0.0, 0.0);
    }
    ((2.0 * x - lo - hi) / width, 2.0 / width)
}

/// Measures the deviation radius of one interval.
///
/// Simulates the fine flow with `m` substeps, builds the convex hull of the
/// endpoint body placements, and returns the farthest distance of any
/// intermediate body vertex from that hull.
pub fn sample_radius(
    x: &CarState,
    u: &CarInput,
    dt: f64,
    m: usize,
    body: &ConvexShape,
    car: &CarParams,
) -> Result<f64, SweptFitError> {
    let base = body.vertex_list().ok_or(SweptFitError::PolytopeRequired)?;
    let states = simulate_fine(x, u, dt, m, car)?;
    let first = states
        .first()
        .expect("simulate_fine returns endpoints")
        .pose();
    let last = states
        .last()
        .expect("simulate_fine returns endpoints")
        .pose();
    let mut endpoint_vertices = Vec::with_capacity(2 * base.len());
    endpoint_vertices.extend(base.iter().map(|v| first.transform(*v)));
    endpoint_vertices.extend(base.iter().map(|v| last.transform(*v)));
    let hull = convex_hull_2d(&endpoint_vertices);
    let mut r = 0.0f64;
    for s in &states {
        let pose = s.pose();
        for v in &base {
            r = r.max(distance_point_to_polygon(pose.transform(*v), &hull));
        }
    }
    Ok(r)
}

/// Grids and interval parameters for radius sampling.
#[derive(Clone, Debug)]
pub struct SamplingConfig {
    pub body: ConvexShape,
    pub car: CarParams,
    /// Interval length [s]
    pub dt: f64,
    /// Fine-flow substeps per interval
    pub substeps: usize,
    pub v_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
}

impl SamplingConfig {
    /// The grids used to train the shipped car model: speeds 0..15 in steps
    /// of 0.375, steering -0.6..0.6 in steps of 0.03, inputs over the corner
    /// and center values of their boxes, interval 10/13 s, 100 substeps.
    pub fn standard(body: ConvexShape) -> Self {
        SamplingConfig {
            body,
            car: CarParams::default(),
            dt: 10.0 / 13.0,
            substeps: 100,
            v_grid: linspace(0.0, 15.0, 41),
            delta_grid: linspace(-0.6, 0.6, 41),
            a_grid: vec![-4.0, 0.0, 4.0],
            s_grid: vec![-0.6, 0.0, 0.6],
        }
    }

    pub fn domain(&self) -> Result<DomainBox, SweptFitError> {
        if self.v_grid.is_empty() || self.delta_grid.is_empty() {
            return Err(SweptFitError::EmptyGrid);
        }
        let min = |g: &[f64]| g.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = |g: &[f64]| g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(DomainBox {
            v_min: min(&self.v_grid),
            v_max: max(&self.v_grid),
            delta_min: min(&self.delta_grid),
            delta_max: max(&self.delta_grid),
        })
    }
}

/// Evenly spaced grid including both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Tabulates the worst-case radius over the input grid for every
/// `(v, delta)` cell. Cells are independent, so they run in parallel;
/// the output order (speed-major) and values are deterministic.
pub fn generate_samples(cfg: &SamplingConfig) -> Result<Vec<RadiusSample>, SweptFitError> {
    if cfg.v_grid.is_empty()
        || cfg.delta_grid.is_empty()
        || cfg.a_grid.is_empty()
        || cfg.s_grid.is_empty()
    {
        return Err(SweptFitError::EmptyGrid);
    }
    if cfg.substeps == 0 || cfg.dt <= 0.0 || cfg.dt.is_nan() {
        return Err(SweptFitError::EmptyGrid);
    }
    let cells: Vec<(f64, f64)> = cfg
        .v_grid
        .iter()
        .flat_map(|&v| cfg.delta_grid.iter().map(move |&d| (v, d)))
        .collect();
    cells
        .par_iter()
        .map(|&(v, delta)| {
            let x = CarState::new(0.0, 0.0, 0.0, v, delta);
            let mut best = RadiusSample {
                v,
                delta,
                input: CarInput::new(cfg.a_grid[0], cfg.s_grid[0]),
                radius: f64::NEG_INFINITY,
            };
            for &a in &cfg.a_grid {
                for &s in &cfg.s_grid {
                    let u = CarInput::new(a, s);
                    let r = sample_radius(&x, &u, cfg.dt, cfg.substeps, &cfg.body, &cfg.car)?;
                    if r > best.radius {
                        best.radius = r;
                        best.input = u;
                    }
                }
            }
            Ok(best)
        })
        .collect()
}

/// Outcome of a fit, for reporting and contract tests.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub n_samples: usize,
    pub degree: usize,
    pub n_monomials: usize,
    /// Total overshoot of the bound over the samples (the LP objective).
    pub objective_residual: f64,
    /// Largest `sample - bound` gap; at most ~1e-9 for a sound fit.
    pub max_one_sided_violation: f64,
    /// True when all samples were zero and the fit short-circuited to the
    /// zero polynomial (minimal coefficient norm among optimal solutions).
    pub zero_model: bool,
    /// True when the LP basis was rank-deficient and recovery used a ridge.
    pub used_ridge: bool,
}

/// Fits the one-sided polynomial bound to measured radii.
///
/// Minimizes the total overshoot subject to the bound sitting above every
/// sample and being nonnegative on a uniform domain grid. All-zero sample
/// sets short-circuit to the zero polynomial.
pub fn fit_radius_model(
    samples: &[RadiusSample],
    degree: usize,
    domain: DomainBox,
) -> Result<(RadiusModel, FitReport), SweptFitError> {
    if !domain.is_finite()
        || samples
            .iter()
            .any(|s| !(s.v.is_finite() && s.delta.is_finite() && s.radius.is_finite()))
    {
        return Err(SweptFitError::NonFinite);
    }
    let exponents = monomial_exponents(degree);
    let n_mono = exponents.len();

    let max_radius = samples.iter().map(|s| s.radius).fold(0.0f64, f64::max);
    if !samples.is_empty() && max_radius <= ZERO_RADIUS_TOL {
        let model = RadiusModel {
            degree,
            domain,
            coeffs: vec![0.0; n_mono],
        };
        let report = FitReport {
            n_samples: samples.len(),
            degree,
            n_monomials: n_mono,
            objective_residual: -samples.iter().map(|s| s.radius).sum::<f64>(),
            max_one_sided_violation: max_radius,
            zero_model: true,
            used_ridge: false,
        };
        return Ok((model, report));
    }
    if samples.len() < n_mono {
        return Err(SweptFitError::TooFewSamples {
            got: samples.len(),
            need: n_mono,
        });
    }

    let features = |v: f64, d: f64| -> Vec<f64> {
        let (tv, _) = normalize(v, domain.v_min, domain.v_max);
        let (td, _) = normalize(d, domain.delta_min, domain.delta_max);
        exponents
            .iter()
            .map(|&(j, k)| tv.powi(j as i32) * td.powi(k as i32))
            .collect()
    };

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(samples.len() + NONNEG_GRID * NONNEG_GRID);
    let mut bounds: Vec<f64> = Vec::with_capacity(rows.capacity());
    let mut objective = vec![0.0f64; n_mono];
    for s in samples {
        let phi = features(s.v, s.delta);
        for (o, p) in objective.iter_mut().zip(&phi) {
            *o += p;
        }
        rows.push(phi);
        bounds.push(s.radius);
    }
    for v in linspace(domain.v_min, domain.v_max, NONNEG_GRID) {
        for d in linspace(domain.delta_min, domain.delta_max, NONNEG_GRID) {
            rows.push(features(v, d));
            bounds.push(0.0);
        }
    }

    let sol = lp::solve_one_sided(&rows, &bounds, &objective)?;
    let model = RadiusModel {
        degree,
        domain,
        coeffs: sol.w,
    };
    let mut max_violation = f64::NEG_INFINITY;
    let mut residual = 0.0;
    for s in samples {
        let q = model.eval(s.v, s.delta).value;
        max_violation = max_violation.max(s.radius - q);
        residual += q - s.radius;
    }
    // The report is recomputed through the model's own evaluation path; the
    // solver's self-reported numbers must agree with it. The solver minimizes
    // the plain prediction sum, which is the overshoot plus the constant
    // sample sum.
    let sample_sum: f64 = samples.iter().map(|s| s.radius).sum();
    debug_assert!(
        (sol.objective - sample_sum - residual).abs()
            <= 1e-6 * (1.0 + sample_sum.abs() + residual.abs()),
        "solver objective {} disagrees with recomputed residual {} + sample sum {}",
        sol.objective,
        residual,
        sample_sum
    );
    debug_assert!(
        max_violation <= sol.max_violation + 1e-6,
        "sample violation {} exceeds the solver's bound {}",
        max_violation,
        sol.max_violation
    );
    let report = FitReport {
        n_samples: samples.len(),
        degree,
        n_monomials: n_mono,
        objective_residual: residual,
        max_one_sided_violation: max_violation,
        zero_model: false,
        used_ridge: sol.used_ridge,
    };
    Ok((model, report))
}

/// Held-out validation of a fitted model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub n: usize,
    /// Samples whose measured radius exceeds the bound by more than `tol`.
    pub n_violations: usize,
    /// Largest `measured - bound` shortfall observed.
    pub max_shortfall: f64,
    pub tol: f64,
    /// True when, for every sample the bound covers, each fine-flow body
    /// vertex stayed within the bound's radius of the endpoint hull.
    pub containment_ok: bool,
}

/// Draws `n` random `(v, delta, a, s)` points inside the configured boxes,
/// measures their radii, and compares against the model.
pub fn holdout_check(
    model: &RadiusModel,
    cfg: &SamplingConfig,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<HoldoutReport, SweptFitError> {
    let domain = cfg.domain()?;
    let range = |g: &[f64]| {
        let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (a_lo, a_hi) = range(&cfg.a_grid);
    let (s_lo, s_hi) = range(&cfg.s_grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: f64, hi: f64| {
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            lo
        }
    };
    let base = cfg
        .body
        .vertex_list()
        .ok_or(SweptFitError::PolytopeRequired)?;
    let mut n_violations = 0usize;
    let mut max_shortfall = f64::NEG_INFINITY;
    let mut containment_ok = true;
    for _ in 0..n {
        let v = draw(domain.v_min, domain.v_max);
        let delta = draw(domain.delta_min, domain.delta_max);
        let a = draw(a_lo, a_hi);
        let s = draw(s_lo, s_hi);
        let x = CarState::new(0.0, 0.0, 0.0, v, delta);
        let u = CarInput::new(a, s);
        let measured = sample_radius(&x, &u, cfg.dt, cfg.substeps, &cfg.body, &cfg.car)?;
        let bound = model.eval(v, delta).value;
        let shortfall = measured - bound;
        max_shortfall = max_shortfall.max(shortfall);
        if shortfall > tol {
            n_violations += 1;
        }
        if shortfall <= 0.0 {
            // The bound covers this sample; restate the covering claim
            // vertex by vertex against the fine flow.
            let states = simulate_fine(&x, &u, cfg.dt, cfg.substeps, &cfg.car)?;
            let first = states.first().expect("endpoints present").pose();
            let last = states.last().expect("endpoints present").pose();
            let mut endpoint_vertices = Vec::with_capacity(2 * base.len());
            endpoint_vertices.extend(base.iter().map(|p| first.transform(*p)));
            endpoint_vertices.extend(base.iter().map(|p| last.transform(*p)));
            let hull = convex_hull_2d(&endpoint_vertices);
            for st in &states {
                let pose = st.pose();
                for p in &base {
                    if distance_point_to_polygon(pose.transform(*p), &hull) > bound + 1e-9 {
                        containment_ok = false;
                    }
                }
            }
        }
    }
    Ok(HoldoutReport {
        n,
        n_violations,
        max_shortfall,
        tol,
        containment_ok,
    })
}
