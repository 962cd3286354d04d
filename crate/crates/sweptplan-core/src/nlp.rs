//! Sparse-block nonlinear programming with an augmented-Lagrangian solver.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    f(z)
//! subject to  h(z)  = 0        (equality blocks)
//!             g(z) <= 0        (inequality blocks)
//!             lower <= z <= upper
//! ```
//!
//! Constraints are grouped into [`Block`]s, each owning a short list of
//! global column indices and a closure that evaluates its residual rows and
//! their dense Jacobian with respect to those columns only. The solver never
//! forms a full Jacobian; gradients accumulate block by block.
//!
//! The solve is a classic double loop. The outer augmented-Lagrangian pass
//! updates multipliers only when the iterate meets a tightening feasibility
//! target, and raises the penalty weight otherwise. The inner pass minimizes
//! the smooth penalized objective under the box bounds with a damped
//! Gauss-Newton step: the Gauss-Newton Hessian of the penalty terms is
//! assembled from the same block Jacobians, so the step stays well scaled
//! even at large penalty weights, and a Levenberg-Marquardt damping with a
//! projected backtracking acceptance rule guards the nonconvex directions.
//! Everything is plain `f64` arithmetic in a fixed order, so repeated solves
//! of the same problem produce bit-identical iterates.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NlpError {
    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),
    #[error("{0}")]
    BadProblem(String),
}

type BlockEval = Box<dyn Fn(&[f64]) -> (Vec<f64>, Vec<Vec<f64>>) + Send + Sync>;
type ObjectiveEval = Box<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>;

/// One group of constraint rows coupled to a few variables.
///
/// `eval` receives the gathered values of `cols` (in order) and returns the
/// row values plus the Jacobian as one dense row per constraint.
pub struct Block {
    pub name: String,
    pub cols: Vec<usize>,
    pub n_rows: usize,
    pub eval: BlockEval,
}

impl Block {
    pub fn new(
        name: impl Into<String>,
        cols: Vec<usize>,
        n_rows: usize,
        eval: impl Fn(&[f64]) -> (Vec<f64>, Vec<Vec<f64>>) + Send + Sync + 'static,
    ) -> Self {
        Block {
            name: name.into(),
            cols,
            n_rows,
            eval: Box::new(eval),
        }
    }

    fn gather(&self, z: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|&j| z[j]).collect()
    }

    fn evaluate(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), NlpError> {
        let (vals, jac) = (self.eval)(&self.gather(z));
        if vals.len() != self.n_rows || jac.len() != self.n_rows {
            return Err(NlpError::BadProblem(format!(
                "block {} returned {} rows, declared {}",
                self.name,
                vals.len(),
                self.n_rows
            )));
        }
        for (v, row) in vals.iter().zip(&jac) {
            if !v.is_finite() || row.len() != self.cols.len() || row.iter().any(|e| !e.is_finite())
            {
                return Err(NlpError::NonFinite(self.name.clone()));
            }
        }
        Ok((vals, jac))
    }
}

/// Reference to one constraint block by side and position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockRef {
    Eq(usize),
    Ineq(usize),
}

type RepairFn = Box<dyn Fn(&mut [f64]) -> Vec<BlockRef> + Send + Sync>;

/// A box-bounded NLP with block-sparse constraints.
pub struct NlpProblem {
    pub n: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: ObjectiveEval,
    /// Known diagonal of the objective Hessian (zeros when unknown). Exact
    /// entries sharpen the inner quadratic model; missing curvature is
    /// covered by damping.
    pub objective_hess_diag: Vec<f64>,
    pub eq_blocks: Vec<Block>,
    pub ineq_blocks: Vec<Block>,
    /// Optional iterate re-seeding hook, run between outer passes. It may
    /// rewrite variables in place to pull the iterate off a degenerate
    /// stationary point, and returns the blocks whose multiplier estimates
    /// the rewrite invalidated. Hooks must be deterministic functions of the
    /// iterate.
    pub repair: Option<RepairFn>,
}

impl NlpProblem {
    pub fn new(
        n: usize,
        objective: impl Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static,
    ) -> Self {
        NlpProblem {
            n,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            objective: Box::new(objective),
            objective_hess_diag: vec![0.0; n],
            eq_blocks: Vec::new(),
            ineq_blocks: Vec::new(),
            repair: None,
        }
    }

    pub fn n_eq_rows(&self) -> usize {
        self.eq_blocks.iter().map(|b| b.n_rows).sum()
    }

    pub fn n_ineq_rows(&self) -> usize {
        self.ineq_blocks.iter().map(|b| b.n_rows).sum()
    }

    fn validate(&self, z0: &[f64]) -> Result<(), NlpError> {
        if z0.len() != self.n || self.lower.len() != self.n || self.upper.len() != self.n {
            return Err(NlpError::BadProblem(format!(
                "dimension mismatch: n = {}, z0 = {}, bounds = {}/{}",
                self.n,
                z0.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo > hi {
                return Err(NlpError::BadProblem(format!(
                    "empty bound interval on variable {i}: [{lo}, {hi}]"
                )));
            }
        }
        for b in self.eq_blocks.iter().chain(&self.ineq_blocks) {
            if let Some(&j) = b.cols.iter().find(|&&j| j >= self.n) {
                return Err(NlpError::BadProblem(format!(
                    "block {} references column {j}, but n = {}",
                    b.name, self.n
                )));
            }
        }
        Ok(())
    }

    fn objective_at(&self, z: &[f64]) -> Result<(f64, Vec<f64>), NlpError> {
        let (f, grad) = (self.objective)(z);
        if !f.is_finite() || grad.len() != self.n || grad.iter().any(|g| !g.is_finite()) {
            return Err(NlpError::NonFinite("objective".into()));
        }
        Ok((f, grad))
    }

    /// Raw constraint values at `z`: `(h, g, max violation)`.
    pub fn constraint_values(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64), NlpError> {
        let mut h = Vec::with_capacity(self.n_eq_rows());
        let mut g = Vec::with_capacity(self.n_ineq_rows());
        for b in &self.eq_blocks {
            h.extend(b.evaluate(z)?.0);
        }
        for b in &self.ineq_blocks {
            g.extend(b.evaluate(z)?.0);
        }
        let viol = h
            .iter()
            .map(|v| v.abs())
            .chain(g.iter().map(|v| v.max(0.0)))
            .fold(0.0, f64::max);
        Ok((h, g, viol))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverOptions {
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub tol_feas: f64,
    pub tol_kkt: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Print one outer-iteration summary line per pass to stderr.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rho0: 10.0,
            rho_growth: 10.0,
            rho_max: 1e10,
            tol_feas: 1e-6,
            tol_kkt: 1e-6,
            max_outer: 50,
            max_inner: 500,
            trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    /// Feasible to `tol_feas` and stationary to `tol_kkt`.
    Optimal,
    /// Outer iteration budget exhausted.
    MaxIterations,
    /// Penalty weight at its cap without feasibility progress.
    Stalled,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Raw objective `f` at the returned point.
    pub objective: f64,
    /// Largest constraint violation at the returned point.
    pub max_violation: f64,
    /// Infinity norm of the projected augmented-Lagrangian gradient.
    pub stationarity: f64,
    pub rho: f64,
}

const ARMIJO_C1: f64 = 1e-4;

fn clip(z: f64, lo: f64, hi: f64) -> f64 {
    z.max(lo).min(hi)
}

fn project(z: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((z, &lo), &hi) in z.iter_mut().zip(lower).zip(upper) {
        *z = clip(*z, lo, hi);
    }
}

fn projected_gradient_norm(z: &[f64], grad: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..z.len() {
        let step = z[i] - clip(z[i] - grad[i], lower[i], upper[i]);
        worst = worst.max(step.abs());
    }
    worst
}

/// Augmented-Lagrangian value and gradient at `z` for fixed multipliers.
fn al_eval(
    prob: &NlpProblem,
    z: &[f64],
    lam: &[f64],
    mu: &[f64],
    rho: f64,
) -> Result<(f64, Vec<f64>), NlpError> {
    let (f, mut grad) = prob.objective_at(z)?;
    let mut val = f;
    let mut eq_row = 0;
    for b in &prob.eq_blocks {
        let (vals, jac) = b.evaluate(z)?;
        for (r, hv) in vals.iter().enumerate() {
            let l = lam[eq_row + r];
            val += l * hv + 0.5 * rho * hv * hv;
            let w = l + rho * hv;
            for (j, &col) in b.cols.iter().enumerate() {
                grad[col] += w * jac[r][j];
            }
        }
        eq_row += b.n_rows;
    }
    let mut ineq_row = 0;
    for b in &prob.ineq_blocks {
        let (vals, jac) = b.evaluate(z)?;
        for (r, gv) in vals.iter().enumerate() {
            let m = mu[ineq_row + r];
            let t = m + rho * gv;
            if t > 0.0 {
                val += (t * t - m * m) / (2.0 * rho);
                for (j, &col) in b.cols.iter().enumerate() {
                    grad[col] += t * jac[r][j];
                }
            } else {
                val -= m * m / (2.0 * rho);
            }
        }
        ineq_row += b.n_rows;
    }
    if !val.is_finite() {
        return Err(NlpError::NonFinite("augmented Lagrangian".into()));
    }
    Ok((val, grad))
}

/// Augmented-Lagrangian value, gradient, and Gauss-Newton Hessian at `z`.
///
/// The Hessian keeps the exact `rho J' J` curvature of every penalized row
/// (equality rows always, inequality rows while active) plus the declared
/// objective diagonal, and drops the multiplier-weighted constraint
/// curvature; damping in the step computation covers the difference. Only
/// the lower triangle is stored, row `i` holding columns `0..=i`.
struct AlSystem {
    val: f64,
    grad: Vec<f64>,
    hess_lower: Vec<Vec<f64>>,
}

fn al_assemble(
    prob: &NlpProblem,
    z: &[f64],
    lam: &[f64],
    mu: &[f64],
    rho: f64,
) -> Result<AlSystem, NlpError> {
    let n = prob.n;
    let (f, mut grad) = prob.objective_at(z)?;
    let mut val = f;
    let mut hess_lower: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; i + 1];
            row[i] = prob.objective_hess_diag[i].max(0.0);
            row
        })
        .collect();
    fn add_row(
        row_weight_grad: f64,
        gn_weight: f64,
        cols: &[usize],
        jac_row: &[f64],
        grad: &mut [f64],
        hess_lower: &mut [Vec<f64>],
    ) {
        for (a, &ca) in cols.iter().enumerate() {
            grad[ca] += row_weight_grad * jac_row[a];
            for (b, &cb) in cols.iter().enumerate().take(a + 1) {
                let (hi, lo) = if ca >= cb { (ca, cb) } else { (cb, ca) };
                hess_lower[hi][lo] += gn_weight * jac_row[a] * jac_row[b];
            }
        }
    }
    let mut eq_row = 0;
    for b in &prob.eq_blocks {
        let (vals, jac) = b.evaluate(z)?;
        for (r, hv) in vals.iter().enumerate() {
            let l = lam[eq_row + r];
            val += l * hv + 0.5 * rho * hv * hv;
            add_row(
                l + rho * hv,
                rho,
                &b.cols,
                &jac[r],
                &mut grad,
                &mut hess_lower,
            );
        }
        eq_row += b.n_rows;
    }
    let mut ineq_row = 0;
    for b in &prob.ineq_blocks {
        let (vals, jac) = b.evaluate(z)?;
        for (r, gv) in vals.iter().enumerate() {
            let m = mu[ineq_row + r];
            let t = m + rho * gv;
            if t > 0.0 {
                val += (t * t - m * m) / (2.0 * rho);
                add_row(t, rho, &b.cols, &jac[r], &mut grad, &mut hess_lower);
            } else {
                val -= m * m / (2.0 * rho);
            }
        }
        ineq_row += b.n_rows;
    }
    if !val.is_finite() {
        return Err(NlpError::NonFinite("augmented Lagrangian".into()));
    }
    Ok(AlSystem {
        val,
        grad,
        hess_lower,
    })
}

/// Cholesky factor of `H + nu * diag(d)` from the lower triangle, in place.
fn cholesky_factor(hess_lower: &[Vec<f64>], nu: f64, d: &[f64]) -> Option<Vec<Vec<f64>>> {
    let n = hess_lower.len();
    let mut l = hess_lower.to_vec();
    for i in 0..n {
        l[i][i] += nu * d[i];
    }
    for j in 0..n {
        let mut diag = l[j][j];
        for &ljk in &l[j][..j] {
            diag -= ljk * ljk;
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let root = diag.sqrt();
        l[j][j] = root;
        for i in j + 1..n {
            let mut v = l[i][j];
            for (&lik, &ljk) in l[i][..j].iter().zip(&l[j][..j]) {
                v -= lik * ljk;
            }
            l[i][j] = v / root;
        }
    }
    Some(l)
}

/// Solves `L L' p = -grad` given the Cholesky factor `L`.
fn cholesky_solve(l: &[Vec<f64>], grad: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut acc = -grad[i];
        for k in 0..i {
            acc -= l[i][k] * y[k];
        }
        y[i] = acc / l[i][i];
    }
    let mut p = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for k in i + 1..n {
            acc -= l[k][i] * p[k];
        }
        p[i] = acc / l[i][i];
    }
    p
}

struct InnerResult {
    z: Vec<f64>,
    pg_norm: f64,
    iters: usize,
}

const DAMPING_INIT: f64 = 1e-4;
const DAMPING_MIN: f64 = 1e-10;
const DAMPING_SHRINK: f64 = 0.35;
const DAMPING_GROW: f64 = 30.0;
const DAMPING_MAX: f64 = 1e16;
const LINE_SEARCH_STEPS: usize = 30;

/// Minimizes the augmented Lagrangian over the box to tolerance `omega`.
///
/// Each iteration solves the damped Gauss-Newton system for a direction and
/// finds the step length by a projected backtracking line search with
/// quadratic interpolation; the damping only grows when a whole direction
/// fails, so a good direction with the wrong natural length costs one or two
/// extra evaluations instead of a refactorization.
fn inner_minimize(
    prob: &NlpProblem,
    z0: Vec<f64>,
    lam: &[f64],
    mu: &[f64],
    rho: f64,
    omega: f64,
    max_inner: usize,
) -> Result<InnerResult, NlpError> {
    let n = prob.n;
    let mut z = z0;
    project(&mut z, &prob.lower, &prob.upper);
    let mut sys = al_assemble(prob, &z, lam, mu, rho)?;
    let mut nu = DAMPING_INIT;
    let mut iters = 0;
    while iters < max_inner {
        let pg = projected_gradient_norm(&z, &sys.grad, &prob.lower, &prob.upper);
        if pg <= omega {
            return Ok(InnerResult {
                z,
                pg_norm: pg,
                iters,
            });
        }
        iters += 1;
        // Marquardt scaling: damp each variable relative to its own
        // curvature so ill-scaled problems still take balanced steps.
        let d: Vec<f64> = (0..n).map(|i| sys.hess_lower[i][i].max(1.0)).collect();
        let mut moved = false;
        while nu <= DAMPING_MAX {
            let Some(l) = cholesky_factor(&sys.hess_lower, nu, &d) else {
                nu *= DAMPING_GROW;
                continue;
            };
            let p = cholesky_solve(&l, &sys.grad);
            let mut t = 1.0f64;
            let mut z_try = z.clone();
            let mut accepted_t = None;
            for _ in 0..LINE_SEARCH_STEPS {
                for i in 0..n {
                    z_try[i] = clip(z[i] + t * p[i], prob.lower[i], prob.upper[i]);
                }
                let pred: f64 = sys
                    .grad
                    .iter()
                    .zip(&z_try)
                    .zip(&z)
                    .map(|((g, zt), zo)| g * (zt - zo))
                    .sum();
                if pred >= 0.0 {
                    // The projection bent the step uphill; shorten and retry.
                    t *= 0.5;
                    continue;
                }
                let (val_try, _) = al_eval(prob, &z_try, lam, mu, rho)?;
                if val_try <= sys.val + ARMIJO_C1 * pred {
                    accepted_t = Some(t);
                    break;
                }
                // Minimize the quadratic through (0, val), slope pred/t, and
                // (t, val_try); the denominator is positive whenever the
                // sufficient-decrease test just failed.
                let denom = 2.0 * (val_try - sys.val - pred);
                let t_quad = if denom > 0.0 {
                    -pred * t / denom
                } else {
                    0.5 * t
                };
                t = t_quad.clamp(0.05 * t, 0.5 * t);
            }
            if let Some(t) = accepted_t {
                z = z_try;
                if t >= 0.99 {
                    nu = (nu * DAMPING_SHRINK).max(DAMPING_MIN);
                } else if t < 1e-2 {
                    nu *= DAMPING_GROW;
                }
                moved = true;
                break;
            }
            nu *= DAMPING_GROW;
        }
        if !moved {
            // Even a heavily damped direction gives no decrease; report
            // where the iteration stands and let the outer loop react.
            return Ok(InnerResult {
                pg_norm: projected_gradient_norm(&z, &sys.grad, &prob.lower, &prob.upper),
                z,
                iters,
            });
        }
        sys = al_assemble(prob, &z, lam, mu, rho)?;
        if std::env::var("SWEPTPLAN_INNER_TRACE").is_ok() && iters % 25 == 0 {
            let pg = projected_gradient_norm(&z, &sys.grad, &prob.lower, &prob.upper);
            eprintln!(
                "  inner {iters:4}: val {:+.9e} pg {:9.2e} nu {:8.1e}",
                sys.val, pg, nu
            );
        }
    }
    let pg = projected_gradient_norm(&z, &sys.grad, &prob.lower, &prob.upper);
    Ok(InnerResult {
        z,
        pg_norm: pg,
        iters,
    })
}

/// Row offsets of each block within the stacked multiplier vector.
fn block_offsets(blocks: &[Block]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut acc = 0;
    for b in blocks {
        offsets.push(acc);
        acc += b.n_rows;
    }
    offsets
}

/// Solves the problem from `z0`. Non-optimal exits still return the best
/// iterate along with its report; `Err` is reserved for structural problems
/// and non-finite evaluations.
pub fn solve(
    prob: &NlpProblem,
    z0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport), NlpError> {
    prob.validate(z0)?;
    let mut z = z0.to_vec();
    project(&mut z, &prob.lower, &prob.upper);
    let mut lam = vec![0.0; prob.n_eq_rows()];
    let mut mu = vec![0.0; prob.n_ineq_rows()];
    let eq_offsets = block_offsets(&prob.eq_blocks);
    let ineq_offsets = block_offsets(&prob.ineq_blocks);
    let mut rho = opts.rho0;
    // Multipliers update only when the violation meets `eta`; otherwise the
    // penalty weight grows. Both targets tighten as the solve progresses.
    let mut eta = 1.0f64.max(opts.tol_feas);
    let mut omega = 1e-2f64.max(opts.tol_kkt);
    let mut prev_viol = f64::INFINITY;
    let mut capped_stall = 0usize;
    let mut inner_total = 0usize;
    let mut last_pg = f64::INFINITY;
    for outer in 1..=opts.max_outer {
        let inner = inner_minimize(prob, z, &lam, &mu, rho, omega, opts.max_inner)?;
        z = inner.z;
        last_pg = inner.pg_norm;
        inner_total += inner.iters;
        let (h, g, viol) = prob.constraint_values(&z)?;
        if opts.trace {
            eprintln!(
                "outer {outer:3}: rho {rho:8.1e} eta {eta:8.1e} omega {omega:8.1e} \
                 viol {viol:9.2e} pg {:9.2e} inner {:4}",
                last_pg, inner.iters
            );
        }
        if viol <= opts.tol_feas && last_pg <= opts.tol_kkt {
            let (f, _) = prob.objective_at(&z)?;
            return Ok((
                z,
                SolveReport {
                    status: SolveStatus::Optimal,
                    outer_iters: outer,
                    inner_iters: inner_total,
                    objective: f,
                    max_violation: viol,
                    stationarity: last_pg,
                    rho,
                },
            ));
        }
        if let Some(repair) = &prob.repair {
            let stale = repair(&mut z);
            if !stale.is_empty() {
                for r in &stale {
                    match *r {
                        BlockRef::Eq(i) => {
                            let lo = eq_offsets[i];
                            lam[lo..lo + prob.eq_blocks[i].n_rows].fill(0.0);
                        }
                        BlockRef::Ineq(i) => {
                            let lo = ineq_offsets[i];
                            mu[lo..lo + prob.ineq_blocks[i].n_rows].fill(0.0);
                        }
                    }
                }
                if opts.trace {
                    eprintln!("outer {outer:3}: re-seeded {} blocks", stale.len());
                }
                // The iterate moved; measure progress afresh next pass.
                prev_viol = f64::INFINITY;
                capped_stall = 0;
                continue;
            }
        }
        if viol <= eta {
            for (l, hv) in lam.iter_mut().zip(&h) {
                *l += rho * hv;
            }
            for (m, gv) in mu.iter_mut().zip(&g) {
                *m = (*m + rho * gv).max(0.0);
            }
            eta = (eta * 0.2).max(opts.tol_feas);
            omega = (omega * 0.2).max(opts.tol_kkt * 0.3);
            capped_stall = 0;
        } else if rho >= opts.rho_max {
            capped_stall += 1;
            if capped_stall >= 5 && viol > 0.25 * prev_viol {
                let (f, _) = prob.objective_at(&z)?;
                return Ok((
                    z,
                    SolveReport {
                        status: SolveStatus::Stalled,
                        outer_iters: outer,
                        inner_iters: inner_total,
                        objective: f,
                        max_violation: viol,
                        stationarity: last_pg,
                        rho,
                    },
                ));
            }
        } else {
            rho = (rho * opts.rho_growth).min(opts.rho_max);
        }
        prev_viol = prev_viol.min(viol);
    }
    let (_, _, viol) = prob.constraint_values(&z)?;
    let (f, _) = prob.objective_at(&z)?;
    Ok((
        z,
        SolveReport {
            status: SolveStatus::MaxIterations,
            outer_iters: opts.max_outer,
            inner_iters: inner_total,
            objective: f,
            max_violation: viol,
            stationarity: last_pg,
            rho,
        },
    ))
}

/// Worst finite-difference mismatch of one block (or the objective).
#[derive(Clone, Debug)]
pub struct GradAudit {
    pub block: String,
    /// Largest `|analytic - central difference|` over rows and columns.
    pub worst_abs: f64,
    /// The same mismatch scaled by `max(1, |analytic|)`.
    pub worst_rel: f64,
    pub row: usize,
    pub col: usize,
}

/// Compares every declared derivative against central differences at `z`.
///
/// Results come back in declaration order: objective, equality blocks, then
/// inequality blocks. The audit is read-only and works on any point where
/// the evaluations are finite.
pub fn check_gradients(prob: &NlpProblem, z: &[f64], h: f64) -> Result<Vec<GradAudit>, NlpError> {
    let mut audits = Vec::new();
    let (_, grad) = prob.objective_at(z)?;
    let mut audit = GradAudit {
        block: "objective".into(),
        worst_abs: 0.0,
        worst_rel: 0.0,
        row: 0,
        col: 0,
    };
    for col in 0..prob.n {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[col] += h;
        zm[col] -= h;
        let fd = (prob.objective_at(&zp)?.0 - prob.objective_at(&zm)?.0) / (2.0 * h);
        record_mismatch(&mut audit, grad[col], fd, 0, col);
    }
    audits.push(audit);
    for b in prob.eq_blocks.iter().chain(&prob.ineq_blocks) {
        audits.push(audit_block(b, z, h)?);
    }
    Ok(audits)
}

fn audit_block(b: &Block, z: &[f64], h: f64) -> Result<GradAudit, NlpError> {
    let (_, jac) = b.evaluate(z)?;
    let mut audit = GradAudit {
        block: b.name.clone(),
        worst_abs: 0.0,
        worst_rel: 0.0,
        row: 0,
        col: 0,
    };
    for (j, &col) in b.cols.iter().enumerate() {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[col] += h;
        zm[col] -= h;
        let (vp, _) = b.evaluate(&zp)?;
        let (vm, _) = b.evaluate(&zm)?;
        for r in 0..b.n_rows {
            let fd = (vp[r] - vm[r]) / (2.0 * h);
            record_mismatch(&mut audit, jac[r][j], fd, r, j);
        }
    }
    Ok(audit)
}

fn record_mismatch(audit: &mut GradAudit, analytic: f64, fd: f64, row: usize, col: usize) {
    let abs = (analytic - fd).abs();
    let rel = abs / 1.0f64.max(analytic.abs());
    if rel > audit.worst_rel {
        audit.worst_rel = rel;
        audit.worst_abs = abs;
        audit.row = row;
        audit.col = col;
    }
}
