//! Dense two-phase simplex for small one-sided fitting programs.
//!
//! Solves `min c'w  s.t.  A w >= b` with free `w`. The solver pivots on the
//! dual `max b'y  s.t.  A'y = c, y >= 0`, whose standard form has one row per
//! fit coefficient; for the radius fits that is a tableau of a few dozen rows
//! by a few thousand columns, comfortably dense.

/// Tolerance for reduced costs, ratio-test pivots, and the phase-1 optimum.
const PIVOT_TOL: f64 = 1e-11;

/// Switch to Bland's rule after this many consecutive degenerate pivots.
const DEGENERATE_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("linear program is infeasible (phase-1 residual {0:.3e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded its pivot budget")]
    Stalled,
    #[error("linear program contains a non-finite coefficient")]
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub w: Vec<f64>,
    pub objective: f64,
    /// Largest violation `max_j (b_j - a_j·w)` of the recovered point.
    pub max_violation: f64,
    /// True when the final basis was rank-deficient and the recovery solve
    /// needed a ridge term.
    pub used_ridge: bool,
}

/// Minimizes `c'w` over `{ w : A w >= b }` with `w` free.
///
/// `a` holds the constraint rows. The feasible set must be nonempty and the
/// objective bounded below on it, which holds by construction for the
/// one-sided fits in this crate (each objective term is bounded by its own
/// constraint).
pub fn solve_one_sided(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution, LpError> {
    let n_rows = a.len();
    let p = c.len();
    assert_eq!(b.len(), n_rows, "one bound per constraint row");
    for row in a {
        assert_eq!(row.len(), p, "constraint rows must match coefficient count");
    }
    if c.iter().any(|v| !v.is_finite())
        || b.iter().any(|v| !v.is_finite())
        || a.iter().flatten().any(|v| !v.is_finite())
    {
        return Err(LpError::NonFinite);
    }

    // Dual standard form: min g'y  s.t.  M y = q, y >= 0 with M = A', q = c,
    // g = -b. Rows are flipped so the right-hand side is nonnegative.
    let mut flip = vec![1.0f64; p];
    let mut tableau: Vec<Vec<f64>> = Vec::with_capacity(p);
    for i in 0..p {
        if c[i] < 0.0 {
            flip[i] = -1.0;
        }
        let mut row = Vec::with_capacity(n_rows + p + 1);
        for constraint in a.iter() {
            row.push(flip[i] * constraint[i]);
        }
        for k in 0..p {
            row.push(if k == i { 1.0 } else { 0.0 });
        }
        row.push(flip[i] * c[i]);
        tableau.push(row);
    }
    let n_cols = n_rows + p;
    let rhs_col = n_cols;
    let mut basis: Vec<usize> = (n_rows..n_rows + p).collect();

    // Phase 1: drive the artificial variables (columns n_rows..) to zero.
    let mut cost = vec![0.0f64; n_cols + 1];
    for j in 0..=n_cols {
        let mut s = 0.0;
        for row in tableau.iter() {
            s += row[j];
        }
        cost[j] = -s;
    }
    for i in 0..p {
        cost[n_rows + i] = 0.0;
    }
    run_simplex(&mut tableau, &mut cost, &mut basis, rhs_col, |_| true)?;
    let phase1 = -cost[rhs_col];
    let scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if phase1.abs() > 1e-7 * scale {
        return Err(LpError::Infeasible(phase1));
    }

    // Phase 2: the real dual objective. Artificial columns may linger in the
    // basis at level zero but must never re-enter.
    let g = |j: usize| if j < n_rows { -b[j] } else { 0.0 };
    for j in 0..n_cols {
        let mut reduced = g(j);
        for (i, row) in tableau.iter().enumerate() {
            reduced -= g(basis[i]) * row[j];
        }
        cost[j] = reduced;
    }
    // The RHS cell of the cost row tracks the negated objective.
    let mut obj = 0.0;
    for (i, row) in tableau.iter().enumerate() {
        obj += g(basis[i]) * row[rhs_col];
    }
    cost[rhs_col] = -obj;
    run_simplex(&mut tableau, &mut cost, &mut basis, rhs_col, |j| j < n_rows)?;

    // Recover the primal point from the final basis: solve M_B' pi = g_B and
    // map back through the row flips.
    let mut mb = vec![vec![0.0f64; p]; p];
    let mut gb = vec![0.0f64; p];
    for (slot, &j) in basis.iter().enumerate() {
        for i in 0..p {
            mb[i][slot] = if j < n_rows {
                flip[i] * a[j][i]
            } else if j - n_rows == i {
                1.0
            } else {
                0.0
            };
        }
        gb[slot] = g(j);
    }
    let (pi, used_ridge) = solve_transposed_with_ridge(&mb, &gb);
    let mut w = vec![0.0f64; p];
    for i in 0..p {
        w[i] = -flip[i] * pi[i];
    }

    let mut objective = 0.0;
    for i in 0..p {
        objective += c[i] * w[i];
    }
    let mut max_violation = f64::NEG_INFINITY;
    for (row, &bj) in a.iter().zip(b) {
        let mut dot = 0.0;
        for (aij, wi) in row.iter().zip(&w) {
            dot += aij * wi;
        }
        max_violation = max_violation.max(bj - dot);
    }
    Ok(LpSolution {
        w,
        objective,
        max_violation,
        used_ridge,
    })
}

/// Pivots until no reduced cost is negative among admissible columns.
fn run_simplex(
    tableau: &mut [Vec<f64>],
    cost: &mut [f64],
    basis: &mut [usize],
    rhs_col: usize,
    admissible: impl Fn(usize) -> bool,
) -> Result<(), LpError> {
    let n_cols = rhs_col;
    let max_pivots = 50 * (n_cols + tableau.len()) + 1000;
    let mut degenerate_streak = 0usize;
    for _ in 0..max_pivots {
        let bland = degenerate_streak >= DEGENERATE_LIMIT;
        let mut entering = None;
        if bland {
            for (j, &cj) in cost.iter().enumerate().take(n_cols) {
                if admissible(j) && cj < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -PIVOT_TOL;
            for (j, &cj) in cost.iter().enumerate().take(n_cols) {
                if admissible(j) && cj < best {
                    best = cj;
                    entering = Some(j);
                }
            }
        }
        let Some(col) = entering else {
            return Ok(());
        };

        let mut leaving = None;
        let mut best_ratio = f64::INFINITY;
        for (i, row) in tableau.iter().enumerate() {
            if row[col] > PIVOT_TOL {
                let ratio = row[rhs_col] / row[col];
                let better = ratio < best_ratio - PIVOT_TOL
                    || (ratio < best_ratio + PIVOT_TOL
                        && leaving.is_some_and(|l: usize| basis[i] < basis[l]));
                if better {
                    best_ratio = ratio;
                    leaving = Some(i);
                }
            }
        }
        let Some(pivot_row) = leaving else {
            return Err(LpError::Unbounded);
        };
        if best_ratio <= PIVOT_TOL {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }

        let pivot = tableau[pivot_row][col];
        for v in tableau[pivot_row].iter_mut() {
            *v /= pivot;
        }
        let pivot_data = std::mem::take(&mut tableau[pivot_row]);
        for (i, row) in tableau.iter_mut().enumerate() {
            if i == pivot_row {
                continue;
            }
            let factor = row[col];
            if factor != 0.0 {
                for (rv, pv) in row.iter_mut().zip(&pivot_data) {
                    *rv -= factor * pv;
                }
            }
        }
        let factor = cost[col];
        if factor != 0.0 {
            for (cv, pv) in cost.iter_mut().zip(&pivot_data) {
                *cv -= factor * pv;
            }
        }
        tableau[pivot_row] = pivot_data;
        basis[pivot_row] = col;
    }
    Err(LpError::Stalled)
}

/// Solves `M' x = g` by LU with partial pivoting, adding a ridge of 1e-10 to
/// the diagonal when the factorization meets a near-zero pivot.
fn solve_transposed_with_ridge(m: &[Vec<f64>], g: &[f64]) -> (Vec<f64>, bool) {
    let p = g.len();
    let build = |ridge: f64| {
        let mut mat = vec![vec![0.0f64; p]; p];
        for i in 0..p {
            for j in 0..p {
                mat[i][j] = m[j][i];
            }
            mat[i][i] += ridge;
        }
        mat
    };
    if let Some(x) = lu_solve(build(0.0), g) {
        return (x, false);
    }
    let x = lu_solve(build(1e-10), g).unwrap_or_else(|| vec![0.0; p]);
    (x, true)
}

#[allow(clippy::needless_range_loop)]
fn lu_solve(mut mat: Vec<Vec<f64>>, g: &[f64]) -> Option<Vec<f64>> {
    let p = g.len();
    let mut x: Vec<f64> = g.to_vec();
    for k in 0..p {
        let mut piv = k;
        for i in k + 1..p {
            if mat[i][k].abs() > mat[piv][k].abs() {
                piv = i;
            }
        }
        if mat[piv][k].abs() < 1e-12 {
            return None;
        }
        mat.swap(k, piv);
        x.swap(k, piv);
        for i in k + 1..p {
            let f = mat[i][k] / mat[k][k];
            if f != 0.0 {
                for j in k..p {
                    mat[i][j] -= f * mat[k][j];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..p).rev() {
        let mut s = x[k];
        for j in k + 1..p {
            s -= mat[k][j] * x[j];
        }
        x[k] = s / mat[k][k];
    }
    Some(x)
}
