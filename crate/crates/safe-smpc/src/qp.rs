//! Dense convex quadratic programming via a primal active-set method.
//!
//! This is the single optimization backend for the whole crate: condensed MPC
//! quadratic programs, LP feasibility tests (phase 1), and polytope support
//! functions all route through here. Problems are small (a few dozen
//! variables, a few hundred rows), so dense linear algebra is fine.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Numerical tolerances shared by all solver entry points.
#[derive(Debug, Clone, Copy)]
pub struct SolverTolerances {
    /// Constraint residuals up to this are treated as feasible.
    pub feas_tol: f64,
    /// Bound on stationarity / complementarity residuals at optimality.
    pub kkt_tol: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self { feas_tol: 1e-8, kkt_tol: 1e-6 }
    }
}

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cost matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NonPsdCost(f64),
}

/// min ½ xᵀHx + fᵀx  s.t.  A_ineq x ≤ b_ineq, A_eq x = b_eq.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: Option<DMatrix<f64>>,
    pub b_eq: Option<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x_opt: DVector<f64>,
    pub value: f64,
    pub status: QpStatus,
    /// Multipliers for the inequality rows (zero on inactive rows).
    pub dual_ineq: DVector<f64>,
    /// Multipliers for the equality rows.
    pub dual_eq: DVector<f64>,
}

#[derive(Debug, Clone)]
pub enum FeasibilityResult {
    Feasible(DVector<f64>),
    Infeasible,
}

#[derive(Debug, Clone)]
pub enum SupportOutcome {
    /// max cᵀx over {Ax ≤ b} is attained: (value, argmax).
    Finite(f64, DVector<f64>),
    Infeasible,
    Unbounded,
}

/// Solves the KKT system [M Aᵀ_W; A_W 0] [p; λ] = [g; 0] for the rows of `a`
/// listed in `work`. Returns the step `p` and the multipliers in `work` order.
fn kkt_solve(
    m: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    work: &[usize],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = m.nrows();
    let k = work.len();
    let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(m);
    for (j, &row) in work.iter().enumerate() {
        for i in 0..n {
            kkt[(i, n + j)] = a[(row, i)];
            kkt[(n + j, i)] = a[(row, i)];
        }
    }
    let mut rhs = DVector::<f64>::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(g);
    let sol = solve_dense_system(&kkt, &rhs)?;
    let p = sol.rows(0, n).into_owned();
    let lam = sol.rows(n, k).into_owned();
    Some((p, lam))
}

/// Solves a dense square system with a residual guarantee. LU with one step
/// of iterative refinement enforces even nearly parallel working rows exactly
/// (an SVD cutoff scaled to the dominant block would truncate them, silently
/// dropping constraints); the pseudo-inverse fallback still handles singular
/// but consistent systems (linearly dependent working sets at degenerate
/// faces). Returns `None` when neither attempt reproduces the right-hand side.
fn solve_dense_system(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let accept = |sol: DVector<f64>| -> Option<DVector<f64>> {
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        ((m * &sol - rhs).amax() <= 1e-6 * (1.0 + rhs.amax())).then_some(sol)
    };
    let lu = m.clone().lu();
    lu.solve(rhs)
        .and_then(|s| {
            let r = rhs - m * &s;
            let ds = lu.solve(&r)?;
            Some(s + ds)
        })
        .and_then(accept)
        .or_else(|| {
            let svd = m.clone().svd(true, true);
            let sv_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            accept(svd.solve(rhs, 1e-12 * sv_max.max(1e-300)).ok()?)
        })
}

/// Ratio test: largest step α ∈ [0, α_max] along p keeping Ax ≤ b, together
/// with the blocking row (smallest index on ties, Bland's rule).
fn ratio_test(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    p: &DVector<f64>,
    skip: &[usize],
    alpha_max: f64,
) -> (f64, Option<usize>) {
    let mut alpha = alpha_max;
    let mut blocker = None;
    for i in 0..a.nrows() {
        if skip.contains(&i) {
            continue;
        }
        let d = a.row(i).transpose().dot(p);
        if d <= 1e-13 {
            continue;
        }
        let resid = (b[i] - a.row(i).transpose().dot(x)).max(0.0);
        let r = resid / d;
        if r < alpha - 1e-15 {
            alpha = r;
            blocker = Some(i);
        }
    }
    (alpha, blocker)
}

/// Core primal active-set loop shared by the QP and LP paths.
///
/// Minimizes ½xᵀHx + fᵀx for the QP path (`linear_objective = false`), or
/// maximizes fᵀx treating H as the projection metric for the LP path
/// (`linear_objective = true`, H = I). `x0` must be feasible; equality rows
/// are pinned into the working set permanently.
struct ActiveSet<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    n_eq: usize, // first n_eq rows of `a` are equalities, always in the working set
}

enum LoopExit {
    Optimal { x: DVector<f64>, work: Vec<usize>, lam: DVector<f64> },
    Unbounded,
    IterationLimit(DVector<f64>),
}

impl<'a> ActiveSet<'a> {
    /// QP path: g(x) = -(Hx + f), metric M = H.
    fn run_qp(&self, h: &DMatrix<f64>, f: &DVector<f64>, x0: DVector<f64>) -> LoopExit {
        self.run(x0, |x| -(h * x) - f, h, false)
    }

    /// LP path (maximize cᵀx): g = c, metric M = I (gradient projection).
    fn run_lp(&self, c: &DVector<f64>, x0: DVector<f64>) -> LoopExit {
        let eye = DMatrix::<f64>::identity(c.len(), c.len());
        self.run(x0, |_| c.clone(), &eye, true)
    }

    fn run(
        &self,
        mut x: DVector<f64>,
        grad: impl Fn(&DVector<f64>) -> DVector<f64>,
        metric: &DMatrix<f64>,
        linear_objective: bool,
    ) -> LoopExit {
        let m = self.a.nrows();
        let n = x.len();
        let cap = 10 * (n + m) + 20;
        let mut work: Vec<usize> = (0..self.n_eq).collect();
        // Row dropped in the previous null step. In exact arithmetic the next
        // step satisfies aᵀp ≤ 0 for that row, but with nearly parallel
        // working rows the computed product can be +noise, re-blocking the
        // row at α = 0 forever. Excluding it from one ratio test breaks the
        // cycle at the cost of an O(noise) constraint violation.
        let mut just_dropped: Option<usize> = None;
        // After an unblocked full step the point minimizes the objective on
        // the working set, so the next step with the same set must be zero in
        // exact arithmetic. Ill-conditioned KKT systems instead return a step
        // at the rounding-error floor forever; treat that as stationary.
        let mut prev_full_step = false;
        for _ in 0..cap {
            let g = grad(&x);
            let Some((p, lam)) = kkt_solve(metric, &g, self.a, &work) else {
                // Singular KKT system: a working-set row became linearly
                // dependent. Rebuild the working set from scratch; blocking
                // rows are re-added as needed and the cap bounds the retries.
                if work.len() > self.n_eq {
                    work.truncate(self.n_eq);
                    continue;
                }
                return LoopExit::IterationLimit(x);
            };
            // A null step means the current point is stationary on the working
            // set: the face is zero-dimensional (n working rows pin the point,
            // so any nonzero p is rounding noise from the ill-conditioned KKT
            // solve), or p is numerically zero, or it makes no progress along
            // the gradient — following such a p would corrupt the iterate.
            let step_small = work.len() >= n
                || prev_full_step
                || p.amax() <= 1e-9 * (1.0 + x.amax())
                || g.dot(&p) <= 1e-12 * g.norm() * p.norm();
            if step_small {
                // Check multipliers on inequality rows in the working set.
                // The threshold scales with the dual magnitude: multipliers
                // carry the rounding noise of the KKT solve, and dropping a
                // row whose true multiplier is zero re-blocks it at α = 0
                // forever (a two-cycle).
                let lam_tol = 1e-9 * (1.0 + lam.amax());
                let mut drop_idx: Option<usize> = None;
                for (j, &row) in work.iter().enumerate() {
                    if row < self.n_eq {
                        continue;
                    }
                    if lam[j] < -lam_tol {
                        drop_idx = match drop_idx {
                            Some(k) if work[k] <= row => Some(k),
                            _ => Some(j),
                        };
                    }
                }
                match drop_idx {
                    None => return LoopExit::Optimal { x, work, lam },
                    Some(j) => {
                        just_dropped = Some(work.remove(j));
                        prev_full_step = false;
                        continue;
                    }
                }
            }
            let mut skip = work.clone();
            if let Some(j) = just_dropped.take() {
                skip.push(j);
            }
            if linear_objective {
                let (alpha, blocker) = ratio_test(self.a, self.b, &x, &p, &skip, f64::INFINITY);
                match blocker {
                    None => return LoopExit::Unbounded,
                    Some(i) => {
                        x += p * alpha;
                        work.push(i);
                    }
                }
            } else {
                let (alpha, blocker) = ratio_test(self.a, self.b, &x, &p, &skip, 1.0);
                x += p * alpha;
                match blocker {
                    Some(i) => {
                        work.push(i);
                        prev_full_step = false;
                    }
                    None => prev_full_step = true,
                }
            }
        }
        LoopExit::IterationLimit(x)
    }

}

/// Maximize cᵀx over {rows of `a_full` with equalities first}. `x0` feasible.
fn lp_max(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    n_eq: usize,
    c: &DVector<f64>,
    x0: DVector<f64>,
) -> LoopExit {
    ActiveSet { a, b, n_eq }.run_lp(c, x0)
}

/// Phase 1: find x with A_ineq x ≤ b (+ equalities) or report infeasible.
///
/// Lifts to (x, t) and minimizes t subject to Ax − t·1 ≤ b and t ≥ −1; the
/// instance is feasible iff the optimal t is ≤ feas_tol. Solved exactly as an
/// LP by the projection active-set loop, so no regularization bias enters the
/// witness.
fn phase1(
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
    a_eq: Option<&DMatrix<f64>>,
    b_eq: Option<&DVector<f64>>,
    tol: SolverTolerances,
) -> Result<Option<DVector<f64>>, QpError> {
    let n = a_ineq.ncols();
    let m = a_ineq.nrows();
    // Start from the least-squares solution of the equalities (or the origin).
    let x_start = match (a_eq, b_eq) {
        (Some(ae), Some(be)) => ae
            .clone()
            .svd(true, true)
            .solve(be, 1e-12)
            .map_err(|e| QpError::DimensionMismatch(e.to_string()))?,
        _ => DVector::zeros(n),
    };
    let resid = a_ineq * &x_start - b_ineq;
    let viol = resid.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    if m == 0 || viol <= tol.feas_tol {
        return Ok(Some(x_start));
    }
    // Lifted system: equalities first (t column zero), then [A, -1], then t ≥ -1.
    let p = a_eq.map_or(0, |ae| ae.nrows());
    let mut a_l = DMatrix::<f64>::zeros(p + m + 1, n + 1);
    let mut b_l = DVector::<f64>::zeros(p + m + 1);
    if let (Some(ae), Some(be)) = (a_eq, b_eq) {
        a_l.view_mut((0, 0), (p, n)).copy_from(ae);
        b_l.rows_mut(0, p).copy_from(be);
    }
    a_l.view_mut((p, 0), (m, n)).copy_from(a_ineq);
    for i in 0..m {
        a_l[(p + i, n)] = -1.0;
        b_l[p + i] = b_ineq[i];
    }
    a_l[(p + m, n)] = -1.0;
    b_l[p + m] = 1.0;
    let mut x0 = DVector::<f64>::zeros(n + 1);
    x0.rows_mut(0, n).copy_from(&x_start);
    x0[n] = viol + 1.0;
    let mut c = DVector::<f64>::zeros(n + 1);
    c[n] = -1.0;
    match lp_max(&a_l, &b_l, p, &c, x0) {
        LoopExit::Optimal { x, .. } => {
            let t = x[n];
            if t <= tol.feas_tol {
                Ok(Some(x.rows(0, n).into_owned()))
            } else {
                Ok(None)
            }
        }
        LoopExit::Unbounded => unreachable!("phase-1 objective is bounded by construction"),
        LoopExit::IterationLimit(x) => {
            // Accept the incumbent if it already certifies feasibility.
            if x[n] <= tol.feas_tol {
                Ok(Some(x.rows(0, n).into_owned()))
            } else {
                Ok(None)
            }
        }
    }
}

fn check_dims(p: &QpProblem) -> Result<(), QpError> {
    let n = p.f.len();
    if p.h.nrows() != n || p.h.ncols() != n {
        return Err(QpError::DimensionMismatch(format!(
            "H is {}x{}, f has length {n}",
            p.h.nrows(),
            p.h.ncols()
        )));
    }
    if p.a_ineq.nrows() != p.b_ineq.len() || (p.a_ineq.nrows() > 0 && p.a_ineq.ncols() != n) {
        return Err(QpError::DimensionMismatch(format!(
            "A_ineq is {}x{}, b_ineq has length {}",
            p.a_ineq.nrows(),
            p.a_ineq.ncols(),
            p.b_ineq.len()
        )));
    }
    match (&p.a_eq, &p.b_eq) {
        (None, None) => {}
        (Some(ae), Some(be)) => {
            if ae.nrows() != be.len() || ae.ncols() != n {
                return Err(QpError::DimensionMismatch(format!(
                    "A_eq is {}x{}, b_eq has length {}",
                    ae.nrows(),
                    ae.ncols(),
                    be.len()
                )));
            }
        }
        _ => {
            return Err(QpError::DimensionMismatch(
                "A_eq and b_eq must be given together".into(),
            ))
        }
    }
    Ok(())
}

/// Solves a convex QP with a primal active-set method (LP phase 1, Bland-style
/// smallest-index tie breaking, iteration cap 10(n+m)).
pub fn solve_qp(problem: &QpProblem, tol: SolverTolerances) -> Result<QpSolution, QpError> {
    check_dims(problem)?;
    let n = problem.f.len();
    let m = problem.a_ineq.nrows();
    let p = problem.a_eq.as_ref().map_or(0, |a| a.nrows());

    // Symmetrize and check positive semidefiniteness.
    let mut h = (&problem.h + problem.h.transpose()) * 0.5;
    let asym = (&problem.h - problem.h.transpose()).amax();
    if asym > 1e-9 {
        return Err(QpError::DimensionMismatch(format!(
            "H is not symmetric (max |H - Hᵀ| = {asym:.3e})"
        )));
    }
    let min_eig = h
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-8 {
        return Err(QpError::NonPsdCost(min_eig));
    }
    if min_eig < 1e-10 {
        // PSD up to rounding (typical for condensed MPC Hessians): nudge to
        // strictly convex so the KKT systems stay nonsingular.
        for i in 0..n {
            h[(i, i)] += 1e-10;
        }
    }

    let infeasible = |status: QpStatus| QpSolution {
        x_opt: DVector::zeros(n),
        value: f64::INFINITY,
        status,
        dual_ineq: DVector::zeros(m),
        dual_eq: DVector::zeros(p),
    };

    let x0 = match phase1(
        &problem.a_ineq,
        &problem.b_ineq,
        problem.a_eq.as_ref(),
        problem.b_eq.as_ref(),
        tol,
    )? {
        Some(x) => x,
        None => return Ok(infeasible(QpStatus::Infeasible)),
    };

    // Stack equalities first so the active-set loop can pin them.
    let (a_all, b_all, n_eq) = match (&problem.a_eq, &problem.b_eq) {
        (Some(ae), Some(be)) => {
            let mut a = DMatrix::<f64>::zeros(p + m, n);
            a.view_mut((0, 0), (p, n)).copy_from(ae);
            a.view_mut((p, 0), (m, n)).copy_from(&problem.a_ineq);
            let mut b = DVector::<f64>::zeros(p + m);
            b.rows_mut(0, p).copy_from(be);
            b.rows_mut(p, m).copy_from(&problem.b_ineq);
            (a, b, p)
        }
        _ => (problem.a_ineq.clone(), problem.b_ineq.clone(), 0),
    };

    // Deterministic tie-breaking perturbation of the inequality offsets.
    // Clusters of nearly parallel rows through one point (tube cross-sections
    // are the typical source) make the vertex degenerate, and the active-set
    // loop can then cycle through α = 0 steps without terminating. Relaxing
    // each row by a distinct tiny amount splits such a vertex into simple
    // ones; the solution is re-anchored on the original offsets afterwards.
    let mut b_pert = b_all.clone();
    for i in n_eq..b_pert.len() {
        let rho = 0.5
            + (crate::rng::mix64(1 + i as u64) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        b_pert[i] += 1e-9 * (1.0 + a_all.row(i).norm() + b_pert[i].abs()) * rho;
    }

    let solver = ActiveSet { a: &a_all, b: &b_pert, n_eq };
    match solver.run_qp(&h, &problem.f, x0) {
        LoopExit::Optimal { x, work, lam } => {
            let (x, lam) =
                polish_on_working_set(&h, &problem.f, &a_all, &b_all, &work, tol)
                    .unwrap_or((x, lam));
            let mut dual_ineq = DVector::<f64>::zeros(m);
            let mut dual_eq = DVector::<f64>::zeros(p);
            for (j, &row) in work.iter().enumerate() {
                if row < n_eq {
                    dual_eq[row] = lam[j];
                } else {
                    dual_ineq[row - n_eq] = lam[j].max(0.0);
                }
            }
            let value = 0.5 * (x.transpose() * &problem.h * &x)[(0, 0)] + problem.f.dot(&x);
            Ok(QpSolution { x_opt: x, value, status: QpStatus::Optimal, dual_ineq, dual_eq })
        }
        LoopExit::Unbounded => unreachable!("strictly convex objective cannot be unbounded"),
        LoopExit::IterationLimit(x) => {
            let value = 0.5 * (x.transpose() * &problem.h * &x)[(0, 0)] + problem.f.dot(&x);
            Ok(QpSolution {
                x_opt: x,
                value,
                status: QpStatus::IterationLimit,
                dual_ineq: DVector::zeros(m),
                dual_eq: DVector::zeros(p),
            })
        }
    }
}

/// Re-solves the equality-constrained QP on the final working set with the
/// *unperturbed* offsets: [H A_Wᵀ; A_W 0][x; λ] = [−f; b_W]. Returns `None`
/// (keep the perturbed iterate) unless the result is primal feasible for the
/// original rows with nonnegative multipliers.
fn polish_on_working_set(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    work: &[usize],
    tol: SolverTolerances,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let k = work.len();
    let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    let mut rhs = DVector::<f64>::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-f));
    for (j, &row) in work.iter().enumerate() {
        for i in 0..n {
            kkt[(i, n + j)] = a[(row, i)];
            kkt[(n + j, i)] = a[(row, i)];
        }
        rhs[n + j] = b[row];
    }
    let sol = solve_dense_system(&kkt, &rhs)?;
    let x = sol.rows(0, n).into_owned();
    let lam = sol.rows(n, k).into_owned();
    if lam.iter().any(|v| *v < -1e-7) {
        return None;
    }
    let slack = b - a * &x;
    if slack.iter().any(|s| *s < -tol.feas_tol) {
        return None;
    }
    Some((x, lam))
}

/// Unit-normalizes the rows of (A, b); drops vacuous zero rows. Returns
/// `None` when a zero row is outright contradictory (0·x ≤ b with b < 0).
fn normalized_rows(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let n = a.ncols();
    let mut rows: Vec<f64> = Vec::with_capacity(a.nrows() * n);
    let mut offs: Vec<f64> = Vec::with_capacity(a.nrows());
    for i in 0..a.nrows() {
        let norm = a.row(i).norm();
        if norm < 1e-14 {
            if b[i] < -1e-12 {
                return None;
            }
            continue;
        }
        for j in 0..n {
            rows.push(a[(i, j)] / norm);
        }
        offs.push(b[i] / norm);
    }
    Some((
        DMatrix::from_row_slice(offs.len(), n, &rows),
        DVector::from_row_slice(&offs),
    ))
}

/// Is {x : Ax ≤ b} nonempty? Returns a witness point when it is.
pub fn solve_lp_feasibility(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: SolverTolerances,
) -> Result<FeasibilityResult, QpError> {
    if a.nrows() != b.len() {
        return Err(QpError::DimensionMismatch(format!(
            "A is {}x{}, b has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let Some((an, bn)) = normalized_rows(a, b) else {
        return Ok(FeasibilityResult::Infeasible);
    };
    Ok(match phase1(&an, &bn, None, None, tol)? {
        Some(x) => FeasibilityResult::Feasible(x),
        None => FeasibilityResult::Infeasible,
    })
}

/// Support function: max cᵀx over {Ax ≤ b}.
pub fn support(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    tol: SolverTolerances,
) -> Result<SupportOutcome, QpError> {
    if a.nrows() != b.len() || (a.nrows() > 0 && a.ncols() != c.len()) {
        return Err(QpError::DimensionMismatch(format!(
            "A is {}x{}, b has length {}, c has length {}",
            a.nrows(),
            a.ncols(),
            b.len(),
            c.len()
        )));
    }
    let Some((an, bn)) = normalized_rows(a, b) else {
        return Ok(SupportOutcome::Infeasible);
    };
    let x0 = match phase1(&an, &bn, None, None, tol)? {
        Some(x) => x,
        None => return Ok(SupportOutcome::Infeasible),
    };
    if an.nrows() == 0 {
        return Ok(if c.amax() <= 1e-14 {
            SupportOutcome::Finite(0.0, x0)
        } else {
            SupportOutcome::Unbounded
        });
    }
    Ok(match lp_max(&an, &bn, 0, c, x0) {
        LoopExit::Optimal { x, .. } => SupportOutcome::Finite(c.dot(&x), x),
        LoopExit::Unbounded => SupportOutcome::Unbounded,
        LoopExit::IterationLimit(x) => SupportOutcome::Finite(c.dot(&x), x),
    })
}

/// Checks the KKT conditions of an Optimal solution; used by tests and `check`.
pub fn kkt_residuals(problem: &QpProblem, sol: &QpSolution, tol: SolverTolerances) -> Result<(), String> {
    if sol.status != QpStatus::Optimal {
        return Err("solution is not Optimal".into());
    }
    let x = &sol.x_opt;
    let resid = &problem.a_ineq * x - &problem.b_ineq;
    for (i, r) in resid.iter().enumerate() {
        if *r > tol.feas_tol * 10.0 {
            return Err(format!("primal infeasibility at row {i}: {r:.3e}"));
        }
        if sol.dual_ineq[i] < -tol.feas_tol {
            return Err(format!("negative multiplier at row {i}: {:.3e}", sol.dual_ineq[i]));
        }
        let comp = (sol.dual_ineq[i] * r).abs();
        if comp > tol.kkt_tol {
            return Err(format!("complementarity at row {i}: {comp:.3e}"));
        }
    }
    let mut stat = &problem.h * x + &problem.f + problem.a_ineq.transpose() * &sol.dual_ineq;
    if let Some(ae) = &problem.a_eq {
        stat += ae.transpose() * &sol.dual_eq;
    }
    let s = stat.amax();
    let scale = 1.0 + problem.h.amax() * x.amax() + problem.f.amax();
    if s > tol.kkt_tol * scale {
        return Err(format!("stationarity residual {s:.3e} (scale {scale:.3e})"));
    }
    Ok(())
}
