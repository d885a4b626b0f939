//! Stochastic MPC with Gaussian chance-constraint tightening.
//!
//! The controller optimizes over feedback-parameterized inputs u = Kz + ν
//! along the nominal prediction z⁺ = Az + Bu, z₀ = x, with state constraint
//! rows tightened per step by γ_k = √(2 aᵀΣ_{e,k} a) · erf⁻¹(2β − 1), where
//! Σ_{e,k} is the closed-loop error covariance. The condensed QP matrices are
//! cached at synthesis time; only the linear term and offsets depend on x.

use crate::erf::erfinv;
use crate::polytope::Polytope;
use crate::qp::{self, QpProblem, QpStatus, SolverTolerances};
use crate::LinearSystem;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SmpcError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("risk parameter β = {0} outside [0.5, 1)")]
    BetaOutOfRange(f64),
    #[error("covariance matrix is not symmetric PSD")]
    InvalidCovariance,
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("polytope error: {0}")]
    Polytope(String),
}

impl From<qp::QpError> for SmpcError {
    fn from(e: qp::QpError) -> Self {
        SmpcError::Solver(e.to_string())
    }
}

impl From<crate::polytope::PolytopeError> for SmpcError {
    fn from(e: crate::polytope::PolytopeError) -> Self {
        SmpcError::Polytope(e.to_string())
    }
}

/// Additive disturbance w ~ 𝒩(0, Σ_w) truncated to the bounded support W.
#[derive(Debug, Clone)]
pub struct DisturbanceModel {
    pub sigma_w: DMatrix<f64>,
    pub w_set: Polytope,
}

impl DisturbanceModel {
    pub fn new(sigma_w: DMatrix<f64>, w_set: Polytope) -> Result<Self, SmpcError> {
        if sigma_w.nrows() != sigma_w.ncols() || sigma_w.nrows() != w_set.dim() {
            return Err(SmpcError::DimensionMismatch(format!(
                "Σ_w is {}x{}, W has dimension {}",
                sigma_w.nrows(),
                sigma_w.ncols(),
                w_set.dim()
            )));
        }
        if (&sigma_w - sigma_w.transpose()).amax() > 1e-9 {
            return Err(SmpcError::InvalidCovariance);
        }
        let min_eig = sigma_w
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(SmpcError::InvalidCovariance);
        }
        Ok(Self { sigma_w, w_set })
    }
}

/// Error covariances [Σ_{e,0}, …, Σ_{e,N}] of the closed-loop prediction
/// error: Σ_{e,0} = 0, Σ_{e,k+1} = Φ Σ_{e,k} Φᵀ + Σ_w (symmetrized).
pub fn propagate_error_covariance(
    phi: &DMatrix<f64>,
    sigma_w: &DMatrix<f64>,
    n: usize,
) -> Vec<DMatrix<f64>> {
    let dim = phi.nrows();
    let mut out = Vec::with_capacity(n + 1);
    out.push(DMatrix::zeros(dim, dim));
    for k in 0..n {
        let next = phi * &out[k] * phi.transpose() + sigma_w;
        out.push((&next + next.transpose()) * 0.5);
    }
    out
}

/// γ = √(2 aᵀΣ_e a) · erf⁻¹(2β − 1): the deterministic offset that makes
/// aᵀz ≤ b − γ imply Pr(aᵀx ≤ b) ≥ β for x = z + e, e ~ 𝒩(0, Σ_e).
pub fn tightening_offset(
    a: &DVector<f64>,
    sigma_e: &DMatrix<f64>,
    beta: f64,
) -> Result<f64, SmpcError> {
    if !(0.5..1.0).contains(&beta) {
        return Err(SmpcError::BetaOutOfRange(beta));
    }
    if sigma_e.nrows() != a.len() || sigma_e.ncols() != a.len() {
        return Err(SmpcError::DimensionMismatch(format!(
            "Σ_e is {}x{}, a has length {}",
            sigma_e.nrows(),
            sigma_e.ncols(),
            a.len()
        )));
    }
    let var = (a.transpose() * sigma_e * a)[(0, 0)].max(0.0);
    Ok((2.0 * var).sqrt() * erfinv(2.0 * beta - 1.0))
}

/// Prediction matrices for x_k = P_k x₀ + S_k v with x⁺ = Ax + Bv:
/// P_k = Aᵏ and S_k = [A^{k−1}B, …, B, 0, …] (n × N·m), for k = 0..=N.
pub(crate) fn prediction_matrices(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    n: usize,
) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
    let nx = a.nrows();
    let m = b.ncols();
    let mut out: Vec<(DMatrix<f64>, DMatrix<f64>)> =
        vec![(DMatrix::identity(nx, nx), DMatrix::zeros(nx, n * m))];
    for k in 1..=n {
        let (pk_prev, sk_prev) = &out[k - 1];
        let pk = a * pk_prev;
        let mut sk = a * sk_prev;
        sk.view_mut((0, (k - 1) * m), (nx, m)).copy_from(b);
        out.push((pk, sk));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmpcStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SmpcResult {
    pub status: SmpcStatus,
    /// First input u = Kx + ν₀* (None when infeasible).
    pub u: Option<DVector<f64>>,
    /// Nominal successor Ax + Bu (no disturbance term).
    pub nominal_next: Option<DVector<f64>>,
}

/// Immutable SMPC synthesis: tightening sequence plus the cached condensed QP.
#[derive(Debug, Clone)]
pub struct SmpcSynthesis {
    pub k: DMatrix<f64>,
    pub horizon: usize,
    pub beta: f64,
    pub sigma_e: Vec<DMatrix<f64>>,
    /// gamma[k][i]: offset for row i of the state set at prediction step k.
    pub gamma: Vec<DVector<f64>>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    system: LinearSystem,
    // Condensed QP over ν ∈ R^{N·m}: H fixed, f = 2 F x; rows G ν ≤ h_fix + H_x x,
    // with the first `n_state_rows` rows being the tightened state constraints.
    h: DMatrix<f64>,
    f_x: DMatrix<f64>,
    g: DMatrix<f64>,
    h_fix: DVector<f64>,
    h_x: DMatrix<f64>,
    n_state_rows: usize,
}

impl SmpcSynthesis {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        system: &LinearSystem,
        k: DMatrix<f64>,
        horizon: usize,
        beta: f64,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        p: DMatrix<f64>,
        x_set: &Polytope,
        u_set: &Polytope,
        dist: &DisturbanceModel,
    ) -> Result<Self, SmpcError> {
        let nx = system.state_dim();
        let m = system.input_dim();
        if horizon == 0 {
            return Err(SmpcError::DimensionMismatch("horizon must be ≥ 1".into()));
        }
        if k.nrows() != m || k.ncols() != nx {
            return Err(SmpcError::DimensionMismatch(format!(
                "K is {}x{}, expected {m}x{nx}",
                k.nrows(),
                k.ncols()
            )));
        }
        if x_set.dim() != nx || u_set.dim() != m {
            return Err(SmpcError::DimensionMismatch(format!(
                "X has dimension {}, U has dimension {}",
                x_set.dim(),
                u_set.dim()
            )));
        }
        if !(0.5..1.0).contains(&beta) {
            return Err(SmpcError::BetaOutOfRange(beta));
        }
        let x_set = x_set.canonicalize()?;
        let u_set = u_set.canonicalize()?;
        let phi = &system.a + &system.b * &k;
        // Disturbance enters as Gw, so the error covariance step uses GΣ_wGᵀ.
        let sigma_gw = &system.g * &dist.sigma_w * system.g.transpose();
        let sigma_e = propagate_error_covariance(&phi, &sigma_gw, horizon);
        let mut gamma = Vec::with_capacity(horizon + 1);
        for se in &sigma_e {
            let g_k = DVector::from_fn(x_set.num_rows(), |i, _| {
                tightening_offset(&x_set.a.row(i).transpose(), se, beta).unwrap()
            });
            gamma.push(g_k);
        }

        // Closed-loop condensation: z_k = P_k x + S_k ν with z⁺ = Φz + Bν,
        // u_k = K z_k + ν_k = K P_k x + M_k ν.
        let pred = prediction_matrices(&phi, &system.b, horizon);
        let mut hc = DMatrix::<f64>::zeros(horizon * m, horizon * m);
        let mut f_x = DMatrix::<f64>::zeros(horizon * m, nx);
        for (kk, (pk, sk)) in pred.iter().take(horizon).enumerate() {
            hc += sk.transpose() * &q * sk;
            f_x += sk.transpose() * &q * pk;
            let mut mk = &k * sk;
            for j in 0..m {
                mk[(j, kk * m + j)] += 1.0;
            }
            let kp = &k * pk;
            hc += mk.transpose() * &r * &mk;
            f_x += mk.transpose() * &r * kp;
        }
        let (pn, sn) = &pred[horizon];
        hc += sn.transpose() * &p * sn;
        f_x += sn.transpose() * &p * pn;
        let h = (&hc + hc.transpose()) * 1.0; // ½νᵀHν with H = 2Hc

        let n_state_rows = horizon * x_set.num_rows();
        let n_input_rows = horizon * u_set.num_rows();
        let mut g = DMatrix::<f64>::zeros(n_state_rows + n_input_rows, horizon * m);
        let mut h_fix = DVector::<f64>::zeros(n_state_rows + n_input_rows);
        let mut h_x = DMatrix::<f64>::zeros(n_state_rows + n_input_rows, nx);
        let mut row = 0;
        for kk in 1..=horizon {
            let (pk, sk) = &pred[kk];
            for i in 0..x_set.num_rows() {
                let a_i = x_set.a.row(i);
                g.row_mut(row).copy_from(&(a_i * sk));
                h_fix[row] = x_set.b[i] - gamma[kk][i];
                h_x.row_mut(row).copy_from(&(-(a_i * pk)));
                row += 1;
            }
        }
        for kk in 0..horizon {
            let (pk, sk) = &pred[kk];
            let mut mk = &k * sk;
            for j in 0..m {
                mk[(j, kk * m + j)] += 1.0;
            }
            let kp = &k * pk;
            for i in 0..u_set.num_rows() {
                let a_i = u_set.a.row(i);
                g.row_mut(row).copy_from(&(a_i * &mk));
                h_fix[row] = u_set.b[i];
                h_x.row_mut(row).copy_from(&(-(a_i * &kp)));
                row += 1;
            }
        }

        Ok(Self {
            k,
            horizon,
            beta,
            sigma_e,
            gamma,
            q,
            r,
            p,
            system: system.clone(),
            h,
            f_x,
            g,
            h_fix,
            h_x,
            n_state_rows,
        })
    }

    /// The condensed QP at state x (tightened state rows + hard input rows).
    pub fn build_smpc_ocp(&self, x: &DVector<f64>) -> Result<QpProblem, SmpcError> {
        self.build(x, false)
    }

    fn build(&self, x: &DVector<f64>, drop_state_rows: bool) -> Result<QpProblem, SmpcError> {
        if x.len() != self.system.state_dim() {
            return Err(SmpcError::DimensionMismatch(format!(
                "state has length {}, expected {}",
                x.len(),
                self.system.state_dim()
            )));
        }
        let start = if drop_state_rows { self.n_state_rows } else { 0 };
        let rows = self.g.nrows() - start;
        Ok(QpProblem {
            h: self.h.clone(),
            f: &self.f_x * x * 2.0,
            a_ineq: self.g.rows(start, rows).into_owned(),
            b_ineq: self.h_fix.rows(start, rows) + self.h_x.rows(start, rows) * x,
            a_eq: None,
            b_eq: None,
        })
    }

    fn control_inner(&self, x: &DVector<f64>, soft: bool) -> Result<SmpcResult, SmpcError> {
        let problem = self.build(x, soft)?;
        let sol = qp::solve_qp(&problem, SolverTolerances::default())?;
        if sol.status != QpStatus::Optimal {
            return Ok(SmpcResult { status: SmpcStatus::Infeasible, u: None, nominal_next: None });
        }
        let m = self.system.input_dim();
        let nu0 = sol.x_opt.rows(0, m).into_owned();
        let u = &self.k * x + nu0;
        let nominal_next = &self.system.a * x + &self.system.b * &u;
        Ok(SmpcResult { status: SmpcStatus::Optimal, u: Some(u), nominal_next: Some(nominal_next) })
    }

    /// κˢ(x): solve the SMPC OCP; u = Kx + ν₀* on success.
    pub fn smpc_control(&self, x: &DVector<f64>) -> Result<SmpcResult, SmpcError> {
        self.control_inner(x, false)
    }

    /// Fallback for the pure-SMPC baseline: same QP with the state rows
    /// removed (inputs stay hard), so the baseline keeps producing inputs
    /// from states where the tightened OCP is infeasible.
    pub fn smpc_control_soft(&self, x: &DVector<f64>) -> Result<SmpcResult, SmpcError> {
        self.control_inner(x, true)
    }

    pub fn num_constraint_rows(&self) -> (usize, usize) {
        (self.n_state_rows, self.g.nrows() - self.n_state_rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows.len(), rows[0].len(), &rows.concat())
    }

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    fn benchmark_system() -> LinearSystem {
        LinearSystem::new(
            mat(&[&[1.0, 0.0075], &[-0.143, 0.996]]),
            mat(&[&[4.798], &[0.115]]),
            DMatrix::identity(2, 2),
        )
        .unwrap()
    }

    fn benchmark_sets() -> (Polytope, Polytope) {
        let x = Polytope::new(
            mat(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]),
            vecd(&[2.8, 10.0, 10.0, 10.0]),
        )
        .unwrap();
        let u = Polytope::new(mat(&[&[1.0], &[-1.0]]), vecd(&[0.2, 0.2])).unwrap();
        (x, u)
    }

    fn benchmark_synthesis(beta: f64) -> SmpcSynthesis {
        let sys = benchmark_system();
        let (k, p) = crate::lqr::lqr_gain(
            &sys.a,
            &sys.b,
            &mat(&[&[1.0, 0.0], &[0.0, 10.0]]),
            &mat(&[&[1.0]]),
        )
        .unwrap();
        let (x, u) = benchmark_sets();
        let dist = DisturbanceModel::new(
            DMatrix::identity(2, 2) * 0.06,
            Polytope::inf_ball(2, 0.07),
        )
        .unwrap();
        SmpcSynthesis::new(
            &sys,
            k,
            11,
            beta,
            mat(&[&[1.0, 0.0], &[0.0, 10.0]]),
            mat(&[&[1.0]]),
            p,
            &x,
            &u,
            &dist,
        )
        .unwrap()
    }

    #[test]
    fn covariance_first_step_is_sigma_w() {
        let sw = mat(&[&[0.06, 0.0], &[0.0, 0.06]]);
        let phi = mat(&[&[0.3, 0.1], &[0.0, 0.5]]);
        let seq = propagate_error_covariance(&phi, &sw, 3);
        assert!(seq[0].amax() == 0.0);
        assert!((seq[1].clone() - &sw).amax() < 1e-15);
    }

    #[test]
    fn covariance_memoryless_for_zero_phi() {
        let sw = mat(&[&[0.2, 0.05], &[0.05, 0.1]]);
        let seq = propagate_error_covariance(&DMatrix::zeros(2, 2), &sw, 4);
        for k in 1..=4 {
            assert!((seq[k].clone() - &sw).amax() < 1e-15);
        }
    }

    #[test]
    fn covariance_second_step_hand_product() {
        // Σ_{e,2} = ΦΣ_wΦᵀ + Σ_w, expanded by hand for the benchmark Φ.
        let sys = benchmark_system();
        let k = mat(&[&[-0.29, 0.49]]);
        let phi = &sys.a + &sys.b * &k;
        let sw = DMatrix::identity(2, 2) * 0.06;
        let seq = propagate_error_covariance(&phi, &sw, 2);
        let mut expect = DMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                // (ΦΣ_wΦᵀ)_{ij} = 0.06 Σ_l Φ_{il}Φ_{jl}
                let mut s = 0.0;
                for l in 0..2 {
                    s += 0.06 * phi[(i, l)] * phi[(j, l)];
                }
                expect[(i, j)] = s + if i == j { 0.06 } else { 0.0 };
            }
        }
        assert!((seq[2].clone() - expect).amax() < 1e-15);
    }

    #[test]
    fn covariance_monotone_psd() {
        let sys = benchmark_system();
        let k = mat(&[&[-0.29, 0.49]]);
        let phi = &sys.a + &sys.b * &k;
        let seq = propagate_error_covariance(&phi, &(DMatrix::identity(2, 2) * 0.06), 11);
        for k in 0..11 {
            let d = &seq[k + 1] - &seq[k];
            let min_eig = d
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig > -1e-12, "Σ_e not monotone at k={k}");
        }
    }

    #[test]
    fn tightening_zero_cases() {
        let a = vecd(&[1.0, 0.0]);
        assert_eq!(tightening_offset(&a, &DMatrix::zeros(2, 2), 0.8).unwrap(), 0.0);
        assert_eq!(
            tightening_offset(&a, &(DMatrix::identity(2, 2) * 0.06), 0.5).unwrap(),
            0.0
        );
    }

    #[test]
    fn tightening_reference_value() {
        // √0.12 · erf⁻¹(0.6), cross-checked at 20 digits externally.
        let a = vecd(&[1.0, 0.0]);
        let g = tightening_offset(&a, &(DMatrix::identity(2, 2) * 0.06), 0.8).unwrap();
        assert_abs_diff_eq!(g, 0.20615425789453786717, epsilon = 1e-12);
    }

    #[test]
    fn tightening_rejects_bad_beta() {
        let a = vecd(&[1.0, 0.0]);
        let se = DMatrix::identity(2, 2);
        assert!(matches!(
            tightening_offset(&a, &se, 0.4),
            Err(SmpcError::BetaOutOfRange(_))
        ));
        assert!(matches!(
            tightening_offset(&a, &se, 1.0),
            Err(SmpcError::BetaOutOfRange(_))
        ));
    }

    #[test]
    fn tightening_monotone_in_step_and_beta() {
        let syn = benchmark_synthesis(0.8);
        for i in 0..4 {
            for k in 0..11 {
                assert!(
                    syn.gamma[k + 1][i] >= syn.gamma[k][i] - 1e-12,
                    "γ not nondecreasing at row {i}, step {k}"
                );
            }
        }
        let a = vecd(&[1.0, 0.0]);
        let se = DMatrix::identity(2, 2) * 0.06;
        let mut prev = 0.0;
        for b in [0.55, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99] {
            let g = tightening_offset(&a, &se, b).unwrap();
            assert!(g > prev, "γ not increasing in β at {b}");
            prev = g;
        }
    }

    #[test]
    fn origin_is_fixed_point() {
        let syn = benchmark_synthesis(0.8);
        let r = syn.smpc_control(&vecd(&[0.0, 0.0])).unwrap();
        assert_eq!(r.status, SmpcStatus::Optimal);
        assert!(r.u.unwrap().amax() < 1e-7);
        assert!(r.nominal_next.unwrap().amax() < 1e-6);
    }

    #[test]
    fn horizon_one_structure() {
        // N = 1: single state block whose offsets are b − γ₁ at x = 0.
        let sys = benchmark_system();
        let (x, u) = benchmark_sets();
        let k = mat(&[&[-0.29, 0.49]]);
        let dist = DisturbanceModel::new(
            DMatrix::identity(2, 2) * 0.06,
            Polytope::inf_ball(2, 0.07),
        )
        .unwrap();
        let syn = SmpcSynthesis::new(
            &sys,
            k,
            1,
            0.8,
            mat(&[&[1.0, 0.0], &[0.0, 10.0]]),
            mat(&[&[1.0]]),
            mat(&[&[1.0, 0.0], &[0.0, 10.0]]),
            &x,
            &u,
            &dist,
        )
        .unwrap();
        let qp_problem = syn.build_smpc_ocp(&vecd(&[0.0, 0.0])).unwrap();
        let (ns, nu) = syn.num_constraint_rows();
        assert_eq!(ns, 4);
        assert_eq!(nu, 2);
        for i in 0..4 {
            let b_expect = x.canonicalize().unwrap().b[i] - syn.gamma[1][i];
            assert_abs_diff_eq!(qp_problem.b_ineq[i], b_expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn benchmark_initial_state_feasible() {
        let syn = benchmark_synthesis(0.8);
        let r = syn.smpc_control(&vecd(&[-1.3, 3.5])).unwrap();
        assert_eq!(r.status, SmpcStatus::Optimal);
        let u = r.u.unwrap();
        assert!(u.amax() <= 0.2 + 1e-8, "u = {u}");
    }

    #[test]
    fn deep_violation_is_infeasible_and_soft_recovers() {
        let syn = benchmark_synthesis(0.8);
        let x = vecd(&[9.0, 9.0]);
        let r = syn.smpc_control(&x).unwrap();
        assert_eq!(r.status, SmpcStatus::Infeasible);
        assert!(r.u.is_none());
        let soft = syn.smpc_control_soft(&x).unwrap();
        assert_eq!(soft.status, SmpcStatus::Optimal);
        assert!(soft.u.unwrap().amax() <= 0.2 + 1e-8);
    }

    #[test]
    fn no_terminal_constraint_rows() {
        // Exactly N state blocks and N input blocks: nothing on z_N beyond
        // the tightened state rows.
        let syn = benchmark_synthesis(0.8);
        let (ns, nu) = syn.num_constraint_rows();
        assert_eq!(ns, 11 * 4);
        assert_eq!(nu, 11 * 2);
    }

    #[test]
    fn control_matches_ocp_solve() {
        let syn = benchmark_synthesis(0.8);
        let x = vecd(&[-1.3, 3.5]);
        let problem = syn.build_smpc_ocp(&x).unwrap();
        let sol = qp::solve_qp(&problem, SolverTolerances::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        let r = syn.smpc_control(&x).unwrap();
        let u_expected = (&syn.k * &x)[(0, 0)] + sol.x_opt[0];
        assert_abs_diff_eq!(r.u.unwrap()[0], u_expected, epsilon = 1e-9);
    }

    #[test]
    fn one_step_violation_frequency_matches_risk_level() {
        // At a state where the first tightened constraint is active, the
        // untruncated-Gaussian one-step violation frequency of x₁ ≤ 2.8 must
        // not exceed 1 − β (+ sampling slack): the Gaussian reformulation is
        // exact when the constraint is tight.
        let syn = benchmark_synthesis(0.8);
        // Walk the zero-disturbance closed loop toward the constraint and pick
        // the state whose nominal successor is closest to the tightened bound.
        let mut x = vecd(&[-1.3, 3.5]);
        let mut probe: Option<DVector<f64>> = None;
        let mut best_slack = f64::INFINITY;
        for _ in 0..80 {
            let r = syn.smpc_control(&x).unwrap();
            let next = r.nominal_next.clone().unwrap();
            let slack = (2.8 - syn.gamma[1][0] - next[0]).abs();
            if slack < best_slack {
                best_slack = slack;
                probe = Some(next.clone());
            }
            x = next;
        }
        assert!(best_slack < 1e-6, "constraint never became active (slack {best_slack:.3e})");
        let nominal_next = probe.unwrap();
        let mut rng = crate::rng::StreamRng::new(2024, 0);
        let n = 40_000;
        let mut viol = 0;
        let s = 0.06f64.sqrt();
        for _ in 0..n {
            let (w1, _) = rng.normal_pair();
            if nominal_next[0] + s * w1 > 2.8 {
                viol += 1;
            }
        }
        let freq = viol as f64 / n as f64;
        assert!(freq <= 0.2 + 0.03, "violation frequency {freq}");
        assert!(freq >= 0.2 - 0.03, "tightening too conservative: {freq}");
    }
}
