//! Tube-based robust backup MPC.
//!
//! Synthesis computes the disturbance invariant tube cross-section Z (an mRPI
//! outer approximation for Φ = A + BK), the tightened sets X̄ = X ⊖ Z and
//! Ū = U ⊖ KZ, and a terminal set Xf that is invariant for the nominal
//! dynamics. The backup optimal control problem steers a nominal trajectory
//! through the tightened sets into Xf; its feasible set is the implicit
//! robust domain of attraction used by the safety check.
//!
//! Two nominal-trajectory parameterizations are supported:
//! - `TubeInitialState::Fixed`: z₀ = x, u = v₀ (default);
//! - `TubeInitialState::Free`: z₀ is a decision variable with x − z₀ ∈ Z and
//!   u = v₀ + K(x − z₀).

use crate::polytope::{
    affine_map, intersect, max_invariant_set, minkowski_sum, mrpi_outer, pontryagin_diff,
    Polytope, PolytopeError,
};
use crate::qp::{self, FeasibilityResult, QpProblem, QpStatus, SolverTolerances};
use crate::smpc::prediction_matrices;
use crate::{spectral_radius, LinearSystem};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RmpcError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("closed loop A + BK has spectral radius {0:.6}, not strictly < 1")]
    UnstableClosedLoop(f64),
    #[error("tightened set is empty: {0}")]
    EmptyTightenedSet(String),
    #[error("synthesis invariant violated: {0}")]
    InvariantViolated(String),
    #[error("polytope error: {0}")]
    Polytope(#[from] PolytopeError),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl From<qp::QpError> for RmpcError {
    fn from(e: qp::QpError) -> Self {
        RmpcError::Solver(e.to_string())
    }
}

/// Controller used inside the terminal set, which determines what "invariant"
/// means for Xf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalController {
    /// v = 0: Xf is the maximal invariant set of the open-loop A inside X̄
    /// (requires A Schur stable; 0 ∈ Ū always holds for nonempty Ū).
    Zero,
    /// v = Kz: Xf is the maximal invariant set of Φ inside X̄ ∩ {z : Kz ∈ Ū}.
    TubeGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TubeInitialState {
    Fixed,
    Free,
}

#[derive(Debug, Clone)]
pub struct BackupResult {
    pub status: QpStatus,
    /// Applied input (None when infeasible).
    pub u: Option<DVector<f64>>,
    /// Optimal backup cost J^b*(x), including the state-only constant term.
    pub value: Option<f64>,
    /// Nominal trajectory z₀..z_{N_b} of the optimizer.
    pub nominal_trajectory: Vec<DVector<f64>>,
}

/// Immutable robust synthesis products plus the cached condensed backup QP.
#[derive(Debug, Clone)]
pub struct RmpcSynthesis {
    pub k: DMatrix<f64>,
    pub horizon: usize,
    pub z: Polytope,
    pub x_bar: Polytope,
    pub u_bar: Polytope,
    pub xf: Polytope,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub terminal_controller: TerminalController,
    pub tube_initial_state: TubeInitialState,
    system: LinearSystem,
    // Condensed QP over y (v, or [z₀; v] in Free mode):
    // min ½ yᵀH y + (2 F x)ᵀ y + xᵀ c_xx x  s.t.  G y ≤ h_fix + H_x x.
    h: DMatrix<f64>,
    f_x: DMatrix<f64>,
    c_xx: DMatrix<f64>,
    g: DMatrix<f64>,
    h_fix: DVector<f64>,
    h_x: DMatrix<f64>,
    // Open-loop prediction matrices for reconstructing z₁..z_N.
    pred: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

#[allow(clippy::too_many_arguments)]
pub fn synthesize_rmpc(
    system: &LinearSystem,
    k: DMatrix<f64>,
    horizon: usize,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    p: DMatrix<f64>,
    x_set: &Polytope,
    u_set: &Polytope,
    w_set: &Polytope,
    mrpi_eps: f64,
    terminal_controller: TerminalController,
    tube_initial_state: TubeInitialState,
) -> Result<RmpcSynthesis, RmpcError> {
    let nx = system.state_dim();
    let m = system.input_dim();
    if horizon == 0 {
        return Err(RmpcError::DimensionMismatch("horizon must be ≥ 1".into()));
    }
    if k.nrows() != m || k.ncols() != nx {
        return Err(RmpcError::DimensionMismatch(format!(
            "K is {}x{}, expected {m}x{nx}",
            k.nrows(),
            k.ncols()
        )));
    }
    if x_set.dim() != nx || u_set.dim() != m || w_set.dim() != system.disturbance_dim() {
        return Err(RmpcError::DimensionMismatch(format!(
            "X dim {}, U dim {}, W dim {}",
            x_set.dim(),
            u_set.dim(),
            w_set.dim()
        )));
    }
    let phi = &system.a + &system.b * &k;
    let rho = spectral_radius(&phi);
    if rho >= 1.0 {
        return Err(RmpcError::UnstableClosedLoop(rho));
    }

    let x_set = x_set.canonicalize()?;
    let u_set = u_set.canonicalize()?;
    // Disturbance enters the dynamics as Gw.
    let gw = affine_map(w_set, &system.g)?;
    let z = mrpi_outer(&phi, &gw, mrpi_eps)?;

    let x_bar = pontryagin_diff(&x_set, &z)?;
    if x_bar.is_empty()? {
        return Err(RmpcError::EmptyTightenedSet(
            "X ⊖ Z is empty; the tube does not fit inside the state constraints".into(),
        ));
    }
    let kz = affine_map(&z, &k)?;
    let u_bar = pontryagin_diff(&u_set, &kz)?;
    if u_bar.is_empty()? {
        return Err(RmpcError::EmptyTightenedSet(
            "U ⊖ KZ is empty; the tube feedback exhausts the input constraints".into(),
        ));
    }

    let xf = match terminal_controller {
        TerminalController::Zero => {
            let rho_a = spectral_radius(&system.a);
            if rho_a >= 1.0 {
                return Err(RmpcError::UnstableClosedLoop(rho_a));
            }
            max_invariant_set(&system.a, &x_bar)?
        }
        TerminalController::TubeGain => {
            let gain_rows = Polytope::new(&u_bar.a * &k, u_bar.b.clone())?;
            max_invariant_set(&phi, &intersect(&x_bar, &gain_rows)?)?
        }
    };
    if xf.is_empty()? {
        return Err(RmpcError::EmptyTightenedSet("terminal set is empty".into()));
    }

    verify_invariants(system, &phi, &k, &z, &gw, &x_bar, &u_bar, &xf, terminal_controller)?;

    // Condensed backup QP.
    let pred = prediction_matrices(&system.a, &system.b, horizon);
    let n_dec = match tube_initial_state {
        TubeInitialState::Fixed => horizon * m,
        TubeInitialState::Free => nx + horizon * m,
    };
    // In Free mode the nominal trajectory is z_k = Aᵏz₀ + S_k v: fold z₀ into
    // the decision vector by prefixing the columns of Aᵏ, so the same loops
    // cover both modes. In Fixed mode the Aᵏ part multiplies x instead.
    let row_mats: Vec<DMatrix<f64>> = pred
        .iter()
        .map(|(pk, sk)| match tube_initial_state {
            TubeInitialState::Fixed => sk.clone(),
            TubeInitialState::Free => {
                let mut mrow = DMatrix::zeros(nx, n_dec);
                mrow.view_mut((0, 0), (nx, nx)).copy_from(pk);
                mrow.view_mut((0, nx), (nx, horizon * m)).copy_from(sk);
                mrow
            }
        })
        .collect();
    let v_col = |kk: usize| match tube_initial_state {
        TubeInitialState::Fixed => kk * m,
        TubeInitialState::Free => nx + kk * m,
    };

    let mut hc = DMatrix::<f64>::zeros(n_dec, n_dec);
    let mut f_x = DMatrix::<f64>::zeros(n_dec, nx);
    let mut c_xx = DMatrix::<f64>::zeros(nx, nx);
    for kk in 0..horizon {
        let zk = &row_mats[kk];
        hc += zk.transpose() * &q * zk;
        if tube_initial_state == TubeInitialState::Fixed {
            let pk = &pred[kk].0;
            f_x += zk.transpose() * &q * pk;
            c_xx += pk.transpose() * &q * pk;
        }
        // + vₖᵀRvₖ
        for i in 0..m {
            for j in 0..m {
                hc[(v_col(kk) + i, v_col(kk) + j)] += r[(i, j)];
            }
        }
    }
    let zn = &row_mats[horizon];
    hc += zn.transpose() * &p * zn;
    if tube_initial_state == TubeInitialState::Fixed {
        let pn = &pred[horizon].0;
        f_x += zn.transpose() * &p * pn;
        c_xx += pn.transpose() * &p * pn;
    }
    let h = (&hc + hc.transpose()) * 1.0; // ½yᵀHy with H = 2Hc

    // Constraint rows: [tube anchor (Free only)] + states k=1..N + inputs +
    // terminal.
    let n_anchor = if tube_initial_state == TubeInitialState::Free { z.num_rows() } else { 0 };
    let n_rows = n_anchor
        + horizon * x_bar.num_rows()
        + horizon * u_bar.num_rows()
        + xf.num_rows();
    let mut g_mat = DMatrix::<f64>::zeros(n_rows, n_dec);
    let mut h_fix = DVector::<f64>::zeros(n_rows);
    let mut h_x = DMatrix::<f64>::zeros(n_rows, nx);
    let mut row = 0;
    if tube_initial_state == TubeInitialState::Free {
        // x − z₀ ∈ Z  ⇔  −A_Z z₀ ≤ b_Z − A_Z x.
        for i in 0..z.num_rows() {
            for j in 0..nx {
                g_mat[(row, j)] = -z.a[(i, j)];
            }
            h_fix[row] = z.b[i];
            h_x.row_mut(row).copy_from(&(-z.a.row(i)));
            row += 1;
        }
    }
    for kk in 1..=horizon {
        let zk = &row_mats[kk];
        for i in 0..x_bar.num_rows() {
            let a_i = x_bar.a.row(i);
            g_mat.row_mut(row).copy_from(&(a_i * zk));
            h_fix[row] = x_bar.b[i];
            if tube_initial_state == TubeInitialState::Fixed {
                h_x.row_mut(row).copy_from(&(-(a_i * &pred[kk].0)));
            }
            row += 1;
        }
    }
    for kk in 0..horizon {
        for i in 0..u_bar.num_rows() {
            for j in 0..m {
                g_mat[(row, v_col(kk) + j)] = u_bar.a[(i, j)];
            }
            h_fix[row] = u_bar.b[i];
            row += 1;
        }
    }
    for i in 0..xf.num_rows() {
        let a_i = xf.a.row(i);
        g_mat.row_mut(row).copy_from(&(a_i * zn));
        h_fix[row] = xf.b[i];
        if tube_initial_state == TubeInitialState::Fixed {
            h_x.row_mut(row).copy_from(&(-(a_i * &pred[horizon].0)));
        }
        row += 1;
    }
    debug_assert_eq!(row, n_rows);

    Ok(RmpcSynthesis {
        k,
        horizon,
        z,
        x_bar,
        u_bar,
        xf,
        q,
        r,
        p,
        terminal_controller,
        tube_initial_state,
        system: system.clone(),
        h,
        f_x,
        c_xx,
        g: g_mat,
        h_fix,
        h_x,
        pred,
    })
}

#[allow(clippy::too_many_arguments)]
fn verify_invariants(
    system: &LinearSystem,
    phi: &DMatrix<f64>,
    k: &DMatrix<f64>,
    z: &Polytope,
    gw: &Polytope,
    x_bar: &Polytope,
    u_bar: &Polytope,
    xf: &Polytope,
    terminal_controller: TerminalController,
) -> Result<(), RmpcError> {
    if !minkowski_sum(&affine_map(z, phi)?, gw)?.subset_of(z)? {
        return Err(RmpcError::InvariantViolated("ΦZ ⊕ GW ⊄ Z".into()));
    }
    if !xf.subset_of(x_bar)? {
        return Err(RmpcError::InvariantViolated("Xf ⊄ X̄".into()));
    }
    match terminal_controller {
        TerminalController::Zero => {
            if !affine_map(xf, &system.a)?.subset_of(xf)? {
                return Err(RmpcError::InvariantViolated("A·Xf ⊄ Xf".into()));
            }
            if !u_bar.contains(&DVector::zeros(u_bar.dim()))? {
                return Err(RmpcError::InvariantViolated("0 ∉ Ū".into()));
            }
        }
        TerminalController::TubeGain => {
            if !affine_map(xf, phi)?.subset_of(xf)? {
                return Err(RmpcError::InvariantViolated("Φ·Xf ⊄ Xf".into()));
            }
            if !affine_map(xf, k)?.subset_of(u_bar)? {
                return Err(RmpcError::InvariantViolated("K·Xf ⊄ Ū".into()));
            }
        }
    }
    Ok(())
}

impl RmpcSynthesis {
    /// The condensed backup OCP at state x.
    pub fn build_backup_ocp(&self, x: &DVector<f64>) -> Result<QpProblem, RmpcError> {
        if x.len() != self.system.state_dim() {
            return Err(RmpcError::DimensionMismatch(format!(
                "state has length {}, expected {}",
                x.len(),
                self.system.state_dim()
            )));
        }
        Ok(QpProblem {
            h: self.h.clone(),
            f: &self.f_x * x * 2.0,
            a_ineq: self.g.clone(),
            b_ineq: &self.h_fix + &self.h_x * x,
            a_eq: None,
            b_eq: None,
        })
    }

    /// κᵇ(x): solve the backup OCP; J^b*(x) includes the state-only constant.
    pub fn backup_control(&self, x: &DVector<f64>) -> Result<BackupResult, RmpcError> {
        let problem = self.build_backup_ocp(x)?;
        let sol = qp::solve_qp(&problem, SolverTolerances::default())?;
        if sol.status != QpStatus::Optimal {
            return Ok(BackupResult {
                status: sol.status,
                u: None,
                value: None,
                nominal_trajectory: vec![],
            });
        }
        let nx = self.system.state_dim();
        let m = self.system.input_dim();
        let value = sol.value + (x.transpose() * &self.c_xx * x)[(0, 0)];
        let (z0, v) = match self.tube_initial_state {
            TubeInitialState::Fixed => (x.clone(), sol.x_opt.clone()),
            TubeInitialState::Free => (
                sol.x_opt.rows(0, nx).into_owned(),
                sol.x_opt.rows(nx, self.horizon * m).into_owned(),
            ),
        };
        let u = match self.tube_initial_state {
            TubeInitialState::Fixed => v.rows(0, m).into_owned(),
            TubeInitialState::Free => v.rows(0, m) + &self.k * (x - &z0),
        };
        let mut traj = Vec::with_capacity(self.horizon + 1);
        for (pk, sk) in &self.pred {
            traj.push(pk * &z0 + sk * &v);
        }
        Ok(BackupResult { status: QpStatus::Optimal, u: Some(u), value: Some(value), nominal_trajectory: traj })
    }

    /// Membership in the implicit feasible set X₀ᵇ of the backup OCP, decided
    /// by a phase-1 LP on the cached constraint rows.
    pub fn backup_feasible(&self, x: &DVector<f64>) -> Result<bool, RmpcError> {
        if x.len() != self.system.state_dim() {
            return Err(RmpcError::DimensionMismatch(format!(
                "state has length {}, expected {}",
                x.len(),
                self.system.state_dim()
            )));
        }
        let b = &self.h_fix + &self.h_x * x;
        Ok(matches!(
            qp::solve_lp_feasibility(&self.g, &b, SolverTolerances::default())?,
            FeasibilityResult::Feasible(_)
        ))
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }
}
