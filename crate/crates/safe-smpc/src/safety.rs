//! Safety switching between the stochastic and the backup controller.
//!
//! At each step the stochastic controller's input is accepted only if the
//! nominal successor it produces keeps the backup OCP feasible under every
//! extreme disturbance; otherwise the backup controller acts. Feasibility of
//! the backup OCP at the current state is the safe-start precondition.

use crate::polytope::{Polytope, PolytopeError};
use crate::qp::QpStatus;
use crate::rmpc::{RmpcError, RmpcSynthesis};
use crate::smpc::{SmpcError, SmpcStatus, SmpcSynthesis};
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SafetyError {
    #[error("backup OCP infeasible at the current state; the safety guarantee is void")]
    UnsafeStart,
    #[error("stochastic controller error: {0}")]
    Smpc(#[from] SmpcError),
    #[error("backup controller error: {0}")]
    Rmpc(#[from] RmpcError),
    #[error("polytope error: {0}")]
    Polytope(#[from] PolytopeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Stochastic,
    Backup,
}

/// Why the step ended up in its mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchReason {
    /// SMPC feasible and its nominal successor passed the safety check.
    SmpcAccepted,
    /// SMPC OCP was infeasible at x.
    SmpcInfeasible,
    /// SMPC feasible, but some extreme disturbance leaves the backup domain.
    SafetyCheckFailed,
}

#[derive(Debug, Clone)]
pub struct ModeDecision {
    pub mode: Mode,
    pub u: DVector<f64>,
    pub reason: SwitchReason,
    /// Nominal successor proposed by SMPC (present when SMPC was feasible).
    pub smpc_nominal_next: Option<DVector<f64>>,
    /// Per-vertex safety check outcomes (empty when the check never ran).
    pub checks: Vec<bool>,
    /// Optimal backup cost J^b*, computed when the backup controller acted.
    pub backup_value: Option<f64>,
    /// OCPs solved for this step: 1 in stochastic mode, 2 in backup mode.
    pub ocp_solves: u32,
}

/// Does x⁺ = nominal_next + Gw stay inside the backup feasible set for every
/// vertex w of the disturbance set?
pub fn safety_check(
    nominal_next: &DVector<f64>,
    rmpc: &RmpcSynthesis,
    w_vertices: &[DVector<f64>],
) -> Result<Vec<bool>, SafetyError> {
    let g = &rmpc.system().g;
    let mut out = Vec::with_capacity(w_vertices.len());
    for w in w_vertices {
        out.push(rmpc.backup_feasible(&(nominal_next + g * w))?);
    }
    Ok(out)
}

/// One closed-loop decision of the switching controller.
///
/// Precondition: the backup OCP is feasible at `x` (check once at the start
/// of a run with [`RmpcSynthesis::backup_feasible`]). When the precondition
/// holds the backup branch cannot fail, and an infeasible backup solve is
/// reported as [`SafetyError::UnsafeStart`].
pub fn safe_step(
    x: &DVector<f64>,
    smpc: &SmpcSynthesis,
    rmpc: &RmpcSynthesis,
    w_vertices: &[DVector<f64>],
) -> Result<ModeDecision, SafetyError> {
    let s = smpc.smpc_control(x)?;
    if s.status == SmpcStatus::Optimal {
        let nominal_next = s.nominal_next.expect("optimal SMPC result carries a successor");
        let checks = safety_check(&nominal_next, rmpc, w_vertices)?;
        if checks.iter().all(|&ok| ok) {
            return Ok(ModeDecision {
                mode: Mode::Stochastic,
                u: s.u.expect("optimal SMPC result carries an input"),
                reason: SwitchReason::SmpcAccepted,
                smpc_nominal_next: Some(nominal_next),
                checks,
                backup_value: None,
                ocp_solves: 1,
            });
        }
        let b = rmpc.backup_control(x)?;
        if b.status != QpStatus::Optimal {
            return Err(SafetyError::UnsafeStart);
        }
        return Ok(ModeDecision {
            mode: Mode::Backup,
            u: b.u.expect("optimal backup result carries an input"),
            reason: SwitchReason::SafetyCheckFailed,
            smpc_nominal_next: Some(nominal_next),
            checks,
            backup_value: b.value,
            ocp_solves: 2,
        });
    }
    let b = rmpc.backup_control(x)?;
    if b.status != QpStatus::Optimal {
        return Err(SafetyError::UnsafeStart);
    }
    Ok(ModeDecision {
        mode: Mode::Backup,
        u: b.u.expect("optimal backup result carries an input"),
        reason: SwitchReason::SmpcInfeasible,
        smpc_nominal_next: None,
        checks: vec![],
        backup_value: b.value,
        ocp_solves: 2,
    })
}

/// Vertices of the disturbance support, as used by [`safe_step`].
pub fn disturbance_vertices(w_set: &Polytope) -> Result<Vec<DVector<f64>>, PolytopeError> {
    w_set.vertices()
}
