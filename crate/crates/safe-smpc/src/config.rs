//! JSON configuration for the CLI and serde helpers for nalgebra types.

use crate::lqr::{self, LqrError};
use crate::polytope::{Polytope, PolytopeError};
use crate::rmpc::{
    synthesize_rmpc, RmpcError, RmpcSynthesis, TerminalController, TubeInitialState,
};
use crate::sim::{psd_sqrt, ControllerKind, DisturbanceMode, Experiment, SimError};
use crate::smpc::{DisturbanceModel, SmpcError, SmpcSynthesis};
use crate::{spectral_radius, LinearSystem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("synthesis failed: {0}")]
    Smpc(#[from] SmpcError),
    #[error("synthesis failed: {0}")]
    Rmpc(#[from] RmpcError),
    #[error("synthesis failed: {0}")]
    Lqr(#[from] LqrError),
    #[error("invalid set: {0}")]
    Polytope(#[from] PolytopeError),
    #[error("{0}")]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeConfig {
    #[serde(with = "matrix_serde")]
    pub a: DMatrix<f64>,
    #[serde(with = "vector_serde")]
    pub b: DVector<f64>,
}

impl PolytopeConfig {
    pub fn to_polytope(&self) -> Result<Polytope, ConfigError> {
        Polytope::new(self.a.clone(), self.b.clone()).map_err(ConfigError::from)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(with = "matrix_serde")]
    pub a: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    pub b: DMatrix<f64>,
    /// Disturbance input matrix; identity when omitted.
    #[serde(default, with = "opt_matrix_serde")]
    pub g: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    #[serde(with = "matrix_serde")]
    pub sigma_w: DMatrix<f64>,
    pub w_set: PolytopeConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsConfig {
    pub x_set: PolytopeConfig,
    pub u_set: PolytopeConfig,
}

/// Either the literal string "dare" (synthesize via the Riccati equation) or
/// an explicit gain matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainConfig {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig::Named("dare".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackupTerminalCost {
    /// Lyapunov cost of the terminal controller's closed loop.
    #[default]
    Lyapunov,
    /// The Riccati solution shared with the stochastic controller.
    Dare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TerminalControllerConfig {
    #[default]
    Zero,
    TubeGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TubeInitialStateConfig {
    #[default]
    Fixed,
    Free,
}

fn default_mrpi_eps() -> f64 {
    0.6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub horizon: usize,
    pub backup_horizon: usize,
    pub beta: f64,
    #[serde(with = "matrix_serde")]
    pub q: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    pub r: DMatrix<f64>,
    #[serde(default)]
    pub gain: GainConfig,
    #[serde(default = "default_mrpi_eps")]
    pub mrpi_eps: f64,
    #[serde(default)]
    pub backup_terminal_cost: BackupTerminalCost,
    #[serde(default)]
    pub terminal_controller: TerminalControllerConfig,
    #[serde(default)]
    pub tube_initial_state: TubeInitialStateConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(with = "vector_serde")]
    pub x0: DVector<f64>,
    pub n_runs: u64,
    pub n_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfigFile {
    pub system: SystemConfig,
    pub disturbance: DisturbanceConfig,
    pub constraints: ConstraintsConfig,
    pub controller: ControllerConfig,
    pub simulation: SimulationConfig,
}

/// Syntheses plus the raw pieces the CLI needs for diagnostics.
pub struct BuiltControllers {
    pub system: LinearSystem,
    pub k: DMatrix<f64>,
    pub p_dare: DMatrix<f64>,
    pub smpc: SmpcSynthesis,
    pub rmpc: RmpcSynthesis,
    pub x_set: Polytope,
    pub u_set: Polytope,
    pub w_set: Polytope,
    pub sigma_w: DMatrix<f64>,
}

impl CliConfigFile {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: CliConfigFile = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError::Invalid(m.into()));
        let (n, m) = (self.system.a.nrows(), self.system.b.ncols());
        if self.system.a.ncols() != n {
            return err("A must be square");
        }
        if self.system.b.nrows() != n {
            return err("B row count must match the state dimension");
        }
        if let Some(g) = &self.system.g {
            if g.nrows() != n {
                return err("G row count must match the state dimension");
            }
        }
        if self.controller.q.shape() != (n, n) {
            return err("Q must be state-dimensional and square");
        }
        if self.controller.r.shape() != (m, m) {
            return err("R must be input-dimensional and square");
        }
        if !(0.5..1.0).contains(&self.controller.beta) {
            return err("beta must lie in [0.5, 1)");
        }
        if self.controller.horizon == 0 || self.controller.backup_horizon == 0 {
            return err("horizons must be at least 1");
        }
        if !(self.controller.mrpi_eps > 0.0) {
            return err("mrpi_eps must be positive");
        }
        if self.simulation.n_steps == 0 {
            return err("n_steps must be at least 1");
        }
        if self.simulation.n_runs == 0 {
            return err("n_runs must be at least 1");
        }
        if self.simulation.x0.len() != n {
            return err("x0 must be state-dimensional");
        }
        if self.constraints.x_set.a.ncols() != n {
            return err("x_set must be state-dimensional");
        }
        if self.constraints.u_set.a.ncols() != m {
            return err("u_set must be input-dimensional");
        }
        let p = self.system.g.as_ref().map_or(n, |g| g.ncols());
        if self.disturbance.sigma_w.shape() != (p, p) {
            return err("sigma_w must be disturbance-dimensional and square");
        }
        if self.disturbance.w_set.a.ncols() != p {
            return err("w_set must be disturbance-dimensional");
        }
        Ok(())
    }

    pub fn system(&self) -> Result<LinearSystem, ConfigError> {
        let n = self.system.a.nrows();
        let g = self
            .system
            .g
            .clone()
            .unwrap_or_else(|| DMatrix::identity(n, n));
        LinearSystem::new(self.system.a.clone(), self.system.b.clone(), g)
            .map_err(ConfigError::Invalid)
    }

    /// The feedback gain K and the Riccati solution P (always computed; the
    /// gain may be overridden by an explicit matrix in the config).
    pub fn gain_and_riccati(
        &self,
        sys: &LinearSystem,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), ConfigError> {
        let (k_dare, p_dare) =
            lqr::lqr_gain(&sys.a, &sys.b, &self.controller.q, &self.controller.r)?;
        let k = match &self.controller.gain {
            GainConfig::Named(s) if s == "dare" => k_dare,
            GainConfig::Named(s) => {
                return Err(ConfigError::Invalid(format!(
                    "unknown gain \"{s}\" (expected \"dare\" or a matrix)"
                )))
            }
            GainConfig::Matrix(rows) => {
                let k = to_matrix(rows).map_err(ConfigError::Invalid)?;
                if k.shape() != (sys.input_dim(), sys.state_dim()) {
                    return Err(ConfigError::Invalid(
                        "gain matrix must be input × state dimensional".into(),
                    ));
                }
                k
            }
        };
        Ok((k, p_dare))
    }

    pub fn build_controllers(&self) -> Result<BuiltControllers, ConfigError> {
        let sys = self.system()?;
        let (k, p_dare) = self.gain_and_riccati(&sys)?;
        let q = self.controller.q.clone();
        let r = self.controller.r.clone();
        let x_set = self.constraints.x_set.to_polytope()?;
        let u_set = self.constraints.u_set.to_polytope()?;
        let w_set = self.disturbance.w_set.to_polytope()?;
        let dist = DisturbanceModel::new(self.disturbance.sigma_w.clone(), w_set.clone())?;
        let smpc = SmpcSynthesis::new(
            &sys,
            k.clone(),
            self.controller.horizon,
            self.controller.beta,
            q.clone(),
            r.clone(),
            p_dare.clone(),
            &x_set,
            &u_set,
            &dist,
        )?;
        let terminal_controller = match self.controller.terminal_controller {
            TerminalControllerConfig::Zero => TerminalController::Zero,
            TerminalControllerConfig::TubeGain => TerminalController::TubeGain,
        };
        let tube_initial_state = match self.controller.tube_initial_state {
            TubeInitialStateConfig::Fixed => TubeInitialState::Fixed,
            TubeInitialStateConfig::Free => TubeInitialState::Free,
        };
        let p_backup = match self.controller.backup_terminal_cost {
            BackupTerminalCost::Dare => p_dare.clone(),
            BackupTerminalCost::Lyapunov => match terminal_controller {
                // Terminal input 0: cost-to-go of the open loop under Q.
                TerminalController::Zero => lqr::dlyap(&sys.a, &q)?,
                // Terminal input Kx: cost-to-go of Φ under Q + KᵀRK.
                TerminalController::TubeGain => {
                    let phi = &sys.a + &sys.b * &k;
                    lqr::dlyap(&phi, &(&q + k.transpose() * &r * &k))?
                }
            },
        };
        let rmpc = synthesize_rmpc(
            &sys,
            k.clone(),
            self.controller.backup_horizon,
            q,
            r,
            p_backup,
            &x_set,
            &u_set,
            &w_set,
            self.controller.mrpi_eps,
            terminal_controller,
            tube_initial_state,
        )?;
        Ok(BuiltControllers {
            system: sys,
            k,
            p_dare,
            smpc,
            rmpc,
            x_set,
            u_set,
            w_set,
            sigma_w: self.disturbance.sigma_w.clone(),
        })
    }

    /// Assemble a ready-to-run experiment for the given controller kind.
    pub fn build_experiment(
        &self,
        controller: ControllerKind,
        disturbance: DisturbanceMode,
    ) -> Result<Experiment, ConfigError> {
        let built = self.build_controllers()?;
        Ok(Experiment {
            system: built.system,
            q: self.controller.q.clone(),
            r: self.controller.r.clone(),
            x_set: built.x_set,
            sigma_sqrt: psd_sqrt(&built.sigma_w)?,
            w_vertices: built.w_set.vertices()?,
            w_set: built.w_set,
            smpc: Some(built.smpc),
            rmpc: Some(built.rmpc),
            controller,
            disturbance,
            x0: self.simulation.x0.clone(),
            n_steps: self.simulation.n_steps,
            seed: self.simulation.seed,
        })
    }

    /// ρ(A + BK), used by configuration checks.
    pub fn closed_loop_spectral_radius(&self) -> Result<f64, ConfigError> {
        let sys = self.system()?;
        let (k, _) = self.gain_and_riccati(&sys)?;
        Ok(spectral_radius(&(&sys.a + &sys.b * k)))
    }
}

/// Row-major nested arrays `[[...], ...]` ↔ `DMatrix<f64>`.
pub mod matrix_serde {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        to_matrix(&rows).map_err(serde::de::Error::custom)
    }
}

/// Optional row-major nested arrays ↔ `Option<DMatrix<f64>>`.
pub mod opt_matrix_serde {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) => super::matrix_serde::serialize(m, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<DMatrix<f64>>, D::Error> {
        let rows = Option::<Vec<Vec<f64>>>::deserialize(d)?;
        rows.map(|r| to_matrix(&r).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Flat array ↔ `DVector<f64>`.
pub mod vector_serde {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.iter().cloned().collect::<Vec<f64>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Ok(DVector::from_vec(v))
    }
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    if rows.is_empty() {
        return Err("matrix must have at least one row".into());
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("matrix rows have inconsistent lengths".into());
    }
    let flat: Vec<f64> = rows.concat();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}
