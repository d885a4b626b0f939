//! Safe stochastic model predictive control for linear systems with additive
//! bounded disturbances.
//!
//! The crate provides:
//! - a dense active-set QP/LP solver ([`qp`]),
//! - halfspace polytope algebra and invariant-set computations ([`polytope`]),
//! - discrete-time LQR synthesis ([`lqr`]),
//! - a chance-constrained stochastic MPC controller ([`smpc`]),
//! - a tube-based robust backup MPC controller ([`rmpc`]),
//! - the safety switching rule combining the two ([`safety`]),
//! - a Monte Carlo closed-loop simulation engine ([`sim`]),
//! - JSON configuration for the CLI ([`config`]).

pub mod config;
pub mod erf;
pub mod lqr;
pub mod polytope;
pub mod qp;
pub mod rmpc;
pub mod rng;
pub mod safety;
pub mod sim;
pub mod smpc;

use nalgebra::{DMatrix, DVector};

/// x⁺ = A x + B u + G w.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self, String> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(format!("A must be square, got {}x{}", a.nrows(), a.ncols()));
        }
        if b.nrows() != n {
            return Err(format!("B must have {n} rows, got {}", b.nrows()));
        }
        if g.nrows() != n {
            return Err(format!("G must have {n} rows, got {}", g.nrows()));
        }
        Ok(Self { a, b, g })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn disturbance_dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.g * w
    }
}

/// Spectral radius via complex eigenvalues.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}
