//! Discrete-time LQR synthesis: DARE solution, feedback gain, and the
//! discrete Lyapunov equation for terminal costs.

use crate::spectral_radius;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LqrError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("DARE iteration did not converge; (A, B) may not be stabilizable")]
    NotStabilizable,
    #[error("R + BᵀPB is singular; R must be positive definite")]
    SingularInput,
    #[error("matrix has spectral radius {0:.6}, not strictly < 1")]
    Unstable(f64),
}

fn check_lqr_dims(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(), LqrError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n {
        return Err(LqrError::DimensionMismatch(format!("A is {}x{}", a.nrows(), a.ncols())));
    }
    if b.nrows() != n {
        return Err(LqrError::DimensionMismatch(format!("B must have {n} rows, got {}", b.nrows())));
    }
    if q.nrows() != n || q.ncols() != n {
        return Err(LqrError::DimensionMismatch(format!("Q must be {n}x{n}")));
    }
    if r.nrows() != m || r.ncols() != m {
        return Err(LqrError::DimensionMismatch(format!("R must be {m}x{m}")));
    }
    Ok(())
}

/// Solves the discrete algebraic Riccati equation
/// P = AᵀPA − AᵀPB (R + BᵀPB)⁻¹ BᵀPA + Q
/// by fixed-point (Riccati difference) iteration from P₀ = Q.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LqrError> {
    check_lqr_dims(a, b, q, r)?;
    let mut p = q.clone();
    for _ in 0..100_000 {
        let s = r + b.transpose() * &p * b;
        let s_inv = s.try_inverse().ok_or(LqrError::SingularInput)?;
        let apb = a.transpose() * &p * b;
        let next = a.transpose() * &p * a - &apb * s_inv * apb.transpose() + q;
        let next = (&next + next.transpose()) * 0.5;
        let diff = (&next - &p).amax();
        p = next;
        if !p.iter().all(|v| v.is_finite()) || p.amax() > 1e100 {
            return Err(LqrError::NotStabilizable);
        }
        if diff <= 1e-12 * (1.0 + p.amax()) {
            return Ok(p);
        }
    }
    Err(LqrError::NotStabilizable)
}

/// LQR gain for u = Kx: K = −(R + BᵀPB)⁻¹ BᵀPA, returned with the DARE
/// solution P.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>), LqrError> {
    let p = solve_dare(a, b, q, r)?;
    let s = r + b.transpose() * &p * b;
    let s_inv = s.try_inverse().ok_or(LqrError::SingularInput)?;
    let k = -(s_inv * b.transpose() * &p * a);
    Ok((k, p))
}

/// Solves the discrete Lyapunov equation AᵀPA − P + Q = 0 (the cost
/// convention: P is the infinite-horizon cost Σ xₖᵀQxₖ along x⁺ = Ax)
/// via the Kronecker linearization (I − Aᵀ⊗Aᵀ) vec(P) = vec(Q).
pub fn dlyap(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LqrError> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(LqrError::DimensionMismatch(format!(
            "A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 - 1e-12 {
        return Err(LqrError::Unstable(rho));
    }
    let at = a.transpose();
    let kron = at.kronecker(&at);
    let sys = DMatrix::<f64>::identity(n * n, n * n) - kron;
    let rhs = DVector::<f64>::from_iterator(n * n, q.iter().cloned());
    let sol = sys.lu().solve(&rhs).ok_or(LqrError::Unstable(rho))?;
    let p = DMatrix::<f64>::from_iterator(n, n, sol.iter().cloned());
    Ok((&p + p.transpose()) * 0.5)
}
