//! Small dense kernels used by the implicit viscous step.

use crate::error::{Result, SolverError};
use crate::scalar::Real;

/// Solves the periodic tridiagonal system
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` (indices mod n)
/// with the Sherman-Morrison correction of the Thomas algorithm.
pub fn solve_cyclic_tridiagonal<T: Real>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &[T],
) -> Result<Vec<T>> {
    let n = diag.len();
    if n < 3 || lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(SolverError::InvalidInput(
            "cyclic tridiagonal system needs n >= 3 and matching lengths".into(),
        ));
    }
    let alpha = upper[n - 1]; // couples row n-1 to x[0]
    let beta = lower[0]; // couples row 0 to x[n-1]
    let gamma = -diag[0];

    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;

    let x = thomas(lower, &bb, upper, rhs)?;
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(lower, &bb, upper, &u)?;

    let fact = (x[0] + beta * x[n - 1] / gamma) / (T::one() + z[0] + beta * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect())
}

fn thomas<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut denom = diag[0];
    if denom == T::zero() {
        return Err(SolverError::InvalidInput("singular tridiagonal pivot".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == T::zero() || !denom.is_finite() {
            return Err(SolverError::InvalidInput("singular tridiagonal pivot".into()));
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] = x[i] - c[i] * next;
    }
    Ok(x)
}
