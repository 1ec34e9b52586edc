//! One-dimensional solver with the singular shear barrier `eps s / sqrt(1 - s^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::grid::Grid1D;
use crate::onedim::{integrate_run, step_with, RunSetup, State1D, Trajectory1D, ViscousLaw};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularParams<T> {
    pub eps: T,
    pub a: T,
    pub gamma: T,
    pub cfl: T,
    pub newton_tol: T,
    pub newton_max_iter: usize,
    pub theta: T,
}

impl<T: Real> SingularParams<T> {
    pub fn new(eps: T) -> Self {
        Self {
            eps,
            a: T::one(),
            gamma: T::lit(2.0),
            cfl: T::lit(0.4),
            newton_tol: T::lit(1e-10),
            newton_max_iter: 80,
            theta: T::lit(0.95),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.eps > T::zero()) {
            errs.push("eps must be positive");
        }
        if !(self.gamma > T::one()) {
            errs.push("gamma must exceed 1");
        }
        if !(self.a > T::zero()) {
            errs.push("a must be positive");
        }
        if !(self.theta > T::zero() && self.theta < T::one()) {
            errs.push("theta must lie in (0, 1)");
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            errs.push("cfl must lie in (0, 1]");
        }
        if !(self.newton_tol > T::zero()) {
            errs.push("newton_tol must be positive");
        }
        if self.newton_max_iter == 0 {
            errs.push("newton_max_iter must be positive");
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SolverError::InvalidInput(errs.join("; ")))
        }
    }
}

/// `eps s / sqrt(1 - s^2)`; defined for `|s| < 1` only.
pub fn singular_flux<T: Real>(s: T, eps: T) -> Result<T> {
    if !(s.abs() < T::one()) {
        return Err(SolverError::ConstraintViolation {
            shear: s.to_f64_lossy(),
        });
    }
    Ok(eps * s / (T::one() - s * s).sqrt())
}

/// `eps / (1 - s^2)^(3/2)`.
pub fn singular_flux_derivative<T: Real>(s: T, eps: T) -> T {
    let r = T::one() - s * s;
    if r <= T::zero() {
        return T::infinity();
    }
    eps / (r * r.sqrt())
}

impl<T: Real> ViscousLaw<T> for SingularParams<T> {
    fn pressure_coeff(&self) -> T {
        self.a
    }
    fn gamma(&self) -> T {
        self.gamma
    }
    fn cfl(&self) -> T {
        self.cfl
    }
    fn newton_tol(&self) -> T {
        self.newton_tol
    }
    fn newton_max_iter(&self) -> usize {
        self.newton_max_iter
    }
    fn flux(&self, s: T) -> Result<T> {
        singular_flux(s, self.eps)
    }
    fn flux_derivative(&self, s: T) -> T {
        singular_flux_derivative(s, self.eps)
    }
    fn dissipation_density(&self, s: T) -> T {
        let r = T::one() - s * s;
        if r <= T::zero() {
            return T::infinity();
        }
        self.eps * s * s / r.sqrt()
    }
    fn potential(&self, s: T) -> T {
        self.eps * (T::one() - (T::one() - s * s).max(T::zero()).sqrt())
    }
    fn uniform_density(&self, s: T) -> T {
        let r = T::one() - s * s;
        if r <= T::zero() {
            return T::infinity();
        }
        self.eps / r.sqrt()
    }
    fn barrier_theta(&self) -> Option<T> {
        Some(self.theta)
    }
    fn label(&self) -> String {
        format!("eps={}", self.eps)
    }
}

pub fn step_singular<T: Real>(
    state: &State1D<T>,
    g: &Grid1D<T>,
    params: &SingularParams<T>,
    dt: T,
) -> Result<State1D<T>> {
    step_with(state, g, params, dt, None).map(|o| o.state)
}

pub fn run_singular<T: Real>(
    setup: &RunSetup<T>,
    params: &SingularParams<T>,
) -> Result<Trajectory1D<T, SingularParams<T>>> {
    params.validate()?;
    integrate_run(setup, params, None)
}

pub type SingularTrajectory<T> = Trajectory1D<T, SingularParams<T>>;
