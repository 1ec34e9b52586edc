//! One-dimensional compressible power-law solver.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::grid::{Field1D, Grid1D};
use crate::onedim::{
    implicit_solve, integrate_run, step_with, Forcing, NewtonReport, RunSetup, State1D,
    Trajectory1D, ViscousLaw,
};
use crate::scalar::Real;

/// Magnitude above which the flux is reported as overflowing.
pub const FLUX_CLAMP: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawParams<T> {
    pub p: T,
    pub mu: T,
    pub a: T,
    pub gamma: T,
    pub delta: T,
    pub cfl: T,
    pub newton_tol: T,
    pub newton_max_iter: usize,
}

impl<T: Real> PowerLawParams<T> {
    pub fn new(p: T) -> Self {
        Self {
            p,
            mu: T::one(),
            a: T::one(),
            gamma: T::lit(2.0),
            delta: T::lit(1e-8),
            cfl: T::lit(0.4),
            newton_tol: T::lit(1e-10),
            newton_max_iter: 60,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.p >= T::lit(2.0)) {
            errs.push("p must be at least 2");
        }
        if !(self.gamma > T::one()) {
            errs.push("gamma must exceed 1");
        }
        if !(self.mu > T::zero()) {
            errs.push("mu must be positive");
        }
        if !(self.a > T::zero()) {
            errs.push("a must be positive");
        }
        if !(self.delta >= T::zero()) {
            errs.push("delta must be nonnegative");
        }
        if self.p > T::lit(2.0) && self.delta == T::zero() {
            errs.push("delta must be positive when p > 2");
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

    /// Whether `p >= 1 + gamma`, the hypothesis of the stress maximum principle.
    pub fn max_principle_holds(&self) -> bool {
        self.p >= T::one() + self.gamma
    }

    /// `(s^2 + delta^2)^((p-2)/2)`, zero-safe.
    fn weight(&self, s: T) -> T {
        let q = (self.p - T::lit(2.0)) * T::lit(0.5);
        if q == T::zero() {
            return T::one();
        }
        let r = s * s + self.delta * self.delta;
        if r == T::zero() {
            return T::zero();
        }
        (q * r.ln()).exp()
    }
}

/// `mu (s^2 + delta^2)^((p-2)/2) s`.
pub fn viscous_flux<T: Real>(s: T, params: &PowerLawParams<T>) -> Result<T> {
    if !s.is_finite() {
        return Err(SolverError::FluxOverflow {
            shear: s.to_f64_lossy(),
        });
    }
    let v = params.mu * params.weight(s) * s;
    if !v.is_finite() || v.abs().to_f64_lossy() > FLUX_CLAMP {
        return Err(SolverError::FluxOverflow {
            shear: s.to_f64_lossy(),
        });
    }
    Ok(v)
}

/// `d/ds` of [`viscous_flux`].
pub fn viscous_flux_derivative<T: Real>(s: T, params: &PowerLawParams<T>) -> T {
    let w = params.weight(s);
    let r = s * s + params.delta * params.delta;
    let ratio = if r == T::zero() { T::zero() } else { s * s / r };
    let d = params.mu * w * (T::one() + (params.p - T::lit(2.0)) * ratio);
    if d.is_finite() {
        d
    } else {
        T::lit(FLUX_CLAMP).min(T::max_value())
    }
}

impl<T: Real> ViscousLaw<T> for PowerLawParams<T> {
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
        viscous_flux(s, self)
    }
    fn flux_derivative(&self, s: T) -> T {
        viscous_flux_derivative(s, self)
    }
    fn potential(&self, s: T) -> T {
        let r = s * s + self.delta * self.delta;
        let base = self.delta.powf(self.p);
        self.mu / self.p * (r.powf(self.p * T::lit(0.5)) - base)
    }
    fn label(&self) -> String {
        format!("p={}", self.p)
    }
}

/// Solves `rho (u - u_prev)/dt - d/dx viscous_flux(du/dx) = rhs`.
pub fn implicit_viscous_solve<T: Real>(
    u_prev: &Field1D<T>,
    rho: &Field1D<T>,
    rhs: &Field1D<T>,
    dt: T,
    g: &Grid1D<T>,
    params: &PowerLawParams<T>,
) -> Result<(Field1D<T>, NewtonReport)> {
    implicit_solve(u_prev, u_prev, rho, rhs, dt, g, params)
}

pub fn step<T: Real>(
    state: &State1D<T>,
    g: &Grid1D<T>,
    params: &PowerLawParams<T>,
    dt: T,
) -> Result<State1D<T>> {
    step_with(state, g, params, dt, None).map(|o| o.state)
}

/// [`step`] with an explicit source `(S_rho, S_m)(t, x)`.
pub fn step_forced<T: Real>(
    state: &State1D<T>,
    g: &Grid1D<T>,
    params: &PowerLawParams<T>,
    dt: T,
    forcing: Forcing<'_, T>,
) -> Result<State1D<T>> {
    step_with(state, g, params, dt, Some(forcing)).map(|o| o.state)
}

pub fn run<T: Real>(
    setup: &RunSetup<T>,
    params: &PowerLawParams<T>,
) -> Result<Trajectory1D<T, PowerLawParams<T>>> {
    params.validate()?;
    integrate_run(setup, params, None)
}

pub fn run_forced<T: Real>(
    setup: &RunSetup<T>,
    params: &PowerLawParams<T>,
    forcing: Forcing<'_, T>,
) -> Result<Trajectory1D<T, PowerLawParams<T>>> {
    params.validate()?;
    integrate_run(setup, params, Some(forcing))
}

pub type PowerLawTrajectory<T> = Trajectory1D<T, PowerLawParams<T>>;
