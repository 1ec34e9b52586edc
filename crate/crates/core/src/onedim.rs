//! Shared machinery for the one-dimensional solvers.
//!
//! A step is split in two stages:
//!
//! 1. an explicit first-order Rusanov (local Lax-Friedrichs) update of
//!    `(rho, rho u)` that carries mass transport, momentum convection and the
//!    pressure gradient, and
//! 2. an implicit viscous stage `rho (u - u*) / dt - d/dx tau(du/dx) = rhs`
//!    solved by damped Newton with cyclic tridiagonal linear solves.
//!
//! Shear is measured on faces, `s[i] = (u[i+1] - u[i]) / dx`, which is the
//! `Forward` difference of [`crate::grid::ddx_periodic`].

use serde::Serialize;

use crate::error::{Result, SolverError};
use crate::fourier::Fourier1D;
use crate::grid::{ddx_periodic, DiffScheme, Field1D, Grid1D};
use crate::linalg::solve_cyclic_tridiagonal;
use crate::scalar::Real;

/// Maximum number of step-size halvings after a failed Newton solve.
pub const MAX_HALVINGS: usize = 10;

/// Constitutive law of the viscous stage plus the stepping constants.
pub trait ViscousLaw<T: Real>: Clone + Send + Sync {
    fn pressure_coeff(&self) -> T;
    fn gamma(&self) -> T;
    fn cfl(&self) -> T;
    fn newton_tol(&self) -> T;
    fn newton_max_iter(&self) -> usize;

    /// Viscous flux `tau(s)`.
    fn flux(&self, s: T) -> Result<T>;
    /// `d tau / d s`.
    fn flux_derivative(&self, s: T) -> T;
    /// Pointwise dissipation rate `tau(s) s`.
    fn dissipation_density(&self, s: T) -> T {
        self.flux(s).map(|t| t * s).unwrap_or(T::infinity())
    }
    /// Convex potential `W` with `W' = tau`, `W(0) = 0`.
    fn potential(&self, s: T) -> T;
    /// Density of the secondary uniformly bounded quantity, if the law has one.
    fn uniform_density(&self, _s: T) -> T {
        T::zero()
    }
    /// Fraction-to-boundary factor when the law carries the barrier `|s| < 1`.
    fn barrier_theta(&self) -> Option<T> {
        None
    }
    fn label(&self) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub struct State1D<T> {
    pub rho: Field1D<T>,
    pub u: Field1D<T>,
    pub t: T,
}

impl<T: Real> State1D<T> {
    pub fn new(rho: Field1D<T>, u: Field1D<T>, t: T) -> Result<Self> {
        if rho.len() != u.len() {
            return Err(SolverError::InvalidInput("rho and u lengths differ".into()));
        }
        if !rho.all_finite() || !u.all_finite() {
            return Err(SolverError::InvalidInput("non-finite initial data".into()));
        }
        Ok(Self { rho, u, t })
    }

    pub fn from_fourier(g: &Grid1D<T>, rho0: &Fourier1D, u0: &Fourier1D) -> Result<Self> {
        Self::new(rho0.sample(g), u0.sample(g), T::zero())
    }

    /// Face shear `(u[i+1] - u[i]) / dx`.
    pub fn shear(&self, g: &Grid1D<T>) -> Field1D<T> {
        ddx_periodic(&self.u, g, DiffScheme::Forward)
    }

    pub fn mass(&self, g: &Grid1D<T>) -> T {
        self.rho.iter().copied().sum::<T>() * g.dx()
    }

    pub fn momentum(&self, g: &Grid1D<T>) -> T {
        self.rho
            .iter()
            .zip(self.u.iter())
            .map(|(&r, &u)| r * u)
            .sum::<T>()
            * g.dx()
    }

    /// `int rho |u| dx`, the natural scale for momentum drift.
    pub fn momentum_scale(&self, g: &Grid1D<T>) -> T {
        self.rho
            .iter()
            .zip(self.u.iter())
            .map(|(&r, &u)| r * u.abs())
            .sum::<T>()
            * g.dx()
    }

    pub fn energy(&self, g: &Grid1D<T>, a: T, gamma: T) -> T {
        let half = T::lit(0.5);
        let gm1 = gamma - T::one();
        self.rho
            .iter()
            .zip(self.u.iter())
            .map(|(&r, &u)| half * r * u * u + a * r.powf(gamma) / gm1)
            .sum::<T>()
            * g.dx()
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    pub dt: T,
    pub mass: T,
    pub momentum: T,
    pub energy: T,
    pub dissipation_cum: T,
    pub rho_min: T,
    pub rho_max: T,
    pub dudx_maxabs: T,
    pub sigma_max: T,
    pub hoff_cum: T,
    pub lpnorm_term: T,
    /// Cumulative `int int` of the law's uniform density (zero for power law).
    pub uniform_cum: T,
    pub newton_iterations: usize,
}

/// Output of a 1D run: snapshots on the requested time grid plus one record per
/// accepted step (the first record describes the initial state).
#[derive(Debug, Clone)]
pub struct Trajectory1D<T: Real, L> {
    pub grid: Grid1D<T>,
    pub law: L,
    pub snapshots: Vec<State1D<T>>,
    pub records: Vec<DiagnosticsRecord<T>>,
}

impl<T: Real, L: ViscousLaw<T>> Trajectory1D<T, L> {
    pub fn initial(&self) -> &State1D<T> {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &State1D<T> {
        self.snapshots.last().expect("trajectory has an initial snapshot")
    }

    pub fn times(&self) -> Vec<T> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn min_dt(&self) -> T {
        self.records
            .iter()
            .skip(1)
            .map(|r| r.dt)
            .fold(T::infinity(), T::min)
    }
}

/// Forcing `(S_rho, S_m)(t, x)` added explicitly to the transport stage.
pub type Forcing<'a, T> = &'a (dyn Fn(T, T) -> (T, T) + Sync);

#[inline]
fn pressure<T: Real>(rho: T, a: T, gamma: T) -> T {
    a * rho.powf(gamma)
}

#[inline]
fn sound_speed<T: Real>(rho: T, a: T, gamma: T) -> T {
    (a * gamma * rho.powf(gamma - T::one())).sqrt()
}

/// Largest step allowed by the convective CFL rule
/// `dt <= cfl dx / (max|u| + c_s)`, `c_s = sqrt(a gamma max(rho)^(gamma-1))`.
pub fn stable_dt<T: Real, L: ViscousLaw<T>>(state: &State1D<T>, g: &Grid1D<T>, law: &L) -> T {
    let cs = sound_speed(state.rho.max(), law.pressure_coeff(), law.gamma());
    law.cfl() * g.dx() / (state.u.max_abs() + cs)
}

/// Explicit Rusanov update of `(rho, rho u)`; returns `(rho_new, m_star)`.
pub fn transport_stage<T: Real>(
    state: &State1D<T>,
    g: &Grid1D<T>,
    a: T,
    gamma: T,
    dt: T,
    forcing: Option<Forcing<'_, T>>,
) -> Result<(Field1D<T>, Field1D<T>)> {
    let n = g.n();
    let half = T::lit(0.5);
    let rho = state.rho.values();
    let u = state.u.values();
    let mut flux_rho = vec![T::zero(); n];
    let mut flux_m = vec![T::zero(); n];
    for i in 0..n {
        let j = (i + 1) % n;
        let (rl, rr) = (rho[i], rho[j]);
        let (ul, ur) = (u[i], u[j]);
        let (ml, mr) = (rl * ul, rr * ur);
        let lam = (ul.abs() + sound_speed(rl, a, gamma)).max(ur.abs() + sound_speed(rr, a, gamma));
        flux_rho[i] = half * (ml + mr) - half * lam * (rr - rl);
        flux_m[i] = half * (ml * ul + pressure(rl, a, gamma) + mr * ur + pressure(rr, a, gamma))
            - half * lam * (mr - ml);
    }
    let r = dt / g.dx();
    let mut rho_new = Vec::with_capacity(n);
    let mut m_star = Vec::with_capacity(n);
    for i in 0..n {
        let im = (i + n - 1) % n;
        let mut rn = rho[i] - r * (flux_rho[i] - flux_rho[im]);
        let mut mn = rho[i] * u[i] - r * (flux_m[i] - flux_m[im]);
        if let Some(f) = forcing {
            let (sr, sm) = f(state.t, g.x(i));
            rn = rn + dt * sr;
            mn = mn + dt * sm;
        }
        rho_new.push(rn);
        m_star.push(mn);
    }
    let rho_new = Field1D::from_vec(rho_new);
    let min_rho = rho_new.min();
    if !(min_rho > T::zero()) {
        return Err(SolverError::Vacuum {
            min_rho: min_rho.to_f64_lossy(),
            t: state.t.to_f64_lossy(),
        });
    }
    Ok((rho_new, Field1D::from_vec(m_star)))
}

/// Statistics of one implicit solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub damping: Vec<f64>,
}

struct ViscousProblem<'a, T: Real, L> {
    g: &'a Grid1D<T>,
    law: &'a L,
    rho: &'a [T],
    u_prev: &'a [T],
    rhs: &'a [T],
    dt: T,
}

impl<'a, T: Real, L: ViscousLaw<T>> ViscousProblem<'a, T, L> {
    fn shear(&self, u: &[T]) -> Vec<T> {
        let n = u.len();
        let dx = self.g.dx();
        (0..n).map(|i| (u[(i + 1) % n] - u[i]) / dx).collect()
    }

    fn residual(&self, u: &[T]) -> Result<Vec<T>> {
        let n = u.len();
        let dx = self.g.dx();
        let tau = self
            .shear(u)
            .into_iter()
            .map(|s| self.law.flux(s))
            .collect::<Result<Vec<T>>>()?;
        Ok((0..n)
            .map(|i| {
                let im = (i + n - 1) % n;
                self.rho[i] * (u[i] - self.u_prev[i]) / self.dt - (tau[i] - tau[im]) / dx - self.rhs[i]
            })
            .collect())
    }

    fn norm(&self, v: &[T]) -> T {
        (v.iter().map(|&x| x * x).sum::<T>() * self.g.dx()).sqrt()
    }

    /// Residual scale: inertial, forcing and flux-divergence magnitudes.
    fn scale(&self, u: &[T]) -> T {
        let dx = self.g.dx();
        let inertial: Vec<T> = self
            .rho
            .iter()
            .zip(self.u_prev)
            .map(|(&r, &v)| r * v / self.dt)
            .collect();
        let tau_scale = self
            .shear(u)
            .into_iter()
            .map(|s| self.law.flux(s).unwrap_or(T::zero()).abs())
            .fold(T::zero(), T::max)
            / dx;
        T::one() + self.norm(&inertial) + self.norm(self.rhs) + tau_scale
    }

    /// Largest step along `d` keeping every face inside the shrunken barrier.
    fn fraction_to_boundary(&self, u: &[T], d: &[T], theta: T) -> T {
        let s = self.shear(u);
        let ds = self.shear(d);
        let mut alpha = T::one();
        for (&si, &dsi) in s.iter().zip(&ds) {
            let bound = T::one() - (T::one() - theta) * (T::one() - si.abs());
            if dsi > T::zero() {
                alpha = alpha.min((bound - si) / dsi);
            } else if dsi < T::zero() {
                alpha = alpha.min((-bound - si) / dsi);
            }
        }
        alpha.max(T::zero())
    }
}

/// Solves `rho (u - u_prev) / dt - d/dx tau(du/dx) = rhs` starting from
/// `initial`, then shifts `u` by a constant so that
/// `int rho u = int rho u_prev + dt int rhs` holds to round-off.
pub fn implicit_solve<T: Real, L: ViscousLaw<T>>(
    initial: &Field1D<T>,
    u_prev: &Field1D<T>,
    rho: &Field1D<T>,
    rhs: &Field1D<T>,
    dt: T,
    g: &Grid1D<T>,
    law: &L,
) -> Result<(Field1D<T>, NewtonReport)> {
    let n = g.n();
    let dx = g.dx();
    let dx2 = dx * dx;
    let prob = ViscousProblem {
        g,
        law,
        rho: rho.values(),
        u_prev: u_prev.values(),
        rhs: rhs.values(),
        dt,
    };
    let theta = law.barrier_theta();
    let mut u = initial.values().to_vec();
    if theta.is_some() {
        if let Some(bad) = prob.shear(&u).into_iter().find(|s| s.abs() >= T::one()) {
            return Err(SolverError::ConstraintViolation {
                shear: bad.to_f64_lossy(),
            });
        }
    }

    let mut res = prob.residual(&u)?;
    let mut res_norm = prob.norm(&res);
    let tol = law.newton_tol();
    let mut report = NewtonReport {
        iterations: 0,
        residuals: vec![res_norm.to_f64_lossy()],
        damping: Vec::new(),
    };
    let roundoff_floor = T::lit(1e-14);
    let mut converged = false;

    for it in 0..law.newton_max_iter() {
        let target = tol * prob.scale(&u);
        if res_norm <= target {
            converged = true;
            break;
        }
        report.iterations = it + 1;
        let s = prob.shear(&u);
        let dtau: Vec<T> = s.iter().map(|&si| law.flux_derivative(si)).collect();
        let mut lower = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        for i in 0..n {
            let im = (i + n - 1) % n;
            diag[i] = rho[i] / dt + (dtau[i] + dtau[im]) / dx2;
            upper[i] = -dtau[i] / dx2;
            lower[i] = -dtau[im] / dx2;
        }
        let neg_res: Vec<T> = res.iter().map(|&r| -r).collect();
        let d = solve_cyclic_tridiagonal(&lower, &diag, &upper, &neg_res)?;

        let mut alpha = match theta {
            Some(th) => prob.fraction_to_boundary(&u, &d, th),
            None => T::one(),
        };
        let mut accepted = None;
        while alpha > T::lit(1e-12) {
            let trial: Vec<T> = u.iter().zip(&d).map(|(&ui, &di)| ui + alpha * di).collect();
            if let Ok(r) = prob.residual(&trial) {
                let rn = prob.norm(&r);
                if rn.is_finite() && rn <= (T::one() - T::lit(1e-4) * alpha) * res_norm {
                    accepted = Some((trial, r, rn));
                    break;
                }
            }
            alpha = alpha * T::lit(0.5);
        }
        let step_size = d.iter().fold(T::zero(), |m, v| m.max(v.abs())) * alpha;
        let u_size = u.iter().fold(T::zero(), |m, v| m.max(v.abs())) + dx;
        match accepted {
            Some((trial, r, rn)) => {
                report.damping.push(alpha.to_f64_lossy());
                report.residuals.push(rn.to_f64_lossy());
                u = trial;
                res = r;
                res_norm = rn;
                if step_size <= roundoff_floor * u_size && res_norm <= T::lit(1e-6) * prob.scale(&u) {
                    converged = true;
                    break;
                }
            }
            None => {
                // No decrease possible: accept only if already at round-off level.
                if res_norm <= T::lit(1e-6) * prob.scale(&u) && step_size <= T::lit(1e-10) * u_size {
                    converged = true;
                }
                break;
            }
        }
    }
    if !converged {
        let target = tol * prob.scale(&u);
        converged = res_norm <= target;
    }
    if !converged {
        return Err(SolverError::NewtonDivergence {
            iterations: report.iterations,
            last_residual: res_norm.to_f64_lossy(),
            target: (tol * prob.scale(&u)).to_f64_lossy(),
            damping: report.damping.clone(),
        });
    }

    // Restore the discrete momentum balance exactly; a constant shift leaves
    // every face shear, hence the flux and the barrier, untouched.
    let target: T = rho
        .iter()
        .zip(u_prev.iter())
        .zip(rhs.iter())
        .map(|((&r, &v), &f)| r * v + dt * f)
        .sum();
    let current: T = rho.iter().zip(&u).map(|(&r, &v)| r * v).sum();
    let total_rho: T = rho.iter().copied().sum();
    let shift = (target - current) / total_rho;
    for v in u.iter_mut() {
        *v = *v + shift;
    }
    Ok((Field1D::from_vec(u), report))
}

/// Result of a single accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub state: State1D<T>,
    pub newton: NewtonReport,
}

/// One split step of length `dt`.
pub fn step_with<T: Real, L: ViscousLaw<T>>(
    state: &State1D<T>,
    g: &Grid1D<T>,
    law: &L,
    dt: T,
    forcing: Option<Forcing<'_, T>>,
) -> Result<StepOutcome<T>> {
    let (rho_new, m_star) =
        transport_stage(state, g, law.pressure_coeff(), law.gamma(), dt, forcing)?;
    let u_star = m_star.zip_map(&rho_new, |m, r| m / r);
    let initial = if law.barrier_theta().is_some() {
        &state.u
    } else {
        &u_star
    };
    let zero = Field1D::zeros(g.n());
    let (u_new, newton) = implicit_solve(initial, &u_star, &rho_new, &zero, dt, g, law)?;
    if law.barrier_theta().is_some() {
        let s_max = ddx_periodic(&u_new, g, DiffScheme::Forward).max_abs();
        if s_max >= T::one() {
            return Err(SolverError::ConstraintViolation {
                shear: s_max.to_f64_lossy(),
            });
        }
    }
    Ok(StepOutcome {
        state: State1D {
            rho: rho_new,
            u: u_new,
            t: state.t + dt,
        },
        newton,
    })
}

/// Face Cauchy stress `tau(s) - a (rho_i^gamma + rho_{i+1}^gamma) / 2`.
pub fn face_stress<T: Real, L: ViscousLaw<T>>(
    state: &State1D<T>,
    g: &Grid1D<T>,
    law: &L,
) -> Result<Field1D<T>> {
    let a = law.pressure_coeff();
    let gamma = law.gamma();
    let half = T::lit(0.5);
    let s = state.shear(g);
    let n = g.n();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let p = half * (pressure(state.rho[i], a, gamma) + pressure(state.rho[(i + 1) % n], a, gamma));
        out.push(law.flux(s[i])? - p);
    }
    Ok(Field1D::from_vec(out))
}

fn record_for<T: Real, L: ViscousLaw<T>>(
    state: &State1D<T>,
    g: &Grid1D<T>,
    law: &L,
    dt: T,
    prev: Option<(&DiagnosticsRecord<T>, &State1D<T>)>,
    newton_iterations: usize,
) -> Result<DiagnosticsRecord<T>> {
    let s = state.shear(g);
    let dx = g.dx();
    let dissipation: T = s.iter().map(|&v| law.dissipation_density(v)).sum::<T>() * dx;
    let uniform: T = s.iter().map(|&v| law.uniform_density(v)).sum::<T>() * dx;
    let lpnorm: T = s.iter().map(|&v| law.potential(v)).sum::<T>() * dx;
    let sigma_max = face_stress(state, g, law)?.max();
    let (dissipation_cum, uniform_cum, hoff_cum) = match prev {
        None => (T::zero(), T::zero(), T::zero()),
        Some((rec, old)) => {
            let du = ddx_periodic(&state.u, g, DiffScheme::Central);
            let hoff: T = (0..g.n())
                .map(|i| {
                    let mat = (state.u[i] - old.u[i]) / dt + state.u[i] * du[i];
                    state.rho[i] * mat * mat
                })
                .sum::<T>()
                * dx;
            (
                rec.dissipation_cum + dt * dissipation,
                rec.uniform_cum + dt * uniform,
                rec.hoff_cum + dt * hoff,
            )
        }
    };
    Ok(DiagnosticsRecord {
        t: state.t,
        dt,
        mass: state.mass(g),
        momentum: state.momentum(g),
        energy: state.energy(g, law.pressure_coeff(), law.gamma()),
        dissipation_cum,
        rho_min: state.rho.min(),
        rho_max: state.rho.max(),
        dudx_maxabs: s.max_abs(),
        sigma_max,
        hoff_cum,
        lpnorm_term: lpnorm,
        uniform_cum,
        newton_iterations,
    })
}

/// Time integration setup shared by both 1D models.
#[derive(Debug, Clone)]
pub struct RunSetup<T> {
    pub grid: Grid1D<T>,
    pub initial: State1D<T>,
    pub t_final: T,
    /// Output times in `(0, t_final]`; `t_final` is always appended.
    pub snapshot_times: Vec<T>,
}

impl<T: Real> RunSetup<T> {
    pub fn uniform_snapshots(grid: Grid1D<T>, initial: State1D<T>, t_final: T, count: usize) -> Self {
        let times = (1..=count)
            .map(|k| t_final * T::from_usize_lossy(k) / T::from_usize_lossy(count))
            .collect();
        Self {
            grid,
            initial,
            t_final,
            snapshot_times: times,
        }
    }
}

/// Integrates to `t_final`, landing exactly on every snapshot time.
pub fn integrate_run<T: Real, L: ViscousLaw<T>>(
    setup: &RunSetup<T>,
    law: &L,
    forcing: Option<Forcing<'_, T>>,
) -> Result<Trajectory1D<T, L>> {
    let g = setup.grid;
    if setup.initial.rho.len() != g.n() {
        return Err(SolverError::InvalidInput("initial data does not match grid".into()));
    }
    if !(setup.initial.rho.min() > T::zero()) {
        return Err(SolverError::Vacuum {
            min_rho: setup.initial.rho.min().to_f64_lossy(),
            t: 0.0,
        });
    }
    if law.barrier_theta().is_some() {
        let s = setup.initial.shear(&g).max_abs();
        if s >= T::one() {
            return Err(SolverError::ConstraintViolation {
                shear: s.to_f64_lossy(),
            });
        }
    }
    let mut targets: Vec<T> = setup
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > T::zero() && t <= setup.t_final)
        .collect();
    if setup.t_final > T::zero() && targets.last().map_or(true, |&t| t < setup.t_final) {
        targets.push(setup.t_final);
    }

    let mut state = setup.initial.clone();
    let mut records = vec![record_for(&state, &g, law, T::zero(), None, 0)?];
    let mut snapshots = vec![state.clone()];
    let eps_t = T::lit(1e-12);

    for &target in &targets {
        while state.t < target - eps_t * (T::one() + target) {
            let remaining = target - state.t;
            let mut dt = stable_dt(&state, &g, law);
            if dt >= remaining {
                dt = remaining;
            } else if remaining < dt + dt {
                // split the remainder evenly instead of leaving a sliver step
                dt = remaining * T::lit(0.5);
            }
            let mut attempt = 0;
            let outcome = loop {
                match step_with(&state, &g, law, dt, forcing) {
                    Ok(o) => break o,
                    Err(e) => {
                        let retry = matches!(e, SolverError::NewtonDivergence { .. })
                            && attempt < MAX_HALVINGS;
                        if !retry {
                            return Err(e.at_time(state.t.to_f64_lossy()));
                        }
                        attempt += 1;
                        dt = dt * T::lit(0.5);
                    }
                }
            };
            let mut next = outcome.state;
            if (target - next.t).abs() <= eps_t * (T::one() + target) {
                next.t = target;
            }
            let rec = record_for(
                &next,
                &g,
                law,
                dt,
                Some((records.last().expect("initial record"), &state)),
                outcome.newton.iterations,
            )
            .map_err(|e| e.at_time(next.t.to_f64_lossy()))?;
            records.push(rec);
            state = next;
        }
        snapshots.push(state.clone());
    }

    Ok(Trajectory1D {
        grid: g,
        law: law.clone(),
        snapshots,
        records,
    })
}
