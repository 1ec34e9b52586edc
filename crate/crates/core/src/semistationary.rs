//! Two-dimensional semi-stationary power-law system.
//!
//! The velocity is slaved to the density through the convex minimisation
//!
//! ```text
//! J(v) = (mu/p) sum ((|Dv|^2 + delta^2)^(p/2) - delta^p) h^2 - a sum rho^gamma div v h^2
//! ```
//!
//! over periodic fields with zero mean, where `D` is the central-difference
//! symmetric gradient. Time stepping couples the two equations implicitly
//! through a second convex functional (see [`implicit_step`]) so that the
//! discrete energy balance holds exactly.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::fourier::Fourier2D;
use crate::grid::{div_2d, sym_grad_2d, Field2D, Grid2D, VectorField2D};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiStationaryParams<T> {
    pub p: T,
    pub mu: T,
    pub a: T,
    pub gamma: T,
    pub delta: T,
    pub cfl: T,
    /// Relative tolerance on the discrete `L^2` norm of `grad J`.
    pub newton_tol: T,
    pub newton_max_iter: usize,
}

impl<T: Real> SemiStationaryParams<T> {
    pub fn new(p: T) -> Self {
        Self {
            p,
            mu: T::one(),
            a: T::one(),
            gamma: T::lit(2.0),
            delta: T::lit(1e-8),
            cfl: T::lit(0.4),
            newton_tol: T::lit(1e-8),
            newton_max_iter: 200,
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
        if !(self.mu > T::zero() && self.a > T::zero()) {
            errs.push("mu and a must be positive");
        }
        if !(self.delta >= T::zero()) {
            errs.push("delta must be nonnegative");
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            errs.push("cfl must lie in (0, 1]");
        }
        if !(self.newton_tol > T::zero()) || self.newton_max_iter == 0 {
            errs.push("solver tolerance and iteration cap must be positive");
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SolverError::InvalidInput(errs.join("; ")))
        }
    }

    /// `mu (|D|^2 + delta^2)^((p-2)/2)`.
    #[inline]
    pub fn weight(&self, norm_sq: T) -> T {
        let q = (self.p - T::lit(2.0)) * T::lit(0.5);
        if q == T::zero() {
            return self.mu;
        }
        let r = norm_sq + self.delta * self.delta;
        if r == T::zero() {
            return T::zero();
        }
        self.mu * (q * r.ln()).exp()
    }

    /// `(mu/p)((|D|^2 + delta^2)^(p/2) - delta^p)`.
    #[inline]
    pub fn potential(&self, norm_sq: T) -> T {
        let half_p = self.p * T::lit(0.5);
        let r = norm_sq + self.delta * self.delta;
        self.mu / self.p * (r.powf(half_p) - self.delta.powf(self.p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State2D<T> {
    pub rho: Field2D<T>,
    pub u: VectorField2D<T>,
    pub t: T,
}

impl<T: Real> State2D<T> {
    pub fn mass(&self, g: &Grid2D<T>) -> T {
        self.rho.values().iter().copied().sum::<T>() * g.cell_area()
    }
}

/// Neighbour tables for periodic central differences.
#[derive(Debug, Clone)]
struct Stencil {
    east: Vec<usize>,
    west: Vec<usize>,
    north: Vec<usize>,
    south: Vec<usize>,
}

impl Stencil {
    fn new<T: Real>(g: &Grid2D<T>) -> Self {
        let n = g.cells();
        let mut s = Self {
            east: Vec::with_capacity(n),
            west: Vec::with_capacity(n),
            north: Vec::with_capacity(n),
            south: Vec::with_capacity(n),
        };
        for j in 0..g.ny() as isize {
            for i in 0..g.nx() as isize {
                s.east.push(g.idx(i + 1, j));
                s.west.push(g.idx(i - 1, j));
                s.north.push(g.idx(i, j + 1));
                s.south.push(g.idx(i, j - 1));
            }
        }
        s
    }
}

/// Fourier inverse of the constant-coefficient linearisation of `grad J`.
struct Preconditioner<T: Real> {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<T>>,
    inv_x: Arc<dyn Fft<T>>,
    fwd_y: Arc<dyn Fft<T>>,
    inv_y: Arc<dyn Fft<T>>,
    /// Central-difference symbols `sin(2 pi k / n) / h`.
    sym_x: Vec<T>,
    sym_y: Vec<T>,
}

impl<T: Real> Preconditioner<T> {
    fn new(g: &Grid2D<T>) -> Self {
        let mut planner = FftPlanner::<T>::new();
        let sym = |n: usize, h: T| -> Vec<T> {
            (0..n)
                .map(|k| {
                    (T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(n)).sin() / h
                })
                .collect()
        };
        Self {
            nx: g.nx(),
            ny: g.ny(),
            fwd_x: planner.plan_fft_forward(g.nx()),
            inv_x: planner.plan_fft_inverse(g.nx()),
            fwd_y: planner.plan_fft_forward(g.ny()),
            inv_y: planner.plan_fft_inverse(g.ny()),
            sym_x: sym(g.nx(), g.dx()),
            sym_y: sym(g.ny(), g.dy()),
        }
    }

    fn transform(&self, data: &mut [Complex<T>], forward: bool) {
        let (fx, fy) = if forward {
            (&self.fwd_x, &self.fwd_y)
        } else {
            (&self.inv_x, &self.inv_y)
        };
        for row in data.chunks_mut(self.nx) {
            fx.process(row);
        }
        let mut col = vec![Complex::new(T::zero(), T::zero()); self.ny];
        for i in 0..self.nx {
            for j in 0..self.ny {
                col[j] = data[i + self.nx * j];
            }
            fy.process(&mut col);
            for j in 0..self.ny {
                data[i + self.nx * j] = col[j];
            }
        }
    }

    /// Solves `(scale M + graddiv xi xi^T) z = r` mode by mode. The constant
    /// mode is set to zero; the other kernel modes of the central symbols
    /// (grid-scale oscillations) get a diagonal scaling.
    fn apply(&self, r1: &[T], r2: &[T], scale: T, graddiv: T) -> (Vec<T>, Vec<T>) {
        let zero = Complex::new(T::zero(), T::zero());
        let mut f1: Vec<Complex<T>> = r1.iter().map(|&v| Complex::new(v, T::zero())).collect();
        let mut f2: Vec<Complex<T>> = r2.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut f1, true);
        self.transform(&mut f2, true);
        let half = T::lit(0.5);
        let tiny = T::lit(1e-9);
        let (ax, ay) = (
            self.sym_x.iter().fold(T::zero(), |m, v| m.max(v.abs())),
            self.sym_y.iter().fold(T::zero(), |m, v| m.max(v.abs())),
        );
        let ref_scale = (ax + ay).powi(4);
        let fallback = T::one() / ((scale + graddiv) * (ax * ax + ay * ay));
        for j in 0..self.ny {
            let b = self.sym_y[j];
            for i in 0..self.nx {
                let a = self.sym_x[i];
                let k = i + self.nx * j;
                let m11 = a * a + half * b * b;
                let m22 = b * b + half * a * a;
                let m12 = half * a * b;
                if m11 * m22 - m12 * m12 <= tiny * ref_scale {
                    if k == 0 {
                        f1[k] = zero;
                        f2[k] = zero;
                    } else {
                        f1[k] = f1[k] * fallback;
                        f2[k] = f2[k] * fallback;
                    }
                    continue;
                }
                let m11 = scale * m11 + graddiv * a * a;
                let m22 = scale * m22 + graddiv * b * b;
                let m12 = scale * m12 + graddiv * a * b;
                let inv = T::one() / (m11 * m22 - m12 * m12);
                let (g1, g2) = (f1[k], f2[k]);
                f1[k] = (g1 * m22 - g2 * m12) * inv;
                f2[k] = (g2 * m11 - g1 * m12) * inv;
            }
        }
        self.transform(&mut f1, false);
        self.transform(&mut f2, false);
        let norm = T::one() / T::from_usize_lossy(self.nx * self.ny);
        (
            f1.iter().map(|c| c.re * norm).collect(),
            f2.iter().map(|c| c.re * norm).collect(),
        )
    }
}

/// Statistics of one momentum solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumReport {
    /// Newton steps.
    pub iterations: usize,
    /// Conjugate-gradient iterations over all Newton steps.
    pub linear_iterations: usize,
    pub grad_norm: f64,
    pub grad_norm_initial: f64,
    pub objective: f64,
}

/// Density update of an implicit step: `rho_new = base - dt div_c(flux_rho u)`.
struct ImplicitPart<T> {
    flux_rho: Vec<T>,
    base: Vec<T>,
    base_energy: T,
    dt: T,
}

/// The convex functional `J` for a frozen density, or its implicit-step
/// variant `Psi(u) + (E(rho_new(u)) - E(base)) / dt` built by
/// [`implicit_step`].
pub struct MomentumProblem<'a, T: Real> {
    g: &'a Grid2D<T>,
    params: &'a SemiStationaryParams<T>,
    pressure: Vec<T>,
    implicit: Option<ImplicitPart<T>>,
    /// Coefficient of the grad-div part of the Hessian used by the
    /// preconditioner.
    graddiv: T,
    stencil: Stencil,
}

impl<'a, T: Real> MomentumProblem<'a, T> {
    pub fn new(rho: &Field2D<T>, g: &'a Grid2D<T>, params: &'a SemiStationaryParams<T>) -> Self {
        let pressure = rho
            .values()
            .iter()
            .map(|&r| params.a * r.max(T::zero()).powf(params.gamma))
            .collect();
        Self {
            g,
            params,
            pressure,
            implicit: None,
            graddiv: T::zero(),
            stencil: Stencil::new(g),
        }
    }

    fn new_implicit(
        flux_rho: &Field2D<T>,
        base: Vec<T>,
        dt: T,
        g: &'a Grid2D<T>,
        params: &'a SemiStationaryParams<T>,
    ) -> Self {
        let base_energy = internal_energy(&base, g, params);
        let curv = flux_rho
            .values()
            .iter()
            .zip(&base)
            .map(|(&r, &b)| r * r * params.a * params.gamma * b.max(T::min_positive_value()).powf(params.gamma - T::lit(2.0)))
            .sum::<T>()
            / T::from_usize_lossy(g.cells());
        Self {
            g,
            params,
            pressure: vec![T::zero(); g.cells()],
            implicit: Some(ImplicitPart {
                flux_rho: flux_rho.values().to_vec(),
                base,
                base_energy,
                dt,
            }),
            graddiv: dt * curv,
            stencil: Stencil::new(g),
        }
    }

    /// `base - dt div_c(flux_rho u)`; empty for the plain functional.
    fn predicted_density(&self, u1: &[T], u2: &[T]) -> Vec<T> {
        let Some(imp) = &self.implicit else {
            return Vec::new();
        };
        let s = &self.stencil;
        let two_dx = self.g.dx() + self.g.dx();
        let two_dy = self.g.dy() + self.g.dy();
        let r = &imp.flux_rho;
        (0..self.g.cells())
            .map(|k| {
                let div = (r[s.east[k]] * u1[s.east[k]] - r[s.west[k]] * u1[s.west[k]]) / two_dx
                    + (r[s.north[k]] * u2[s.north[k]] - r[s.south[k]] * u2[s.south[k]]) / two_dy;
                imp.base[k] - imp.dt * div
            })
            .collect()
    }

    #[inline]
    fn strain(&self, u1: &[T], u2: &[T], k: usize) -> (T, T, T) {
        let s = &self.stencil;
        let two_dx = self.g.dx() + self.g.dx();
        let two_dy = self.g.dy() + self.g.dy();
        let d11 = (u1[s.east[k]] - u1[s.west[k]]) / two_dx;
        let d22 = (u2[s.north[k]] - u2[s.south[k]]) / two_dy;
        let d12 = T::lit(0.5)
            * ((u1[s.north[k]] - u1[s.south[k]]) / two_dy + (u2[s.east[k]] - u2[s.west[k]]) / two_dx);
        (d11, d12, d22)
    }

    /// `J(u)`; `+inf` on overflow or, for an implicit step, when the
    /// predicted density turns negative.
    pub fn objective(&self, u1: &[T], u2: &[T]) -> T {
        let mut acc = T::zero();
        for k in 0..self.g.cells() {
            let (d11, d12, d22) = self.strain(u1, u2, k);
            let nsq = d11 * d11 + (d12 * d12 + d12 * d12) + d22 * d22;
            acc = acc + self.params.potential(nsq) - self.pressure[k] * (d11 + d22);
        }
        let mut j = acc * self.g.cell_area();
        if let Some(imp) = &self.implicit {
            let pred = self.predicted_density(u1, u2);
            if pred.iter().any(|&r| !(r >= T::zero())) {
                return T::infinity();
            }
            j = j + (internal_energy(&pred, self.g, self.params) - imp.base_energy) / imp.dt;
        }
        if j.is_finite() {
            j
        } else {
            T::infinity()
        }
    }

    /// Discrete `L^2` gradient of `J` (Frechet derivative divided by `h^2`),
    /// restricted to zero-mean fields for an implicit step. Entries are
    /// `+inf` where the predicted density is negative.
    pub fn gradient(&self, u1: &[T], u2: &[T]) -> (Vec<T>, Vec<T>, T) {
        let n = self.g.cells();
        let mut s11 = Vec::with_capacity(n);
        let mut s12 = Vec::with_capacity(n);
        let mut s22 = Vec::with_capacity(n);
        let mut curvature = T::zero();
        for k in 0..n {
            let (d11, d12, d22) = self.strain(u1, u2, k);
            let nsq = d11 * d11 + (d12 * d12 + d12 * d12) + d22 * d22;
            let w = self.params.weight(nsq);
            curvature = curvature + w;
            s11.push(w * d11 - self.pressure[k]);
            s12.push(w * d12);
            s22.push(w * d22 - self.pressure[k]);
        }
        let s = &self.stencil;
        let two_dx = self.g.dx() + self.g.dx();
        let two_dy = self.g.dy() + self.g.dy();
        let mut g1 = Vec::with_capacity(n);
        let mut g2 = Vec::with_capacity(n);
        for k in 0..n {
            g1.push(
                -(s11[s.east[k]] - s11[s.west[k]]) / two_dx - (s12[s.north[k]] - s12[s.south[k]]) / two_dy,
            );
            g2.push(
                -(s12[s.east[k]] - s12[s.west[k]]) / two_dx - (s22[s.north[k]] - s22[s.south[k]]) / two_dy,
            );
        }
        if let Some(imp) = &self.implicit {
            // rho_flux grad_c e'(rho_new), e' the derivative of the energy density.
            let coef = self.params.a * self.params.gamma / (self.params.gamma - T::one());
            let q: Vec<T> = self
                .predicted_density(u1, u2)
                .iter()
                .map(|&r| {
                    if r >= T::zero() {
                        coef * r.powf(self.params.gamma - T::one())
                    } else {
                        T::infinity()
                    }
                })
                .collect();
            for k in 0..n {
                let r = imp.flux_rho[k];
                g1[k] = g1[k] + r * (q[s.east[k]] - q[s.west[k]]) / two_dx;
                g2[k] = g2[k] + r * (q[s.north[k]] - q[s.south[k]]) / two_dy;
            }
            remove_mean(&mut g1);
            remove_mean(&mut g2);
        }
        (g1, g2, curvature / T::from_usize_lossy(n))
    }

    /// Second derivative of the functional at `(u1, u2)`.
    fn hessian(&self, u1: &[T], u2: &[T]) -> Hessian<'_, 'a, T> {
        let n = self.g.cells();
        let mut strain = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let mut w2 = Vec::with_capacity(n);
        let half_pm4 = (self.params.p - T::lit(4.0)) * T::lit(0.5);
        for k in 0..n {
            let d = self.strain(u1, u2, k);
            let nsq = d.0 * d.0 + (d.1 * d.1 + d.1 * d.1) + d.2 * d.2;
            let r = nsq + self.params.delta * self.params.delta;
            let wk = self.params.weight(nsq);
            // 2 dw/d(nsq) = (p-2) w / r.
            let dw = if r > T::zero() {
                (self.params.p - T::lit(2.0)) * wk / r
            } else if half_pm4 == T::zero() {
                self.params.mu * (self.params.p - T::lit(2.0))
            } else {
                T::zero()
            };
            strain.push(d);
            w.push(wk);
            w2.push(dw);
        }
        let qprime = self.implicit.as_ref().map(|_| {
            self.predicted_density(u1, u2)
                .iter()
                .map(|&r| self.params.a * self.params.gamma * r.max(T::zero()).powf(self.params.gamma - T::lit(2.0)))
                .collect()
        });
        Hessian {
            prob: self,
            strain,
            w,
            w2,
            qprime,
        }
    }

    /// `(p-1) w` averaged over the four cells entering each gradient entry.
    fn local_weights(&self, u1: &[T], u2: &[T]) -> Vec<T> {
        let pm1 = (self.params.p - T::one()).max(T::one());
        let w: Vec<T> = (0..self.g.cells())
            .map(|k| {
                let (d11, d12, d22) = self.strain(u1, u2, k);
                pm1 * self.params.weight(d11 * d11 + (d12 * d12 + d12 * d12) + d22 * d22)
            })
            .collect();
        let s = &self.stencil;
        let quarter = T::lit(0.25);
        (0..self.g.cells())
            .map(|k| quarter * (w[s.east[k]] + w[s.west[k]] + w[s.north[k]] + w[s.south[k]]))
            .collect()
    }

    fn dot(&self, a1: &[T], a2: &[T], b1: &[T], b2: &[T]) -> T {
        let s: T = a1.iter().zip(b1).map(|(&x, &y)| x * y).sum::<T>()
            + a2.iter().zip(b2).map(|(&x, &y)| x * y).sum::<T>();
        s * self.g.cell_area()
    }
}

/// Frozen second derivative of a [`MomentumProblem`].
struct Hessian<'p, 'a, T: Real> {
    prob: &'p MomentumProblem<'a, T>,
    strain: Vec<(T, T, T)>,
    w: Vec<T>,
    /// `2 dw/d|D|^2`.
    w2: Vec<T>,
    qprime: Option<Vec<T>>,
}

impl<T: Real> Hessian<'_, '_, T> {
    fn apply(&self, v1: &[T], v2: &[T]) -> (Vec<T>, Vec<T>) {
        let prob = self.prob;
        let n = prob.g.cells();
        let s = &prob.stencil;
        let two_dx = prob.g.dx() + prob.g.dx();
        let two_dy = prob.g.dy() + prob.g.dy();
        let mut t11 = Vec::with_capacity(n);
        let mut t12 = Vec::with_capacity(n);
        let mut t22 = Vec::with_capacity(n);
        for k in 0..n {
            let (e11, e12, e22) = prob.strain(v1, v2, k);
            let (d11, d12, d22) = self.strain[k];
            let c = self.w2[k] * (d11 * e11 + (d12 * e12 + d12 * e12) + d22 * e22);
            t11.push(self.w[k] * e11 + c * d11);
            t12.push(self.w[k] * e12 + c * d12);
            t22.push(self.w[k] * e22 + c * d22);
        }
        let mut h1 = Vec::with_capacity(n);
        let mut h2 = Vec::with_capacity(n);
        for k in 0..n {
            h1.push(-(t11[s.east[k]] - t11[s.west[k]]) / two_dx - (t12[s.north[k]] - t12[s.south[k]]) / two_dy);
            h2.push(-(t12[s.east[k]] - t12[s.west[k]]) / two_dx - (t22[s.north[k]] - t22[s.south[k]]) / two_dy);
        }
        if let (Some(imp), Some(qp)) = (&prob.implicit, &self.qprime) {
            let r = &imp.flux_rho;
            // dq = q'(rho_new) * (-dt div_c(rho v)).
            let dq: Vec<T> = (0..n)
                .map(|k| {
                    let div = (r[s.east[k]] * v1[s.east[k]] - r[s.west[k]] * v1[s.west[k]]) / two_dx
                        + (r[s.north[k]] * v2[s.north[k]] - r[s.south[k]] * v2[s.south[k]]) / two_dy;
                    -imp.dt * qp[k] * div
                })
                .collect();
            for k in 0..n {
                h1[k] = h1[k] + r[k] * (dq[s.east[k]] - dq[s.west[k]]) / two_dx;
                h2[k] = h2[k] + r[k] * (dq[s.north[k]] - dq[s.south[k]]) / two_dy;
            }
            remove_mean(&mut h1);
            remove_mean(&mut h2);
        }
        (h1, h2)
    }
}

/// Symmetric diagonal rescaling `s_k = (mean / c_k)^(1/2)` wrapped around the
/// constant-coefficient preconditioner, `c_k` the local weight floored at
/// `WEIGHT_FLOOR` times the mean.
struct DiagonalScaling<T> {
    mean: T,
    factors: Vec<T>,
    /// The local weights vanished and `mean` is the fallback value.
    degenerate: bool,
}

const WEIGHT_FLOOR: f64 = 1e-2;

impl<T: Real> DiagonalScaling<T> {
    fn new(local: Vec<T>, abs_floor: T, fallback: T) -> Self {
        let mean = local.iter().copied().sum::<T>() / T::from_usize_lossy(local.len().max(1));
        if !(mean > abs_floor) {
            return Self {
                mean: fallback,
                factors: vec![T::one(); local.len()],
                degenerate: true,
            };
        }
        let floor = mean * T::lit(WEIGHT_FLOOR);
        let factors = local.iter().map(|&c| (mean / c.max(floor)).sqrt()).collect();
        Self {
            mean,
            factors,
            degenerate: false,
        }
    }

    fn scale(&self, v: &[T]) -> Vec<T> {
        v.iter().zip(&self.factors).map(|(&x, &f)| x * f).collect()
    }
}

fn remove_mean<T: Real>(v: &mut [T]) {
    let m = v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len());
    for x in v.iter_mut() {
        *x = *x - m;
    }
}

/// Conjugate-gradient iterations allowed per Newton step.
const MAX_LINEAR_ITER: usize = 2000;

/// Approximate minimiser of `J(u + alpha d)` in `alpha > 0`.
///
/// Works on `phi'(alpha) = <grad J(u + alpha d), d>`, which stays accurate
/// where differences of `J` itself are lost to cancellation. Stops once
/// `|phi'| <= 0.1 |phi'(0)|`. Returns the step and the gradient there.
#[allow(clippy::type_complexity)]
fn line_search<T: Real>(
    prob: &MomentumProblem<'_, T>,
    u1: &[T],
    u2: &[T],
    d1: &[T],
    d2: &[T],
    slope0: T,
    alpha0: T,
) -> Option<(T, Vec<T>, Vec<T>, T)> {
    let eval = |a: T| {
        let t1: Vec<T> = u1.iter().zip(d1).map(|(&u, &d)| u + a * d).collect();
        let t2: Vec<T> = u2.iter().zip(d2).map(|(&u, &d)| u + a * d).collect();
        let (g1, g2, w) = prob.gradient(&t1, &t2);
        let s = prob.dot(&g1, &g2, d1, d2);
        let s = if s.is_finite() { s } else { T::infinity() };
        (s, g1, g2, w)
    };
    let tol = T::lit(0.1) * slope0.abs();
    let (mut lo, mut s_lo) = (T::zero(), slope0);
    let mut a = alpha0.max(T::lit(1e-12));
    let mut best = None;
    // Bracket the sign change of phi'.
    let mut hi = T::zero();
    let mut s_hi = T::zero();
    for _ in 0..80 {
        let (s, g1, g2, w) = eval(a);
        if s.abs() <= tol {
            return Some((a, g1, g2, w));
        }
        if s > T::zero() {
            hi = a;
            s_hi = s;
            break;
        }
        lo = a;
        s_lo = s;
        best = Some((a, g1, g2, w));
        a = a + a;
    }
    if hi == T::zero() {
        return best;
    }
    // Illinois regula falsi on [lo, hi].
    let mut side = 0i8;
    for _ in 0..60 {
        let m = if s_hi.is_finite() {
            lo - s_lo * (hi - lo) / (s_hi - s_lo)
        } else {
            lo + T::lit(0.1) * (hi - lo)
        };
        let m = m.max(lo + T::lit(1e-3) * (hi - lo)).min(hi - T::lit(1e-3) * (hi - lo));
        let (s, g1, g2, w) = eval(m);
        if s.abs() <= tol {
            return Some((m, g1, g2, w));
        }
        if s < T::zero() {
            lo = m;
            s_lo = s;
            if side == -1 {
                s_hi = s_hi * T::lit(0.5);
            }
            side = -1;
            best = Some((m, g1, g2, w));
        } else {
            hi = m;
            s_hi = s;
            if side == 1 {
                s_lo = s_lo * T::lit(0.5);
            }
            side = 1;
        }
        if hi - lo <= T::lit(1e-14) * hi {
            break;
        }
    }
    best.or_else(|| {
        let (_, g1, g2, w) = eval(lo.max(T::lit(1e-300)));
        (lo > T::zero()).then_some((lo, g1, g2, w))
    })
}

/// Minimises `J` for the given density by a truncated Newton method, starting from `warm` when
/// provided. The result has zero mean.
pub fn solve_momentum<T: Real>(
    rho: &Field2D<T>,
    g: &Grid2D<T>,
    params: &SemiStationaryParams<T>,
    warm: Option<&VectorField2D<T>>,
) -> Result<(VectorField2D<T>, MomentumReport)> {
    solve_momentum_to(rho, g, params, warm, params.newton_tol)
}

/// [`solve_momentum`] with an explicit relative gradient tolerance.
pub fn solve_momentum_to<T: Real>(
    rho: &Field2D<T>,
    g: &Grid2D<T>,
    params: &SemiStationaryParams<T>,
    warm: Option<&VectorField2D<T>>,
    rel_tol: T,
) -> Result<(VectorField2D<T>, MomentumReport)> {
    if rho.len() != g.cells() {
        return Err(SolverError::InvalidInput("density does not match grid".into()));
    }
    if rho.min() < T::zero() || !rho.all_finite() {
        return Err(SolverError::InvalidInput("density must be finite and nonnegative".into()));
    }
    let prob = MomentumProblem::new(rho, g, params);
    minimise(&prob, params, warm, rel_tol)
}

/// Truncated Newton method on `prob` over zero-mean fields: each step solves
/// the Newton system by preconditioned conjugate gradients and is damped by
/// [`line_search`].
fn minimise<T: Real>(
    prob: &MomentumProblem<'_, T>,
    params: &SemiStationaryParams<T>,
    warm: Option<&VectorField2D<T>>,
    rel_tol: T,
) -> Result<(VectorField2D<T>, MomentumReport)> {
    let g = prob.g;
    let prec = Preconditioner::new(g);
    let n = g.cells();

    let zeros = vec![T::zero(); n];
    let (g0_1, g0_2, _) = prob.gradient(&zeros, &zeros);
    let g0 = prob.dot(&g0_1, &g0_2, &g0_1, &g0_2).sqrt();
    let target = rel_tol.max(params.newton_tol) * g0;
    if g0 == T::zero() {
        return Ok((
            VectorField2D::zeros(g),
            MomentumReport {
                iterations: 0,
                linear_iterations: 0,
                grad_norm: 0.0,
                grad_norm_initial: 0.0,
                objective: 0.0,
            },
        ));
    }

    let (mut u1, mut u2) = match warm {
        Some(w) if w.c1.len() == n => (w.c1.values().to_vec(), w.c2.values().to_vec()),
        _ => (zeros.clone(), zeros.clone()),
    };
    remove_mean(&mut u1);
    remove_mean(&mut u2);
    if prob.objective(&u1, &u2) > T::zero() {
        u1.clone_from(&zeros);
        u2.clone_from(&zeros);
    }

    let scale_floor = params.mu * T::lit(1e-12);
    let (mut r1, mut r2, _) = prob.gradient(&u1, &u2);
    let mut gnorm = prob.dot(&r1, &r2, &r1, &r2).sqrt();
    let mut trace: Vec<f64> = vec![gnorm.to_f64_lossy()];
    let mut iterations = 0usize;
    let mut linear_iterations = 0usize;
    let mut alpha = T::one();

    while gnorm > target {
        if iterations >= params.newton_max_iter {
            return Err(SolverError::SolverDivergence {
                iterations,
                grad_norm: gnorm.to_f64_lossy(),
                target: target.to_f64_lossy(),
                trace,
            });
        }
        iterations += 1;
        let hess = prob.hessian(&u1, &u2);
        let diag = DiagonalScaling::new(prob.local_weights(&u1, &u2), scale_floor, params.mu);
        let degenerate = diag.degenerate;
        let precondition = |v1: &[T], v2: &[T]| {
            let (a1, a2) = (diag.scale(v1), diag.scale(v2));
            let (z1, z2) = prec.apply(&a1, &a2, diag.mean, prob.graddiv);
            (diag.scale(&z1), diag.scale(&z2))
        };

        // Preconditioned CG on H d = -grad, truncated at a relative residual
        // that tightens as the gradient falls.
        let forcing = T::lit(0.5).min((gnorm / g0).sqrt());
        let cg_tol = forcing * gnorm;
        let mut d1 = vec![T::zero(); n];
        let mut d2 = vec![T::zero(); n];
        let mut res1: Vec<T> = r1.iter().map(|&v| -v).collect();
        let mut res2: Vec<T> = r2.iter().map(|&v| -v).collect();
        let (mut z1, mut z2) = precondition(&res1, &res2);
        let mut p1 = z1.clone();
        let mut p2 = z2.clone();
        let mut rz = prob.dot(&res1, &res2, &z1, &z2);
        // A vanishing Hessian (u = 0 with p > 2) leaves only the gradient step.
        let cg_budget = if degenerate { 0 } else { MAX_LINEAR_ITER };
        if degenerate {
            d1.clone_from(&z1);
            d2.clone_from(&z2);
        }
        for cg in 0..cg_budget {
            let (h1, h2) = hess.apply(&p1, &p2);
            let curv = prob.dot(&p1, &p2, &h1, &h2);
            if !(curv > T::zero()) || !(rz > T::zero()) {
                if cg == 0 {
                    d1.clone_from(&z1);
                    d2.clone_from(&z2);
                }
                break;
            }
            linear_iterations += 1;
            let step = rz / curv;
            for k in 0..n {
                d1[k] = d1[k] + step * p1[k];
                d2[k] = d2[k] + step * p2[k];
                res1[k] = res1[k] - step * h1[k];
                res2[k] = res2[k] - step * h2[k];
            }
            if prob.dot(&res1, &res2, &res1, &res2).sqrt() <= cg_tol {
                break;
            }
            (z1, z2) = precondition(&res1, &res2);
            let rz_new = prob.dot(&res1, &res2, &z1, &z2);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p1[k] = z1[k] + beta * p1[k];
                p2[k] = z2[k] + beta * p2[k];
            }
        }
        let mut slope = prob.dot(&r1, &r2, &d1, &d2);
        if !(slope < T::zero()) {
            let (y1, y2) = precondition(&r1, &r2);
            d1 = y1.iter().map(|&v| -v).collect();
            d2 = y2.iter().map(|&v| -v).collect();
            slope = prob.dot(&r1, &r2, &d1, &d2);
        }
        let Some((a, q1, q2, _)) = line_search(prob, &u1, &u2, &d1, &d2, slope, alpha.min(T::one()) ) else {
            return Err(SolverError::SolverDivergence {
                iterations,
                grad_norm: gnorm.to_f64_lossy(),
                target: target.to_f64_lossy(),
                trace,
            });
        };
        alpha = a + a;
        for k in 0..n {
            u1[k] = u1[k] + a * d1[k];
            u2[k] = u2[k] + a * d2[k];
        }
        r1 = q1;
        r2 = q2;
        gnorm = prob.dot(&r1, &r2, &r1, &r2).sqrt();
        trace.push(gnorm.to_f64_lossy());
    }
    let j = prob.objective(&u1, &u2);
    remove_mean(&mut u1);
    remove_mean(&mut u2);
    Ok((
        VectorField2D {
            c1: Field2D::from_vec(u1),
            c2: Field2D::from_vec(u2),
        },
        MomentumReport {
            iterations,
            linear_iterations,
            grad_norm: gnorm.to_f64_lossy(),
            grad_norm_initial: g0.to_f64_lossy(),
            objective: j.to_f64_lossy(),
        },
    ))
}

/// Face velocities `(east, north)` of every cell: neighbour averages.
fn face_velocities<T: Real>(u: &VectorField2D<T>, g: &Grid2D<T>) -> (Vec<T>, Vec<T>) {
    let half = T::lit(0.5);
    let mut ue = Vec::with_capacity(g.cells());
    let mut un = Vec::with_capacity(g.cells());
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            let k = g.idx(i, j);
            ue.push(half * (u.c1.values()[k] + u.c1.values()[g.idx(i + 1, j)]));
            un.push(half * (u.c2.values()[k] + u.c2.values()[g.idx(i, j + 1)]));
        }
    }
    (ue, un)
}

/// Forward-Euler upwind step of `d rho/dt + div(rho u) = 0` with face
/// velocities averaged from the two neighbouring cells. Conserves mass exactly
/// and stays nonnegative when `dt (|u1|/dx + |u2|/dy) <= 1`.
pub fn transport_density<T: Real>(
    rho: &Field2D<T>,
    u: &VectorField2D<T>,
    dt: T,
    g: &Grid2D<T>,
) -> Field2D<T> {
    let (ue, un) = face_velocities(u, g);
    let r = rho.values();
    let upwind = |v: T, own: T, next: T| {
        if v > T::zero() {
            v * own
        } else if v < T::zero() {
            v * next
        } else {
            T::zero()
        }
    };
    let n = g.cells();
    let mut fx = Vec::with_capacity(n);
    let mut fy = Vec::with_capacity(n);
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            let k = g.idx(i, j);
            fx.push(upwind(ue[k], r[k], r[g.idx(i + 1, j)]));
            fy.push(upwind(un[k], r[k], r[g.idx(i, j + 1)]));
        }
    }
    let (rx, ry) = (dt / g.dx(), dt / g.dy());
    let mut out = Vec::with_capacity(n);
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            let k = g.idx(i, j);
            let w = g.idx(i - 1, j);
            let s = g.idx(i, j - 1);
            out.push(r[k] - rx * (fx[k] - fx[w]) - ry * (fy[k] - fy[s]));
        }
    }
    Field2D::from_vec(out)
}

/// Largest stable upwind step `cfl / max(|u1|/dx + |u2|/dy)`.
pub fn stable_dt_2d<T: Real>(u: &VectorField2D<T>, g: &Grid2D<T>, cfl: T) -> T {
    let rate = u
        .c1
        .values()
        .iter()
        .zip(u.c2.values())
        .fold(T::zero(), |m, (&a, &b)| m.max(a.abs() / g.dx() + b.abs() / g.dy()));
    if rate > T::zero() {
        cfl / rate
    } else {
        T::infinity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record2D<T> {
    pub t: T,
    pub dt: T,
    pub mass: T,
    /// `(a/(gamma-1)) int rho^gamma`.
    pub energy: T,
    /// `int_0^t int mu (|Du|^2+delta^2)^((p-2)/2) |Du|^2`.
    pub dissipation_cum: T,
    pub rho_min: T,
    pub rho_max: T,
    pub du_maxnorm: T,
    pub divu_maxabs: T,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory2D<T: Real> {
    pub grid: Grid2D<T>,
    pub params: SemiStationaryParams<T>,
    pub snapshots: Vec<State2D<T>>,
    pub records: Vec<Record2D<T>>,
}

impl<T: Real> Trajectory2D<T> {
    pub fn times(&self) -> Vec<T> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunSetup2D<T> {
    pub grid: Grid2D<T>,
    pub rho0: Field2D<T>,
    pub t_final: T,
    pub snapshot_times: Vec<T>,
}

impl<T: Real> RunSetup2D<T> {
    pub fn from_fourier(grid: Grid2D<T>, rho0: &Fourier2D, t_final: T, count: usize) -> Self {
        Self {
            grid,
            rho0: rho0.sample(&grid),
            t_final,
            snapshot_times: (1..=count)
                .map(|k| t_final * T::from_usize_lossy(k) / T::from_usize_lossy(count))
                .collect(),
        }
    }
}

/// Dissipation rate `int mu w |Du|^2` and the strain extrema of `u`.
fn dissipation_rate<T: Real>(
    u: &VectorField2D<T>,
    g: &Grid2D<T>,
    params: &SemiStationaryParams<T>,
) -> (T, T, T) {
    let d = sym_grad_2d(u, g);
    let mut acc = T::zero();
    let mut dmax = T::zero();
    let mut divmax = T::zero();
    for k in 0..d.len() {
        let nsq = d.norm_sq(k);
        acc = acc + params.weight(nsq) * nsq;
        dmax = dmax.max(nsq.sqrt());
        divmax = divmax.max(d.trace(k).abs());
    }
    (acc * g.cell_area(), dmax, divmax)
}

/// Step halvings allowed before a run gives up.
const MAX_STEP_HALVINGS: usize = 10;

/// `(a/(gamma-1)) sum rho^gamma h^2`.
fn internal_energy<T: Real>(rho: &[T], g: &Grid2D<T>, params: &SemiStationaryParams<T>) -> T {
    params.a / (params.gamma - T::one())
        * rho.iter().map(|&r| r.max(T::zero()).powf(params.gamma)).sum::<T>()
        * g.cell_area()
}

/// Velocity-independent part of a Rusanov step: face diffusion with
/// coefficient `max|u|` of the two cells of the previous velocity. A doubly
/// stochastic averaging under the step's CFL bound, so it conserves mass,
/// keeps the density nonnegative and does not increase any convex integral.
fn diffused_density<T: Real>(rho: &Field2D<T>, u_prev: &VectorField2D<T>, dt: T, g: &Grid2D<T>) -> Vec<T> {
    let half = T::lit(0.5);
    let (rx, ry) = (half * dt / g.dx(), half * dt / g.dy());
    let r = rho.values();
    let (v1, v2) = (u_prev.c1.values(), u_prev.c2.values());
    let mut out = r.to_vec();
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            let k = g.idx(i, j);
            let e = g.idx(i + 1, j);
            let nn = g.idx(i, j + 1);
            let fx = rx * v1[k].abs().max(v1[e].abs()) * (r[e] - r[k]);
            let fy = ry * v2[k].abs().max(v2[nn].abs()) * (r[nn] - r[k]);
            out[k] = out[k] + fx + fy;
            out[e] = out[e] - fx;
            out[nn] = out[nn] - fy;
        }
    }
    out
}

/// One time step of the coupled system.
///
/// The new density is `rho_new = rho~ - dt div_c(rho u)`, where `rho~` is the
/// Rusanov diffusion of `rho` with speeds from `u_prev` and `div_c` is the
/// central divergence. The velocity minimises the convex functional
/// `Psi(u) + (E(rho_new(u)) - E(rho~)) / dt` over zero-mean fields. Its
/// Euler-Lagrange equation is the momentum balance with pressure gradient
/// `rho grad_c e'(rho_new)`, and convexity of `E` gives
/// `E(rho_new) + dt int mu w |Du|^2 <= E(rho~) <= E(rho)` up to the solver
/// tolerance. Fails with `Vacuum` if the new density is negative.
pub fn implicit_step<T: Real>(
    rho: &Field2D<T>,
    u_prev: &VectorField2D<T>,
    dt: T,
    g: &Grid2D<T>,
    params: &SemiStationaryParams<T>,
) -> Result<(Field2D<T>, VectorField2D<T>, MomentumReport)> {
    let base = diffused_density(rho, u_prev, dt, g);
    let prob = MomentumProblem::new_implicit(rho, base, dt, g, params);
    let (u, rep) = minimise(&prob, params, Some(u_prev), params.newton_tol)?;
    let rho_new = prob.predicted_density(u.c1.values(), u.c2.values());
    let min_rho = rho_new.iter().copied().fold(T::infinity(), T::min);
    if !(min_rho >= T::zero()) {
        return Err(SolverError::Vacuum {
            min_rho: min_rho.to_f64_lossy(),
            t: f64::NAN,
        });
    }
    Ok((Field2D::from_vec(rho_new), u, rep))
}

/// Advances the density to `t_final` by [`implicit_step`], starting from the
/// momentum minimiser of the initial density. Steps follow the upwind CFL
/// bound of the current velocity, grow by at most 1.5x, and are halved on
/// failure.
pub fn run_2d<T: Real>(
    setup: &RunSetup2D<T>,
    params: &SemiStationaryParams<T>,
) -> Result<Trajectory2D<T>> {
    params.validate()?;
    let g = setup.grid;
    if setup.rho0.len() != g.cells() || !setup.rho0.all_finite() || setup.rho0.min() < T::zero() {
        return Err(SolverError::InvalidInput(
            "initial density must match the grid and be finite and nonnegative".into(),
        ));
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

    let mut rho = setup.rho0.clone();
    let mut t = T::zero();
    let (mut u, rep) = solve_momentum(&rho, &g, params, None).map_err(|e| e.at_time(0.0))?;
    let (_, dmax, divmax) = dissipation_rate(&u, &g, params);
    let mut records = vec![Record2D {
        t,
        dt: T::zero(),
        mass: rho.values().iter().copied().sum::<T>() * g.cell_area(),
        energy: internal_energy(rho.values(), &g, params),
        dissipation_cum: T::zero(),
        rho_min: rho.min(),
        rho_max: rho.max(),
        du_maxnorm: dmax,
        divu_maxabs: divmax,
        solver_iterations: rep.iterations,
    }];
    let mut snapshots = vec![State2D {
        rho: rho.clone(),
        u: u.clone(),
        t,
    }];
    let eps_t = T::lit(1e-12);
    let max_growth = T::lit(1.5);
    let mut last_dt = T::infinity();
    for &target in &targets {
        while t < target - eps_t * (T::one() + target) {
            let remaining = target - t;
            let mut dt = stable_dt_2d(&u, &g, params.cfl).min(max_growth * last_dt);
            if dt >= remaining {
                dt = remaining;
            } else if remaining < dt + dt {
                dt = remaining * T::lit(0.5);
            }
            let t_next = if (target - (t + dt)).abs() <= eps_t * (T::one() + target) {
                target
            } else {
                t + dt
            };
            let mut attempt = 0;
            let (rn, un, rep) = loop {
                match implicit_step(&rho, &u, dt, &g, params) {
                    Ok(v) => break v,
                    Err(_) if attempt < MAX_STEP_HALVINGS => {
                        attempt += 1;
                        dt = dt * T::lit(0.5);
                    }
                    Err(e) => return Err(e.at_time(t.to_f64_lossy())),
                }
            };
            t = if attempt == 0 { t_next } else { t + dt };
            if dt < remaining {
                last_dt = dt;
            }
            rho = rn;
            u = un;
            let (rate, dmax, divmax) = dissipation_rate(&u, &g, params);
            let last = *records.last().expect("initial record");
            records.push(Record2D {
                t,
                dt,
                mass: rho.values().iter().copied().sum::<T>() * g.cell_area(),
                energy: internal_energy(rho.values(), &g, params),
                dissipation_cum: last.dissipation_cum + dt * rate,
                rho_min: rho.min(),
                rho_max: rho.max(),
                du_maxnorm: dmax,
                divu_maxabs: divmax,
                solver_iterations: rep.iterations,
            });
        }
        snapshots.push(State2D {
            rho: rho.clone(),
            u: u.clone(),
            t,
        });
    }
    Ok(Trajectory2D {
        grid: g,
        params: *params,
        snapshots,
        records,
    })
}

/// Central divergence of a velocity snapshot.
pub fn divergence<T: Real>(u: &VectorField2D<T>, g: &Grid2D<T>) -> Field2D<T> {
    div_2d(u, g)
}
