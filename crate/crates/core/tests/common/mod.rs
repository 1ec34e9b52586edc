//! Independent oracles shared by the integration tests. Nothing here calls
//! the solver code it is compared against.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use thickflow_core::config::{parse_config, Config};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> Config {
    let text = std::fs::read_to_string(config_path(name)).expect("config file");
    parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e:?}"))
}

/// Dense Gaussian elimination with partial pivoting; `a` is row-major `n x n`.
pub fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x
}

/// Solution of `rho (u - u_prev)/dt - mu D_-(D_+ u) = rhs` on the periodic
/// grid with spacing `dx`, assembled as a dense cyclic-tridiagonal matrix.
pub fn linear_viscous_oracle(rho: &[f64], u_prev: &[f64], rhs: &[f64], dt: f64, dx: f64, mu: f64) -> Vec<f64> {
    let n = rho.len();
    let c = mu / (dx * dx);
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        a[i * n + i] += rho[i] / dt + 2.0 * c;
        a[i * n + (i + 1) % n] -= c;
        a[i * n + (i + n - 1) % n] -= c;
        b[i] = rho[i] * u_prev[i] / dt + rhs[i];
    }
    dense_solve(a, b)
}

/// Velocity minimising `int (mu/2)|D_c u|^2 - P div_c u` over zero-mean
/// fields, computed mode by mode from a direct (O(N^2)) DFT of `P`. `D_c`
/// is the central difference with symbol `i sin(2 pi k / n) / h`. Modes
/// where both symbols vanish are set to zero. Row-major, `x` fastest.
pub fn fourier_stokes_oracle(pressure: &[f64], nx: usize, ny: usize, mu: f64) -> (Vec<f64>, Vec<f64>) {
    let (dx, dy) = (1.0 / nx as f64, 1.0 / ny as f64);
    let n = nx * ny;
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    for k2 in 0..ny {
        for k1 in 0..nx {
            let a = (TAU * k1 as f64 / nx as f64).sin() / dx;
            let b = (TAU * k2 as f64 / ny as f64).sin() / dy;
            if a.abs() < 1e-9 && b.abs() < 1e-9 {
                continue;
            }
            // P_hat = (1/N) sum P e^{-i theta}.
            let (mut pr, mut pi) = (0.0, 0.0);
            for j in 0..ny {
                for i in 0..nx {
                    let th = TAU * (k1 * i) as f64 / nx as f64 + TAU * (k2 * j) as f64 / ny as f64;
                    pr += pressure[i + nx * j] * th.cos();
                    pi -= pressure[i + nx * j] * th.sin();
                }
            }
            pr /= n as f64;
            pi /= n as f64;
            let m11 = mu * (a * a + 0.5 * b * b);
            let m22 = mu * (b * b + 0.5 * a * a);
            let m12 = mu * 0.5 * a * b;
            let det = m11 * m22 - m12 * m12;
            // u_hat = -M^{-1} (i a, i b) P_hat; i P_hat = (-pi, pr).
            let (r1, r2) = (-a, -b);
            let (w1, w2) = ((m22 * r1 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det);
            let (qr, qi) = (-pi, pr);
            for j in 0..ny {
                for i in 0..nx {
                    let th = TAU * (k1 * i) as f64 / nx as f64 + TAU * (k2 * j) as f64 / ny as f64;
                    let re = qr * th.cos() - qi * th.sin();
                    u1[i + nx * j] += w1 * re;
                    u2[i + nx * j] += w2 * re;
                }
            }
        }
    }
    (u1, u2)
}

/// Manufactured solution `rho = 1 + 0.2 sin(2 pi (x - t))`,
/// `u = 0.3 e^{-t} sin(2 pi x)` of the forced power-law system with
/// `tau(s) = mu (s^2 + delta^2)^{(p-2)/2} s`, `p = 4`.
pub struct Manufactured {
    pub mu: f64,
    pub a: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Manufactured {
    pub fn rho(&self, t: f64, x: f64) -> f64 {
        1.0 + 0.2 * (TAU * (x - t)).sin()
    }

    pub fn u(&self, t: f64, x: f64) -> f64 {
        0.3 * (-t).exp() * (TAU * x).sin()
    }

    /// `(S_rho, S_m)` making the pair above an exact solution.
    pub fn source(&self, t: f64, x: f64) -> (f64, f64) {
        let rho = self.rho(t, x);
        let rho_x = 0.4 * PI * (TAU * (x - t)).cos();
        let rho_t = -rho_x;
        let u = self.u(t, x);
        let u_t = -u;
        let u_x = 0.6 * PI * (-t).exp() * (TAU * x).cos();
        let u_xx = -TAU * TAU * u;
        let tau_s = self.mu * (3.0 * u_x * u_x + self.delta * self.delta);
        let s_rho = rho_t + rho_x * u + rho * u_x;
        let s_m = rho_t * u + rho * u_t
            + rho_x * u * u
            + 2.0 * rho * u * u_x
            + self.a * self.gamma * rho.powf(self.gamma - 1.0) * rho_x
            - tau_s * u_xx;
        (s_rho, s_m)
    }
}

/// Discrete `L^1` error of `(rho, u)` at `t_final` for the forced `p = 4`
/// run on `n` cells.
pub fn manufactured_error(n: usize, t_final: f64) -> f64 {
    use thickflow_core::grid::{Field1D, Grid1D};
    use thickflow_core::onedim::{RunSetup, State1D};
    use thickflow_core::powerlaw::{run_forced, PowerLawParams};

    let params = PowerLawParams::<f64>::new(4.0);
    let ms = Manufactured {
        mu: params.mu,
        a: params.a,
        gamma: params.gamma,
        delta: params.delta,
    };
    let g = Grid1D::<f64>::new(n).unwrap();
    let rho0 = Field1D::from_vec(g.centers().iter().map(|&x| ms.rho(0.0, x)).collect());
    let u0 = Field1D::from_vec(g.centers().iter().map(|&x| ms.u(0.0, x)).collect());
    let setup = RunSetup::uniform_snapshots(g, State1D::new(rho0, u0, 0.0).unwrap(), t_final, 1);
    let forcing = |t: f64, x: f64| ms.source(t, x);
    let traj = run_forced(&setup, &params, &forcing).unwrap();
    let last = traj.last();
    g.centers()
        .iter()
        .enumerate()
        .map(|(i, &x)| (last.rho[i] - ms.rho(t_final, x)).abs() + (last.u[i] - ms.u(t_final, x)).abs())
        .sum::<f64>()
        * g.dx()
}
