mod common;

use proptest::prelude::*;

use thickflow_core::fourier::{Fourier1D, Fourier2D};
use thickflow_core::grid::{Field1D, Grid1D, Grid2D};
use thickflow_core::harness::{powerlaw_params, setup_1d};
use thickflow_core::limit::SnapshotView;
use thickflow_core::onedim::{RunSetup, State1D};
use thickflow_core::powerlaw::{run, PowerLawParams};
use thickflow_core::semistationary::{run_2d, RunSetup2D, SemiStationaryParams};
use thickflow_core::transport_check::{
    continuity_residual, renormalized_residual, test_function_bank, time_mean_continuity, time_mean_values,
};
use thickflow_core::Result;

use common::load_config;

/// 1D trajectory on four cells whose density is `rho(t)` everywhere and
/// whose velocity vanishes.
struct Uniform {
    times: Vec<f64>,
    rho: Vec<f64>,
}

impl Uniform {
    fn new(t_final: f64, count: usize, rho: impl Fn(f64) -> f64) -> Self {
        let times: Vec<f64> = (0..=count).map(|k| t_final * k as f64 / count as f64).collect();
        let rho = times.iter().map(|&t| rho(t)).collect();
        Self { times, rho }
    }
}

impl SnapshotView for Uniform {
    fn snapshot_times(&self) -> Vec<f64> {
        self.times.clone()
    }
    fn dim(&self) -> usize {
        1
    }
    fn cell_volume(&self) -> f64 {
        0.25
    }
    fn centers(&self) -> Vec<(f64, f64)> {
        (0..4).map(|i| ((i as f64 + 0.5) / 4.0, 0.0)).collect()
    }
    fn density(&self, k: usize) -> Vec<f64> {
        vec![self.rho[k]; 4]
    }
    fn velocity(&self, _k: usize) -> Vec<Vec<f64>> {
        vec![vec![0.0; 4]]
    }
    fn shear_norm(&self, _k: usize) -> Vec<f64> {
        vec![0.0; 4]
    }
    fn stress_norm(&self, _k: usize) -> Result<Vec<f64>> {
        Ok(vec![0.0; 4])
    }
    fn divergence(&self, _k: usize) -> Vec<f64> {
        vec![0.0; 4]
    }
    fn gamma(&self) -> f64 {
        1.0
    }
    fn pressure_coeff(&self) -> f64 {
        1.0
    }
}

#[test]
fn linear_decay_gives_linear_time_mean() {
    // int rho = 1 - c t, so m(s) = c s / 2 exactly under the trapezoid rule.
    let c = 0.8;
    let traj = Uniform::new(1.0, 64, |t| 1.0 - c * t);
    let s_list = [0.5, 0.25, 0.125, 0.0625];
    for (s, m) in time_mean_values(&traj, 1.0, &s_list) {
        assert!((m - 0.5 * c * s).abs() < 1e-14, "s={s} m={m}");
    }
    let rep = time_mean_continuity(&traj, 1.0, &s_list);
    assert!(rep.pass);
    // Each halving of s halves m.
    assert!((rep.measured - 0.5).abs() < 1e-12);
}

#[test]
fn constant_trajectory_has_zero_time_mean() {
    let traj = Uniform::new(1.0, 16, |_| 2.0);
    for (_, m) in time_mean_values(&traj, 2.0, &[0.5, 0.25]) {
        assert_eq!(m, 0.0);
    }
    assert!(time_mean_continuity(&traj, 2.0, &[0.5, 0.25]).pass);
}

#[test]
fn jump_at_the_initial_time_fails() {
    // m(s) is close to 1/2 - s/2, which grows as s shrinks.
    let traj = Uniform::new(1.0, 64, |t| if t > 0.0 { 1.5 - t } else { 1.0 });
    let rep = time_mean_continuity(&traj, 1.0, &[0.5, 0.25, 0.125]);
    assert!(!rep.pass, "{rep:?}");
}

#[test]
fn s_is_snapped_to_the_snapshot_grid() {
    let traj = Uniform::new(1.0, 10, |t| 1.0 + t);
    let v = time_mean_values(&traj, 1.0, &[0.33]);
    assert!((v[0].0 - 0.3).abs() < 1e-15);
}

#[test]
fn steady_trajectories_have_zero_residuals() {
    let g = Grid1D::<f64>::new(32).unwrap();
    let s = State1D::new(Field1D::constant(32, 1.4), Field1D::constant(32, 0.3), 0.0).unwrap();
    let traj = run(&RunSetup::uniform_snapshots(g, s, 0.1, 40), &PowerLawParams::new(4.0)).unwrap();
    for phi in test_function_bank(1, 10, 1, 0.1) {
        assert!(continuity_residual(&traj, &phi) < 1e-10);
        assert!(renormalized_residual(&traj, 2.0, &phi) < 1e-10);
    }

    let g2 = Grid2D::<f64>::new(12, 12).unwrap();
    let setup = RunSetup2D::from_fourier(g2, &Fourier2D::constant(1.2), 0.05, 40);
    let traj2 = run_2d(&setup, &SemiStationaryParams::new(4.0)).unwrap();
    for phi in test_function_bank(1, 10, 2, 0.05) {
        assert!(continuity_residual(&traj2, &phi) < 1e-10);
        assert!(renormalized_residual(&traj2, 2.0, &phi) < 1e-10);
    }
}

#[test]
fn renormalization_with_unit_exponent_is_the_continuity_residual() {
    let g = Grid1D::<f64>::new(64).unwrap();
    let rho = Fourier1D {
        mean: 1.0,
        cos: vec![],
        sin: vec![0.3],
    };
    let u = Fourier1D {
        mean: 0.0,
        cos: vec![0.05],
        sin: vec![],
    };
    let s = State1D::from_fourier(&g, &rho, &u).unwrap();
    let traj = run(&RunSetup::uniform_snapshots(g, s, 0.05, 32), &PowerLawParams::new(4.0)).unwrap();
    for phi in test_function_bank(2, 5, 1, 0.05) {
        assert_eq!(renormalized_residual(&traj, 1.0, &phi), continuity_residual(&traj, &phi));
    }
}

#[test]
fn continuity_residual_halves_under_refinement() {
    let coarse_cfg = load_config("reference_1d.ini");
    let mut fine_cfg = coarse_cfg.clone();
    fine_cfg.n *= 2;
    let count = coarse_cfg.time.snapshot_times.len();
    fine_cfg.time.snapshot_times = (1..=2 * count)
        .map(|k| fine_cfg.time.t_final * k as f64 / (2 * count) as f64)
        .collect();
    let residual = |c: &thickflow_core::config::Config| {
        let traj = run(&setup_1d(c).unwrap(), &powerlaw_params(c, c.params.p)).unwrap();
        test_function_bank(c.initial.seed, 10, 1, c.time.t_final)
            .iter()
            .map(|phi| continuity_residual(&traj, phi))
            .fold(0.0, f64::max)
    };
    let (rc, rf) = (residual(&coarse_cfg), residual(&fine_cfg));
    assert!(rc / rf >= 1.8, "{rc} -> {rf}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn test_functions_vanish_at_the_ends_and_differentiate_consistently(
        seed in any::<u64>(),
        dim in 1usize..=2,
        t in 0.01f64..0.99,
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
    ) {
        let bank = test_function_bank(seed, 3, dim, 1.0);
        for phi in &bank {
            prop_assert!(phi.eval(0.0, x, y).abs() < 1e-15);
            prop_assert!(phi.eval(1.0, x, y).abs() < 1e-15);
            let (v, vt, vx, vy) = phi.parts(t, x, y);
            prop_assert!((v - phi.eval(t, x, y)).abs() < 1e-14);
            let h = 1e-6;
            let fdt = (phi.eval(t + h, x, y) - phi.eval(t - h, x, y)) / (2.0 * h);
            let fdx = (phi.eval(t, x + h, y) - phi.eval(t, x - h, y)) / (2.0 * h);
            let fdy = (phi.eval(t, x, y + h) - phi.eval(t, x, y - h)) / (2.0 * h);
            prop_assert!((fdt - vt).abs() < 1e-6 * (1.0 + vt.abs()));
            prop_assert!((fdx - vx).abs() < 1e-6 * (1.0 + vx.abs()));
            prop_assert!((fdy - vy).abs() < 1e-6 * (1.0 + vy.abs()));
        }
    }

    #[test]
    fn time_mean_is_nonnegative(seed in any::<u64>()) {
        let amp = (seed % 1000) as f64 / 1000.0;
        let traj = Uniform::new(1.0, 32, |t| 1.0 + amp * (7.0 * t).sin());
        for (_, m) in time_mean_values(&traj, 2.0, &[1.0, 0.5, 0.25]) {
            prop_assert!(m >= 0.0);
        }
    }
}
