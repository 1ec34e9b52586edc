mod common;

use std::f64::consts::TAU;

use proptest::prelude::*;

use thickflow_core::fourier::{Fourier2D, Mode2D, ModeKind};
use thickflow_core::grid::{integrate_2d, Field2D, Grid2D, VectorField2D};
use thickflow_core::rng::SplitMix64;
use thickflow_core::semistationary::{
    run_2d, solve_momentum, solve_momentum_to, stable_dt_2d, transport_density, MomentumProblem, RunSetup2D,
    SemiStationaryParams,
};
use thickflow_core::SolverError;

use common::fourier_stokes_oracle;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn p2_momentum_matches_fourier_oracle_on_a_rectangle() {
    let g = Grid2D::<f64>::new(16, 24).unwrap();
    let rho = g.sample(|x, y| 1.0 + 0.3 * (TAU * x).cos() * (TAU * y).cos() + 0.2 * (2.0 * TAU * y).sin());
    let mut params = SemiStationaryParams::new(2.0);
    params.mu = 0.7;
    params.a = 1.5;
    let (u, _) = solve_momentum_to(&rho, &g, &params, None, 1e-13).unwrap();
    let pressure: Vec<f64> = rho.values().iter().map(|r| params.a * r.powf(params.gamma)).collect();
    let (o1, o2) = fourier_stokes_oracle(&pressure, 16, 24, params.mu);
    assert!(max_diff(u.c1.values(), &o1) < 1e-8);
    assert!(max_diff(u.c2.values(), &o2) < 1e-8);
}

#[test]
fn gradient_matches_finite_differences() {
    let g = Grid2D::<f64>::new(16, 16).unwrap();
    let rho = g.sample(|x, y| 1.0 + 0.4 * (TAU * x).sin() * (TAU * y).cos());
    let params = SemiStationaryParams::new(4.0);
    let prob = MomentumProblem::new(&rho, &g, &params);
    let mut rng = SplitMix64::new(5);
    let u1: Vec<f64> = (0..g.cells()).map(|_| 0.3 * rng.next_signed()).collect();
    let u2: Vec<f64> = (0..g.cells()).map(|_| 0.3 * rng.next_signed()).collect();
    let (g1, g2, _) = prob.gradient(&u1, &u2);
    let h2 = g.cell_area();
    let eps = 1e-6;
    for k in [0usize, 17, 100, 255] {
        let mut p = u1.clone();
        let mut m = u1.clone();
        p[k] += eps;
        m[k] -= eps;
        let fd = (prob.objective(&p, &u2) - prob.objective(&m, &u2)) / (2.0 * eps) / h2;
        assert!((fd - g1[k]).abs() <= 1e-5 * g1[k].abs().max(1.0), "u1[{k}]: {fd} vs {}", g1[k]);
        let mut p = u2.clone();
        let mut m = u2.clone();
        p[k] += eps;
        m[k] -= eps;
        let fd = (prob.objective(&u1, &p) - prob.objective(&u1, &m)) / (2.0 * eps) / h2;
        assert!((fd - g2[k]).abs() <= 1e-5 * g2[k].abs().max(1.0), "u2[{k}]: {fd} vs {}", g2[k]);
    }
}

#[test]
fn nonlinear_minimiser_is_stationary_with_zero_mean() {
    let g = Grid2D::<f64>::new(24, 24).unwrap();
    let rho = g.sample(|x, y| 1.0 + 0.5 * (TAU * x).cos() * (TAU * y).cos());
    for p in [4.0, 16.0] {
        let params = SemiStationaryParams::new(p);
        let (u, rep) = solve_momentum(&rho, &g, &params, None).unwrap();
        assert!(rep.grad_norm <= params.newton_tol * rep.grad_norm_initial.max(1.0));
        let (m1, m2) = u.mean();
        assert!(m1.abs() < 1e-12 && m2.abs() < 1e-12);
        // Minimiser: J does not drop along small random perturbations.
        let prob = MomentumProblem::new(&rho, &g, &params);
        let j0 = prob.objective(u.c1.values(), u.c2.values());
        let mut rng = SplitMix64::new(p as u64);
        for _ in 0..4 {
            let d: Vec<f64> = (0..g.cells()).map(|_| 1e-3 * rng.next_signed()).collect();
            let moved: Vec<f64> = u.c1.values().iter().zip(&d).map(|(a, b)| a + b).collect();
            assert!(prob.objective(&moved, u.c2.values()) >= j0 - 1e-9 * j0.abs().max(1.0));
        }
    }
}

#[test]
fn constant_density_gives_zero_velocity() {
    let g = Grid2D::<f64>::new(16, 16).unwrap();
    let rho = Field2D::constant(&g, 1.7);
    let (u, _) = solve_momentum(&rho, &g, &SemiStationaryParams::new(8.0), None).unwrap();
    assert!(u.max_abs() < 1e-12);
}

#[test]
fn negative_density_is_rejected() {
    let g = Grid2D::<f64>::new(8, 8).unwrap();
    let rho = g.sample(|x, _| (TAU * x).cos());
    let err = solve_momentum(&rho, &g, &SemiStationaryParams::new(4.0), None).unwrap_err();
    assert!(matches!(err, SolverError::InvalidInput(_)));
}

fn random_velocity(g: &Grid2D<f64>, seed: u64) -> VectorField2D<f64> {
    let mut rng = SplitMix64::new(seed);
    let c1 = Field2D::from_vec((0..g.cells()).map(|_| rng.next_signed()).collect());
    let c2 = Field2D::from_vec((0..g.cells()).map(|_| rng.next_signed()).collect());
    VectorField2D { c1, c2 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn upwind_transport_conserves_mass_and_positivity(seed in any::<u64>(), cfl in 0.05f64..1.0) {
        let g = Grid2D::<f64>::new(12, 10).unwrap();
        let mut rng = SplitMix64::new(seed ^ 0x5eed);
        let rho = Field2D::from_vec((0..g.cells()).map(|_| rng.next_f64()).collect());
        let u = random_velocity(&g, seed);
        let dt = stable_dt_2d(&u, &g, cfl);
        let next = transport_density(&rho, &u, dt, &g);
        let (m0, m1) = (integrate_2d(&rho, &g), integrate_2d(&next, &g));
        prop_assert!((m1 - m0).abs() <= 1e-13 * m0.max(1.0));
        prop_assert!(next.min() >= -1e-15);
    }
}

#[test]
fn rotating_patch_turns_a_quarter() {
    let n = 96;
    let g = Grid2D::<f64>::new(n, n).unwrap();
    // Rigid rotation about the centre, one turn per unit time.
    let c1 = g.sample(|_, y| -TAU * (y - 0.5));
    let c2 = g.sample(|x, _| TAU * (x - 0.5));
    let u = VectorField2D { c1, c2 };
    let mut rho = g.sample(|x, y| {
        let r2 = (x - 0.75).powi(2) + (y - 0.5).powi(2);
        if r2 < 0.1f64.powi(2) {
            1.0
        } else {
            0.0
        }
    });
    let m0 = integrate_2d(&rho, &g);
    let mut t = 0.0;
    let t_end = 0.25;
    while t < t_end - 1e-14 {
        let dt = stable_dt_2d(&u, &g, 0.5).min(t_end - t);
        rho = transport_density(&rho, &u, dt, &g);
        t += dt;
    }
    assert!((integrate_2d(&rho, &g) - m0).abs() < 1e-13);
    assert!(rho.min() >= -1e-15);
    let (mut cx, mut cy) = (0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let w = rho.values()[g.idx(i as isize, j as isize)] * g.cell_area();
            cx += w * g.x(i);
            cy += w * g.y(j);
        }
    }
    let (cx, cy) = (cx / m0, cy / m0);
    assert!((cx - 0.5).abs() < 0.03 && (cy - 0.75).abs() < 0.03, "centre ({cx}, {cy})");
}

fn small_setup(n: usize, t_final: f64, count: usize) -> RunSetup2D<f64> {
    let g = Grid2D::new(n, n).unwrap();
    let rho0 = Fourier2D {
        mean: 1.0,
        modes: vec![Mode2D {
            k1: 1,
            k2: 1,
            kind: ModeKind::Cc,
            amp: 0.5,
        }],
    };
    RunSetup2D::from_fourier(g, &rho0, t_final, count)
}

#[test]
fn runs_conserve_mass_and_dissipate_energy() {
    let setup = small_setup(24, 0.02, 4);
    for p in [2.0, 4.0, 8.0] {
        let traj = run_2d(&setup, &SemiStationaryParams::new(p)).unwrap();
        let first = traj.records[0];
        assert_eq!(traj.snapshots.len(), 5);
        for r in &traj.records {
            assert!(((r.mass - first.mass) / first.mass).abs() < 1e-12);
            assert!(r.energy + r.dissipation_cum <= first.energy * (1.0 + 1e-6));
            assert!(r.rho_min >= 0.0);
        }
        assert!(traj.records.last().unwrap().energy < first.energy);
    }
}

#[test]
fn f32_two_dimensional_run() {
    let g = Grid2D::<f32>::new(12, 12).unwrap();
    let rho0 = Fourier2D {
        mean: 1.0,
        modes: vec![Mode2D {
            k1: 1,
            k2: 0,
            kind: ModeKind::Cc,
            amp: 0.3,
        }],
    };
    let setup = RunSetup2D::from_fourier(g, &rho0, 0.01f32, 2);
    let mut params = SemiStationaryParams::<f32>::new(4.0);
    params.newton_tol = 1e-4;
    let traj = run_2d(&setup, &params).unwrap();
    let (m0, m1) = (traj.records[0].mass, traj.records.last().unwrap().mass);
    assert!(((m1 - m0) / m0).abs() < 1e-5);
}
