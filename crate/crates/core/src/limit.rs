//! Parameter sweeps toward the shear-constrained limit: violation measures,
//! the multiplier `pi = |tau|`, convexity gaps and variational residuals.
//!
//! The finest run of a sweep stands in for the limit; every distance is
//! Cauchy style. Snapshots are aligned by their shared output times.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use crate::diagnostics::CheckReport;
use crate::error::{Result, SolverError};
use crate::fourier::{Fourier1D, Fourier2D, Mode2D, ModeKind};
use crate::grid::{div_2d, sym_grad_2d, Field2D, Grid2D, VectorField2D};
use crate::onedim::{Trajectory1D, ViscousLaw};
use crate::output::CsvTable;
use crate::rng::SplitMix64;
use crate::scalar::Real;
use crate::semistationary::Trajectory2D;

/// Thresholds `eta` reported by every sweep.
pub const ETAS: [f64; 3] = [0.01, 0.05, 0.1];

/// Read-only view of a trajectory as `f64` snapshot fields.
pub trait SnapshotView {
    fn snapshot_times(&self) -> Vec<f64>;
    fn dim(&self) -> usize;
    fn cell_volume(&self) -> f64;
    /// Cell centres; `y = 0` in 1D.
    fn centers(&self) -> Vec<(f64, f64)>;
    fn density(&self, k: usize) -> Vec<f64>;
    /// Velocity components, each on the cells.
    fn velocity(&self, k: usize) -> Vec<Vec<f64>>;
    /// `|du/dx|` (forward differences) or `|Du|` (central differences).
    fn shear_norm(&self, k: usize) -> Vec<f64>;
    /// Magnitude of the viscous flux on the same points as `shear_norm`.
    fn stress_norm(&self, k: usize) -> Result<Vec<f64>>;
    /// Central-difference divergence of the velocity.
    fn divergence(&self, k: usize) -> Vec<f64>;
    fn gamma(&self) -> f64;
    fn pressure_coeff(&self) -> f64;
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

impl<T: Real, L: ViscousLaw<T>> SnapshotView for Trajectory1D<T, L> {
    fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t.to_f64_lossy()).collect()
    }
    fn dim(&self) -> usize {
        1
    }
    fn cell_volume(&self) -> f64 {
        self.grid.dx().to_f64_lossy()
    }
    fn centers(&self) -> Vec<(f64, f64)> {
        (0..self.grid.n()).map(|i| (self.grid.x(i).to_f64_lossy(), 0.0)).collect()
    }
    fn density(&self, k: usize) -> Vec<f64> {
        to_f64(self.snapshots[k].rho.values())
    }
    fn velocity(&self, k: usize) -> Vec<Vec<f64>> {
        vec![to_f64(self.snapshots[k].u.values())]
    }
    fn shear_norm(&self, k: usize) -> Vec<f64> {
        self.snapshots[k].shear(&self.grid).iter().map(|s| s.abs().to_f64_lossy()).collect()
    }
    fn stress_norm(&self, k: usize) -> Result<Vec<f64>> {
        self.snapshots[k]
            .shear(&self.grid)
            .iter()
            .map(|&s| self.law.flux(s).map(|t| t.abs().to_f64_lossy()))
            .collect()
    }
    fn divergence(&self, k: usize) -> Vec<f64> {
        let u = &self.snapshots[k].u;
        let n = u.len();
        let h = 2.0 * self.cell_volume();
        (0..n)
            .map(|i| (u[(i + 1) % n].to_f64_lossy() - u[(i + n - 1) % n].to_f64_lossy()) / h)
            .collect()
    }
    fn gamma(&self) -> f64 {
        self.law.gamma().to_f64_lossy()
    }
    fn pressure_coeff(&self) -> f64 {
        self.law.pressure_coeff().to_f64_lossy()
    }
}

impl<T: Real> SnapshotView for Trajectory2D<T> {
    fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t.to_f64_lossy()).collect()
    }
    fn dim(&self) -> usize {
        2
    }
    fn cell_volume(&self) -> f64 {
        self.grid.cell_area().to_f64_lossy()
    }
    fn centers(&self) -> Vec<(f64, f64)> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.cells());
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                out.push((g.x(i).to_f64_lossy(), g.y(j).to_f64_lossy()));
            }
        }
        out
    }
    fn density(&self, k: usize) -> Vec<f64> {
        to_f64(self.snapshots[k].rho.values())
    }
    fn velocity(&self, k: usize) -> Vec<Vec<f64>> {
        let u = &self.snapshots[k].u;
        vec![to_f64(u.c1.values()), to_f64(u.c2.values())]
    }
    fn shear_norm(&self, k: usize) -> Vec<f64> {
        let d = sym_grad_2d(&self.snapshots[k].u, &self.grid);
        (0..d.len()).map(|c| d.norm(c).to_f64_lossy()).collect()
    }
    fn stress_norm(&self, k: usize) -> Result<Vec<f64>> {
        let d = sym_grad_2d(&self.snapshots[k].u, &self.grid);
        Ok((0..d.len())
            .map(|c| (self.params.weight(d.norm_sq(c)) * d.norm(c)).to_f64_lossy())
            .collect())
    }
    fn divergence(&self, k: usize) -> Vec<f64> {
        to_f64(div_2d(&self.snapshots[k].u, &self.grid).values())
    }
    fn gamma(&self) -> f64 {
        self.params.gamma.to_f64_lossy()
    }
    fn pressure_coeff(&self) -> f64 {
        self.params.a.to_f64_lossy()
    }
}

/// Fraction of cells with `|shear| > 1 + eta`.
pub fn constraint_violation_measure(shear_norm: &[f64], eta: f64) -> f64 {
    if shear_norm.is_empty() {
        return 0.0;
    }
    shear_norm.iter().filter(|s| **s > 1.0 + eta).count() as f64 / shear_norm.len() as f64
}

/// `pi = |tau|` and the complementarity defect `int pi max(0, 1 - |s|)`.
pub fn lagrange_multiplier(shear_norm: &[f64], tau: &[f64], cell_volume: f64) -> (Vec<f64>, f64) {
    let pi: Vec<f64> = tau.iter().map(|t| t.abs()).collect();
    let residual = pi
        .iter()
        .zip(shear_norm)
        .map(|(p, s)| p * (1.0 - s.abs()).max(0.0))
        .sum::<f64>()
        * cell_volume;
    (pi, residual)
}

/// `int [a^gamma - b^gamma - gamma b^(gamma-1) (a - b)]`, nonnegative by
/// convexity of `z^gamma`.
pub fn entropy_gap(rho: &[f64], rho_ref: &[f64], gamma: f64, cell_volume: f64) -> f64 {
    rho.iter()
        .zip(rho_ref)
        .map(|(&a, &b)| {
            let gap = a.powf(gamma) - b.powf(gamma) - gamma * b.powf(gamma - 1.0) * (a - b);
            gap.max(0.0)
        })
        .sum::<f64>()
        * cell_volume
}

/// Trapezoid rule over (possibly nonuniform) sample times.
pub fn time_trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

fn check_aligned(a: &[f64], b: &[f64]) -> Result<()> {
    let same = a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    if same {
        Ok(())
    } else {
        Err(SolverError::InvalidInput(
            "trajectories do not share an output-time grid".into(),
        ))
    }
}

fn check_same_grid(a: &impl SnapshotView, b: &impl SnapshotView) -> Result<()> {
    if a.dim() != b.dim() || a.density(0).len() != b.density(0).len() {
        return Err(SolverError::InvalidInput("trajectories live on different grids".into()));
    }
    Ok(())
}

/// Space-time average of the violation fraction.
pub fn violation_measure_space_time(traj: &impl SnapshotView, eta: f64) -> f64 {
    let times = traj.snapshot_times();
    let vals: Vec<f64> = (0..times.len())
        .map(|k| constraint_violation_measure(&traj.shear_norm(k), eta))
        .collect();
    let span = times.last().copied().unwrap_or(0.0) - times.first().copied().unwrap_or(0.0);
    if span > 0.0 {
        time_trapezoid(&times, &vals) / span
    } else {
        vals.first().copied().unwrap_or(0.0)
    }
}

/// `int_0^T int pi max(0, 1 - |s|)`.
pub fn complementarity_space_time(traj: &impl SnapshotView) -> Result<f64> {
    let times = traj.snapshot_times();
    let mut vals = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let (_, r) = lagrange_multiplier(&traj.shear_norm(k), &traj.stress_norm(k)?, traj.cell_volume());
        vals.push(r);
    }
    Ok(time_trapezoid(&times, &vals))
}

/// `||u_a - u_b||_{L^2(0,T; L^2)}`.
pub fn velocity_distance(a: &impl SnapshotView, b: &impl SnapshotView) -> Result<f64> {
    let times = a.snapshot_times();
    check_aligned(&times, &b.snapshot_times())?;
    check_same_grid(a, b)?;
    let vals: Vec<f64> = (0..times.len())
        .map(|k| {
            let (ua, ub) = (a.velocity(k), b.velocity(k));
            ua.iter()
                .zip(&ub)
                .flat_map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)))
                .sum::<f64>()
                * a.cell_volume()
        })
        .collect();
    Ok(time_trapezoid(&times, &vals).sqrt())
}

/// `sup_t ||rho_a - rho_b||_{L^gamma}`.
pub fn density_distance(a: &impl SnapshotView, b: &impl SnapshotView) -> Result<f64> {
    let times = a.snapshot_times();
    check_aligned(&times, &b.snapshot_times())?;
    check_same_grid(a, b)?;
    let gamma = a.gamma();
    Ok((0..times.len())
        .map(|k| {
            let s: f64 = a
                .density(k)
                .iter()
                .zip(b.density(k))
                .map(|(x, y)| (x - y).abs().powf(gamma))
                .sum();
            (s * a.cell_volume()).powf(1.0 / gamma)
        })
        .fold(0.0, f64::max))
}

/// `sup_t X(t)` with `b` as the reference density.
pub fn entropy_gap_sup(a: &impl SnapshotView, b: &impl SnapshotView) -> Result<f64> {
    let times = a.snapshot_times();
    check_aligned(&times, &b.snapshot_times())?;
    check_same_grid(a, b)?;
    Ok((0..times.len())
        .map(|k| entropy_gap(&a.density(k), &b.density(k), a.gamma(), a.cell_volume()))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// `p -> infinity`; values sorted ascending.
    Exponent,
    /// `eps -> 0`; values sorted descending.
    Epsilon,
}

impl SweepKind {
    /// Sorts so that the last value is the finest.
    pub fn sort(&self, values: &mut [f64]) {
        match self {
            Self::Exponent => values.sort_by(f64::total_cmp),
            Self::Epsilon => values.sort_by(|a, b| b.total_cmp(a)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub param: f64,
    pub u_dist: f64,
    pub rho_dist: f64,
    /// Space-time violation fraction for each entry of `SweepReport::etas`.
    pub violation: Vec<f64>,
    pub compl_resid: f64,
    pub entropy_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub from: f64,
    pub to: f64,
    pub u_dist: f64,
    pub rho_dist: f64,
    pub entropy_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub param: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub param_values: Vec<f64>,
    pub etas: Vec<f64>,
    pub members: Vec<SweepMember>,
    /// Consecutive pairs in refinement order.
    pub pairwise: Vec<PairDistance>,
    pub cross_model: Option<f64>,
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    /// `param,u_dist,rho_dist,viol_<eta>...,compl_resid,entropy_gap` where
    /// `eta = 0.05` is written `viol_005`.
    pub fn to_csv(&self) -> CsvTable {
        let viol: Vec<String> = self.etas.iter().map(|e| format!("viol_{}", e.to_string().replace('.', ""))).collect();
        let mut header = vec!["param", "u_dist", "rho_dist"];
        header.extend(viol.iter().map(String::as_str));
        header.extend(["compl_resid", "entropy_gap"]);
        let mut t = CsvTable::new(&header);
        for m in &self.members {
            let mut row = vec![m.param, m.u_dist, m.rho_dist];
            row.extend(&m.violation);
            row.extend([m.compl_resid, m.entropy_gap]);
            t.row(&row);
        }
        t
    }

    /// Violation fractions at `eta` along the sweep, if `eta` was measured.
    pub fn violation_at(&self, eta: f64) -> Option<Vec<f64>> {
        let j = self.etas.iter().position(|e| (e - eta).abs() < 1e-12)?;
        Some(self.members.iter().map(|m| m.violation[j]).collect())
    }

    /// Distance of the last consecutive pair, the finest Cauchy gap.
    pub fn last_gap(&self) -> Option<f64> {
        self.pairwise.last().map(|p| p.u_dist)
    }
}

/// Metrics over successful runs already sorted in refinement order.
pub fn assemble_report<S: SnapshotView>(
    kind: SweepKind,
    runs: &[(f64, S)],
    failures: Vec<SweepFailure>,
    etas: &[f64],
) -> Result<SweepReport> {
    let mut members = Vec::with_capacity(runs.len());
    let mut pairwise = Vec::new();
    if let Some((_, finest)) = runs.last() {
        for (param, traj) in runs {
            let violation = etas.iter().map(|&eta| violation_measure_space_time(traj, eta)).collect();
            members.push(SweepMember {
                param: *param,
                u_dist: velocity_distance(traj, finest)?,
                rho_dist: density_distance(traj, finest)?,
                violation,
                compl_resid: complementarity_space_time(traj)?,
                entropy_gap: entropy_gap_sup(traj, finest)?,
            });
        }
        for w in runs.windows(2) {
            pairwise.push(PairDistance {
                from: w[0].0,
                to: w[1].0,
                u_dist: velocity_distance(&w[0].1, &w[1].1)?,
                rho_dist: density_distance(&w[0].1, &w[1].1)?,
                entropy_gap: entropy_gap_sup(&w[0].1, &w[1].1)?,
            });
        }
    }
    Ok(SweepReport {
        kind,
        param_values: runs.iter().map(|r| r.0).collect(),
        etas: etas.to_vec(),
        members,
        pairwise,
        cross_model: None,
        failures,
    })
}

/// Runs every value (concurrently, at most `jobs` at a time when `jobs > 0`)
/// and assembles the report. Failed runs are listed without aborting the
/// others. Returns the successful trajectories in refinement order.
pub fn run_sweep<S, F>(
    kind: SweepKind,
    values: &[f64],
    etas: &[f64],
    jobs: usize,
    runner: F,
) -> Result<(SweepReport, Vec<(f64, S)>)>
where
    S: SnapshotView + Send,
    F: Fn(f64) -> Result<S> + Sync,
{
    use rayon::prelude::*;
    let mut sorted = values.to_vec();
    kind.sort(&mut sorted);
    sorted.dedup();
    let execute = || -> Vec<(f64, Result<S>)> { sorted.par_iter().map(|&v| (v, runner(v))).collect() };
    let results = if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| SolverError::InvalidInput(format!("thread pool: {e}")))?
            .install(execute)
    } else {
        execute()
    };
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (v, r) in results {
        match r {
            Ok(t) => runs.push((v, t)),
            Err(e) => failures.push(SweepFailure {
                param: v,
                error: e.to_string(),
            }),
        }
    }
    let report = assemble_report(kind, &runs, failures, etas)?;
    Ok((report, runs))
}

/// Space-time test field `v(t) = (1 - t/T) v_start + (t/T) v_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestField1D {
    pub start: Fourier1D,
    pub end: Fourier1D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestField2D {
    pub start: [Fourier2D; 2],
    pub end: [Fourier2D; 2],
}

/// Highest wavenumber in the test banks.
pub const BANK_MODES: usize = 3;
/// Shear bound the banks are rescaled to.
pub const BANK_MARGIN: f64 = 0.99;
const BANK_SAMPLES: usize = 256;

fn random_series_1d(rng: &mut SplitMix64) -> Fourier1D {
    let mut f = Fourier1D::constant(0.0);
    for k in 1..=BANK_MODES {
        f.cos.push(rng.next_signed() / k as f64);
        f.sin.push(rng.next_signed() / k as f64);
    }
    let d = f.dense_extrema(BANK_SAMPLES).max_abs_deriv;
    f.scaled(BANK_MARGIN / d)
}

/// `count` seeded fields with `sup |dv/dx| = 0.99` at both ends.
pub fn test_bank_1d(seed: u64, count: usize) -> Vec<TestField1D> {
    let mut rng = SplitMix64::fork(seed, 1);
    (0..count)
        .map(|_| TestField1D {
            start: random_series_1d(&mut rng),
            end: random_series_1d(&mut rng),
        })
        .collect()
}

const KINDS: [ModeKind; 4] = [ModeKind::Cc, ModeKind::Cs, ModeKind::Sc, ModeKind::Ss];

fn random_series_2d(rng: &mut SplitMix64) -> Fourier2D {
    let mut f = Fourier2D::constant(0.0);
    for k1 in 0..=BANK_MODES as u32 {
        for k2 in 0..=BANK_MODES as u32 {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            for kind in KINDS {
                // Sine factors vanish identically at wavenumber zero.
                let sin_x = matches!(kind, ModeKind::Sc | ModeKind::Ss);
                let sin_y = matches!(kind, ModeKind::Cs | ModeKind::Ss);
                if (k1 == 0 && sin_x) || (k2 == 0 && sin_y) {
                    continue;
                }
                let amp = rng.next_signed() / (k1 * k1 + k2 * k2) as f64;
                f.modes.push(Mode2D { k1, k2, kind, amp });
            }
        }
    }
    f
}

/// Dense-sample `sup |Dv|` (Frobenius norm of the symmetric gradient).
pub fn max_strain_2d(v: &[Fourier2D; 2], samples: usize) -> f64 {
    let mut m = 0.0f64;
    for j in 0..samples {
        for i in 0..samples {
            let x = (i as f64 + 0.5) / samples as f64;
            let y = (j as f64 + 0.5) / samples as f64;
            let (a_x, a_y) = v[0].grad(x, y);
            let (b_x, b_y) = v[1].grad(x, y);
            let off = 0.5 * (a_y + b_x);
            m = m.max((a_x * a_x + 2.0 * off * off + b_y * b_y).sqrt());
        }
    }
    m
}

fn scale_2d(v: [Fourier2D; 2], s: f64) -> [Fourier2D; 2] {
    v.map(|mut f| {
        for m in &mut f.modes {
            m.amp *= s;
        }
        f
    })
}

fn random_vector_2d(rng: &mut SplitMix64) -> [Fourier2D; 2] {
    let v = [random_series_2d(rng), random_series_2d(rng)];
    let d = max_strain_2d(&v, 96);
    scale_2d(v, BANK_MARGIN / d)
}

/// `count` seeded vector fields with `sup |Dv| = 0.99` at both ends.
pub fn test_bank_2d(seed: u64, count: usize) -> Vec<TestField2D> {
    let mut rng = SplitMix64::fork(seed, 2);
    (0..count)
        .map(|_| TestField2D {
            start: random_vector_2d(&mut rng),
            end: random_vector_2d(&mut rng),
        })
        .collect()
}

fn interval_means(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// `int_0^T int rho u_t (v - u) + rho u u_x (v - u) - a rho^gamma (v - u)_x`
/// by the midpoint rule on each snapshot interval; `v_at(k, t)` returns the
/// test field on the cells for interval `k` at its midpoint `t`.
pub fn variational_residual_1d_with<T: Real, L: ViscousLaw<T>>(
    traj: &Trajectory1D<T, L>,
    v_at: &dyn Fn(usize, f64) -> Vec<f64>,
) -> f64 {
    let times = traj.snapshot_times();
    let dx = traj.cell_volume();
    let (a, gamma) = (traj.pressure_coeff(), traj.gamma());
    let mut total = 0.0;
    for k in 0..times.len().saturating_sub(1) {
        let dt = times[k + 1] - times[k];
        let tm = 0.5 * (times[k] + times[k + 1]);
        let (u0, u1) = (traj.velocity(k).remove(0), traj.velocity(k + 1).remove(0));
        let (r0, r1) = (traj.density(k), traj.density(k + 1));
        let u = interval_means(&u0, &u1);
        let rho = interval_means(&r0, &r1);
        let pressure: Vec<f64> = r0
            .iter()
            .zip(&r1)
            .map(|(x, y)| 0.5 * a * (x.powf(gamma) + y.powf(gamma)))
            .collect();
        let v = v_at(k, tm);
        let n = u.len();
        let w: Vec<f64> = v.iter().zip(&u).map(|(v, u)| v - u).collect();
        let mut acc = 0.0;
        for i in 0..n {
            let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
            let ut = (u1[i] - u0[i]) / dt;
            let ux = (u[ip] - u[im]) / (2.0 * dx);
            let wx = (w[ip] - w[im]) / (2.0 * dx);
            acc += rho[i] * (ut + u[i] * ux) * w[i] - pressure[i] * wx;
        }
        total += acc * dx * dt;
    }
    total
}

/// `int_0^T int a rho^gamma (div u - div v)`, nonnegative up to `O(1/p)` for
/// admissible `v`.
pub fn variational_residual_2d_with<T: Real>(
    traj: &Trajectory2D<T>,
    v_at: &dyn Fn(usize, f64) -> VectorField2D<f64>,
) -> Result<f64> {
    let times = traj.snapshot_times();
    let g = Grid2D::<f64>::new(traj.grid.nx(), traj.grid.ny())?;
    let cell = traj.cell_volume();
    let (a, gamma) = (traj.pressure_coeff(), traj.gamma());
    let mut total = 0.0;
    for k in 0..times.len().saturating_sub(1) {
        let dt = times[k + 1] - times[k];
        let tm = 0.5 * (times[k] + times[k + 1]);
        let (r0, r1) = (traj.density(k), traj.density(k + 1));
        let divu = interval_means(&traj.divergence(k), &traj.divergence(k + 1));
        let divv = div_2d(&v_at(k, tm), &g);
        let acc: f64 = (0..divu.len())
            .map(|c| 0.5 * a * (r0[c].powf(gamma) + r1[c].powf(gamma)) * (divu[c] - divv.values()[c]))
            .sum();
        total += acc * cell * dt;
    }
    Ok(total)
}

fn blend(s: f64, a: f64, b: f64) -> f64 {
    (1.0 - s) * a + s * b
}

impl TestField1D {
    pub fn eval(&self, t: f64, t_final: f64, x: f64) -> f64 {
        blend(t / t_final, self.start.eval(x), self.end.eval(x))
    }
}

impl TestField2D {
    pub fn sample(&self, t: f64, t_final: f64, g: &Grid2D<f64>) -> VectorField2D<f64> {
        let s = t / t_final;
        let comp = |c: usize| g.sample(|x, y| blend(s, self.start[c].eval(x, y), self.end[c].eval(x, y)));
        VectorField2D { c1: comp(0), c2: comp(1) }
    }
}

fn bank_report(check: &str, residuals: &[f64], tol: f64, mut ctx: Map<String, serde_json::Value>) -> CheckReport {
    let min = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    ctx.insert("residuals".into(), json!(residuals));
    ctx.insert("min_residual".into(), json!(min));
    ctx.insert("bank_size".into(), json!(residuals.len()));
    CheckReport::evaluate(check, 0.0, -min, tol, ctx)
}

/// Minimum residual over the bank, reported as `measured = -min` against
/// `bound = 0` with `tol = rel_tol * E_0`.
pub fn variational_residual_1d<T: Real, L: ViscousLaw<T>>(
    traj: &Trajectory1D<T, L>,
    bank: &[TestField1D],
    rel_tol: f64,
) -> CheckReport {
    let t_final = *traj.snapshot_times().last().unwrap_or(&1.0);
    let xs: Vec<f64> = traj.centers().iter().map(|c| c.0).collect();
    let residuals: Vec<f64> = bank
        .iter()
        .map(|f| variational_residual_1d_with(traj, &|_, t| xs.iter().map(|&x| f.eval(t, t_final, x)).collect()))
        .collect();
    let e0 = traj.records[0].energy.to_f64_lossy();
    let mut ctx = Map::new();
    ctx.insert("model".into(), json!(traj.law.label()));
    ctx.insert("initial_energy".into(), json!(e0));
    bank_report("variational_inequality_1d", &residuals, rel_tol * e0, ctx)
}

pub fn variational_residual_2d<T: Real>(traj: &Trajectory2D<T>, bank: &[TestField2D], rel_tol: f64) -> Result<CheckReport> {
    let t_final = *traj.snapshot_times().last().unwrap_or(&1.0);
    let g = Grid2D::<f64>::new(traj.grid.nx(), traj.grid.ny())?;
    let mut residuals = Vec::with_capacity(bank.len());
    for f in bank {
        residuals.push(variational_residual_2d_with(traj, &|_, t| f.sample(t, t_final, &g))?);
    }
    let e0 = traj.records[0].energy.to_f64_lossy();
    let mut ctx = Map::new();
    ctx.insert("model".into(), json!("semistationary2d"));
    ctx.insert("p".into(), json!(traj.params.p.to_f64_lossy()));
    ctx.insert("initial_energy".into(), json!(e0));
    Ok(bank_report("variational_inequality_2d", &residuals, rel_tol * e0, ctx))
}

/// Zero field helper for the `v = 0` consistency case.
pub fn zero_field_2d(g: &Grid2D<f64>) -> VectorField2D<f64> {
    VectorField2D {
        c1: Field2D::zeros(g),
        c2: Field2D::zeros(g),
    }
}
