//! Artifact formatting: fixed-precision numbers, CSV tables, JSON files and
//! the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Result, SolverError};
use crate::onedim::DiagnosticsRecord;
use crate::scalar::Real;
use crate::semistationary::Record2D;

/// `printf("%.17g", x)`.
pub fn fmt_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Comma-separated table with a header row; every number is `%.17g`.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| fmt_g17(*v)).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

pub const DIAG_HEADER_1D: [&str; 14] = [
    "t",
    "dt",
    "mass",
    "momentum",
    "energy",
    "dissipation_cum",
    "rho_min",
    "rho_max",
    "dudx_maxabs",
    "sigma_max",
    "hoff_cum",
    "lpnorm_term",
    "uniform_cum",
    "newton_iterations",
];

pub fn diag_csv_1d<T: Real>(records: &[DiagnosticsRecord<T>]) -> CsvTable {
    let mut t = CsvTable::new(&DIAG_HEADER_1D);
    for r in records {
        t.row(&[
            r.t.to_f64_lossy(),
            r.dt.to_f64_lossy(),
            r.mass.to_f64_lossy(),
            r.momentum.to_f64_lossy(),
            r.energy.to_f64_lossy(),
            r.dissipation_cum.to_f64_lossy(),
            r.rho_min.to_f64_lossy(),
            r.rho_max.to_f64_lossy(),
            r.dudx_maxabs.to_f64_lossy(),
            r.sigma_max.to_f64_lossy(),
            r.hoff_cum.to_f64_lossy(),
            r.lpnorm_term.to_f64_lossy(),
            r.uniform_cum.to_f64_lossy(),
            r.newton_iterations as f64,
        ]);
    }
    t
}

pub const DIAG_HEADER_2D: [&str; 10] = [
    "t",
    "dt",
    "mass",
    "energy",
    "dissipation_cum",
    "rho_min",
    "rho_max",
    "du_maxnorm",
    "divu_maxabs",
    "solver_iterations",
];

pub fn diag_csv_2d<T: Real>(records: &[Record2D<T>]) -> CsvTable {
    let mut t = CsvTable::new(&DIAG_HEADER_2D);
    for r in records {
        t.row(&[
            r.t.to_f64_lossy(),
            r.dt.to_f64_lossy(),
            r.mass.to_f64_lossy(),
            r.energy.to_f64_lossy(),
            r.dissipation_cum.to_f64_lossy(),
            r.rho_min.to_f64_lossy(),
            r.rho_max.to_f64_lossy(),
            r.du_maxnorm.to_f64_lossy(),
            r.divu_maxabs.to_f64_lossy(),
            r.solver_iterations as f64,
        ]);
    }
    t
}

/// Writes files under one directory and remembers every path for the
/// manifest.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_error(&root, e))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn text(&mut self, rel: &str, content: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
        fs::write(&path, content).map_err(|e| io_error(&path, e))?;
        if !self.written.iter().any(|w| w == rel) {
            self.written.push(rel.to_string());
        }
        Ok(())
    }

    pub fn json<S: Serialize>(&mut self, rel: &str, value: &S) -> Result<()> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| SolverError::InvalidInput(format!("serialising {rel}: {e}")))?;
        self.text(rel, &(text + "\n"))
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    /// Writes `manifest.json` listing every artifact, itself included.
    pub fn finish(mut self, config_echo: &str, wall_time_s: f64, extra: Value) -> Result<Vec<String>> {
        self.written.push("manifest.json".into());
        let manifest = serde_json::json!({
            "code_version": env!("CARGO_PKG_VERSION"),
            "config": config_echo,
            "wall_time_s": wall_time_s,
            "files": self.written,
            "summary": extra,
        });
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| SolverError::InvalidInput(format!("serialising manifest: {e}")))?;
        let path = self.root.join("manifest.json");
        fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
        Ok(self.written)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> SolverError {
    SolverError::InvalidInput(format!("{}: {e}", path.display()))
}
