//! Line-based experiment configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! list = 1.0, 2.0, 3.0
//! ```
//!
//! Sections: `[model]`, `[grid]`, `[params]`, `[initial]`, `[time]`,
//! `[sweep]`, `[checks]`. Unknown sections and keys are errors. Parsing
//! reports every problem it finds, not just the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use crate::fourier::{Fourier1D, Fourier2D, Mode2D, ModeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    PowerLaw1D,
    Singular1D,
    SemiStationary2D,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "powerlaw1d" => Some(Self::PowerLaw1D),
            "singular1d" => Some(Self::Singular1D),
            "semistationary2d" => Some(Self::SemiStationary2D),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PowerLaw1D => "powerlaw1d",
            Self::Singular1D => "singular1d",
            Self::SemiStationary2D => "semistationary2d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::SemiStationary2D => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Parse { line: usize, message: String },
    Validation { path: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse { line, message } => write!(f, "line {line}: {message}"),
            Self::Validation { path, message } => write!(f, "{path}: {message}"),
        }
    }
}

/// Every field of the three models' parameter sets; each model reads the
/// subset it needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsConfig {
    pub p: f64,
    pub eps: f64,
    pub mu: f64,
    pub a: f64,
    pub gamma: f64,
    pub delta: f64,
    pub theta: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialConfig {
    pub rho: Fourier1D,
    pub u: Fourier1D,
    pub rho2d: Fourier2D,
    pub seed: u64,
    pub paper_initial_conditions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeConfig {
    pub t_final: f64,
    pub cfl: f64,
    /// Output times in `(0, t_final]`.
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub p_values: Vec<f64>,
    pub eps_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChecksConfig {
    /// Multiple of `dx + dt` allowed on continuum bounds.
    pub slack: f64,
    pub energy_tol: f64,
    pub etas: Vec<f64>,
    pub s_list: Vec<f64>,
    pub bank_size: usize,
    pub transport_bank_size: usize,
    pub variational_rel_tol: f64,
    /// Constant `C` of the transport band `C (dx + dt + dt_snap^2)`.
    pub transport_c: f64,
    pub mass_tol: f64,
    pub momentum_tol: f64,
    /// Density bounds of the initial data; sampled when absent.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub model: ModelKind,
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub params: ParamsConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    pub sweep: Option<SweepConfig>,
    pub checks: ChecksConfig,
    pub output_dir: PathBuf,
    /// The text this config was parsed from.
    #[serde(skip)]
    pub source: String,
}

impl Config {
    pub fn cells(&self) -> usize {
        match self.model.dim() {
            1 => self.n,
            _ => self.nx.max(self.ny),
        }
    }
}

struct Entry {
    value: String,
    line: usize,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

const KNOWN: &[(&str, &[&str])] = &[
    ("model", &["model", "output_dir"]),
    ("grid", &["n", "nx", "ny"]),
    (
        "params",
        &["p", "eps", "mu", "a", "gamma", "delta", "theta", "newton_tol", "newton_max_iter"],
    ),
    (
        "initial",
        &[
            "rho_mean",
            "rho_cos",
            "rho_sin",
            "u_mean",
            "u_cos",
            "u_sin",
            "rho_modes",
            "seed",
            "paper_initial_conditions",
        ],
    ),
    ("time", &["t_final", "cfl", "snapshots", "snapshot_times"]),
    ("sweep", &["p_values", "eps_values"]),
    (
        "checks",
        &[
            "slack",
            "energy_tol",
            "etas",
            "s_list",
            "bank_size",
            "transport_bank_size",
            "variational_rel_tol",
            "transport_c",
            "mass_tol",
            "momentum_tol",
            "c1",
            "c2",
        ],
    ),
];

fn tokenize(text: &str, errors: &mut Vec<ConfigError>) -> Sections {
    let mut sections = Sections::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                errors.push(ConfigError::Parse {
                    line,
                    message: format!("malformed section header `{content}`"),
                });
                continue;
            };
            let name = name.trim().to_string();
            if !KNOWN.iter().any(|(s, _)| *s == name) {
                errors.push(ConfigError::Parse {
                    line,
                    message: format!("unknown section `[{name}]`"),
                });
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            });
            continue;
        };
        let Some(section) = current.clone() else {
            errors.push(ConfigError::Parse {
                line,
                message: "key outside of any section".into(),
            });
            continue;
        };
        let key = key.trim().to_string();
        if let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == section) {
            if !keys.contains(&key.as_str()) {
                errors.push(ConfigError::Parse {
                    line,
                    message: format!("unknown key `{key}` in [{section}]"),
                });
            }
        }
        let table = sections.entry(section.clone()).or_default();
        if table.contains_key(&key) {
            errors.push(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}` in [{section}]"),
            });
        }
        table.insert(
            key,
            Entry {
                value: value.trim().to_string(),
                line,
            },
        );
    }
    sections
}

struct Reader<'a> {
    sections: &'a Sections,
    errors: &'a mut Vec<ConfigError>,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|t| t.get(key))
    }

    fn parse_with<V>(&mut self, section: &str, key: &str, f: impl Fn(&str) -> Option<V>, what: &str) -> Option<V> {
        let entry = self.raw(section, key)?;
        match f(&entry.value) {
            Some(v) => Some(v),
            None => {
                let line = entry.line;
                let value = entry.value.clone();
                self.errors.push(ConfigError::Parse {
                    line,
                    message: format!("{section}.{key}: expected {what}, found `{value}`"),
                });
                None
            }
        }
    }

    fn real(&mut self, section: &str, key: &str, default: f64) -> f64 {
        self.parse_with(section, key, |s| s.parse::<f64>().ok(), "a number")
            .unwrap_or(default)
    }

    fn opt_real(&mut self, section: &str, key: &str) -> Option<f64> {
        self.parse_with(section, key, |s| s.parse::<f64>().ok(), "a number")
    }

    fn count(&mut self, section: &str, key: &str, default: usize) -> usize {
        self.parse_with(section, key, |s| s.parse::<usize>().ok(), "a nonnegative integer")
            .unwrap_or(default)
    }

    fn flag(&mut self, section: &str, key: &str) -> bool {
        self.parse_with(section, key, |s| s.parse::<bool>().ok(), "true or false")
            .unwrap_or(false)
    }

    fn list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        self.parse_with(section, key, parse_list, "a comma-separated list of numbers")
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|t| t.trim().parse::<f64>().ok()).collect()
}

/// `k1:k2:kind:amp` entries separated by commas.
fn parse_modes(s: &str) -> Option<Vec<Mode2D>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',')
        .map(|item| {
            let parts: Vec<&str> = item.trim().split(':').collect();
            let [k1, k2, kind, amp] = parts.as_slice() else {
                return None;
            };
            Some(Mode2D {
                k1: k1.trim().parse().ok()?,
                k2: k2.trim().parse().ok()?,
                kind: ModeKind::parse(kind.trim())?,
                amp: amp.trim().parse().ok()?,
            })
        })
        .collect()
}

fn invalid(errors: &mut Vec<ConfigError>, path: &str, message: impl Into<String>) {
    errors.push(ConfigError::Validation {
        path: path.into(),
        message: message.into(),
    });
}

/// Parses and validates; on failure returns every error found.
pub fn parse_config(text: &str) -> Result<Config, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let sections = tokenize(text, &mut errors);
    let mut r = Reader {
        sections: &sections,
        errors: &mut errors,
    };

    let model = match r.raw("model", "model") {
        None => {
            invalid(r.errors, "model.model", "missing (powerlaw1d, singular1d or semistationary2d)");
            None
        }
        Some(e) => {
            let found = ModelKind::parse(&e.value);
            if found.is_none() {
                let line = e.line;
                let value = e.value.clone();
                r.errors.push(ConfigError::Parse {
                    line,
                    message: format!("model.model: unknown model `{value}`"),
                });
            }
            found
        }
    };
    let output_dir = r
        .raw("model", "output_dir")
        .map_or_else(|| PathBuf::from("output"), |e| PathBuf::from(&e.value));

    let n = r.count("grid", "n", 256);
    let nx = r.count("grid", "nx", 64);
    let ny = r.count("grid", "ny", nx);

    let params = ParamsConfig {
        p: r.real("params", "p", 4.0),
        eps: r.real("params", "eps", 1e-2),
        mu: r.real("params", "mu", 1.0),
        a: r.real("params", "a", 1.0),
        gamma: r.real("params", "gamma", 2.0),
        delta: r.real("params", "delta", 1e-8),
        theta: r.real("params", "theta", 0.95),
        newton_tol: r.real(
            "params",
            "newton_tol",
            if model == Some(ModelKind::SemiStationary2D) { 1e-8 } else { 1e-10 },
        ),
        newton_max_iter: r.count(
            "params",
            "newton_max_iter",
            match model {
                Some(ModelKind::SemiStationary2D) => 200,
                Some(ModelKind::Singular1D) => 80,
                _ => 60,
            },
        ),
    };

    let rho = Fourier1D {
        mean: r.real("initial", "rho_mean", 1.0),
        cos: r.list("initial", "rho_cos").unwrap_or_default(),
        sin: r.list("initial", "rho_sin").unwrap_or_default(),
    };
    let u = Fourier1D {
        mean: r.real("initial", "u_mean", 0.0),
        cos: r.list("initial", "u_cos").unwrap_or_default(),
        sin: r.list("initial", "u_sin").unwrap_or_default(),
    };
    let rho2d = Fourier2D {
        mean: rho.mean,
        modes: r
            .parse_with("initial", "rho_modes", parse_modes, "entries `k1:k2:kind:amp`")
            .unwrap_or_default(),
    };
    let seed = r
        .parse_with("initial", "seed", |s| s.parse::<u64>().ok(), "an unsigned integer")
        .unwrap_or(20_251_017);
    let paper_initial_conditions = r.flag("initial", "paper_initial_conditions");

    let t_final = r.real("time", "t_final", 0.25);
    let cfl = r.real("time", "cfl", 0.4);
    let snapshots = r.count("time", "snapshots", 50);
    let explicit_times = r.list("time", "snapshot_times");

    let sweep = if sections.contains_key("sweep") {
        Some(SweepConfig {
            p_values: r.list("sweep", "p_values").unwrap_or_default(),
            eps_values: r.list("sweep", "eps_values").unwrap_or_default(),
        })
    } else {
        None
    };

    let checks = ChecksConfig {
        slack: r.real("checks", "slack", 5.0),
        energy_tol: r.real("checks", "energy_tol", 1e-6),
        etas: r.list("checks", "etas").unwrap_or_else(|| crate::limit::ETAS.to_vec()),
        s_list: r
            .list("checks", "s_list")
            .unwrap_or_else(|| vec![t_final / 2.0, t_final / 4.0, t_final / 8.0]),
        bank_size: r.count("checks", "bank_size", 20),
        transport_bank_size: r.count("checks", "transport_bank_size", 10),
        variational_rel_tol: r.real("checks", "variational_rel_tol", 1e-3),
        transport_c: r.real("checks", "transport_c", 1.0),
        mass_tol: r.real("checks", "mass_tol", 1e-12),
        momentum_tol: r.real("checks", "momentum_tol", 1e-8),
        c1: r.opt_real("checks", "c1"),
        c2: r.opt_real("checks", "c2"),
    };

    let snapshot_times = match explicit_times {
        Some(times) => times,
        None => (1..=snapshots.max(1))
            .map(|k| t_final * k as f64 / snapshots.max(1) as f64)
            .collect(),
    };

    let Some(model) = model else {
        return Err(errors);
    };
    let config = Config {
        model,
        n,
        nx,
        ny,
        params,
        initial: InitialConfig {
            rho,
            u,
            rho2d,
            seed,
            paper_initial_conditions,
        },
        time: TimeConfig {
            t_final,
            cfl,
            snapshot_times,
        },
        sweep,
        checks,
        output_dir,
        source: text.to_string(),
    };
    validate(&config, &mut errors);
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(errors)
    }
}

fn validate(c: &Config, errors: &mut Vec<ConfigError>) {
    let p = &c.params;
    let dim = c.model.dim();
    if dim == 1 && c.n < 4 {
        invalid(errors, "grid.n", "must be at least 4");
    }
    if dim == 2 && (c.nx < 4 || c.ny < 4) {
        invalid(errors, "grid.nx", "nx and ny must be at least 4");
    }
    if !(p.gamma > 1.0) {
        invalid(errors, "params.gamma", "gamma must exceed 1");
    }
    if !(p.mu > 0.0) {
        invalid(errors, "params.mu", "mu must be positive");
    }
    if !(p.a > 0.0) {
        invalid(errors, "params.a", "a must be positive");
    }
    if c.model != ModelKind::Singular1D {
        if !(p.p >= 2.0) {
            invalid(errors, "params.p", "p must be at least 2");
        }
        if !(p.delta >= 0.0) {
            invalid(errors, "params.delta", "delta must be nonnegative");
        }
    } else {
        if !(p.eps > 0.0) {
            invalid(errors, "params.eps", "eps must be positive");
        }
        if !(p.theta > 0.0 && p.theta < 1.0) {
            invalid(errors, "params.theta", "theta must lie in (0, 1)");
        }
    }
    if !(p.newton_tol > 0.0) {
        invalid(errors, "params.newton_tol", "must be positive");
    }
    if p.newton_max_iter == 0 {
        invalid(errors, "params.newton_max_iter", "must be positive");
    }
    let t = &c.time;
    if !(t.t_final > 0.0 && t.t_final.is_finite()) {
        invalid(errors, "time.t_final", "must be positive");
    }
    if !(t.cfl > 0.0 && t.cfl <= 1.0) {
        invalid(errors, "time.cfl", "must lie in (0, 1]");
    }
    if t.snapshot_times.windows(2).any(|w| w[1] <= w[0])
        || t.snapshot_times.iter().any(|&s| !(s > 0.0 && s <= t.t_final))
    {
        invalid(errors, "time.snapshot_times", "must be increasing within (0, t_final]");
    }

    let samples = 8 * c.cells().max(4);
    if dim == 1 {
        let rho = c.initial.rho.dense_extrema(samples);
        if !(rho.min > 0.0) {
            invalid(
                errors,
                "initial.rho",
                format!("initial density reaches {:.6} <= 0 on dense sampling", rho.min),
            );
        }
        let shear = c.initial.u.dense_extrema(samples).max_abs_deriv;
        if c.initial.paper_initial_conditions && shear > 1.0 {
            invalid(
                errors,
                "initial.u",
                format!("max |du0/dx| = {shear:.6} exceeds the bound 1"),
            );
        }
        if c.model == ModelKind::Singular1D && shear >= 1.0 {
            invalid(
                errors,
                "initial.u",
                format!("max |du0/dx| = {shear:.6} must be below 1 for the singular model"),
            );
        }
    } else {
        let (lo, _) = c.initial.rho2d.dense_min_max(samples);
        if !(lo > 0.0) {
            invalid(
                errors,
                "initial.rho_modes",
                format!("initial density reaches {lo:.6} <= 0 on dense sampling"),
            );
        }
    }

    if let Some(s) = &c.sweep {
        if s.p_values.is_empty() && s.eps_values.is_empty() {
            invalid(errors, "sweep", "needs p_values or eps_values");
        }
        if s.p_values.iter().any(|&v| !(v >= 2.0)) {
            invalid(errors, "sweep.p_values", "every p must be at least 2");
        }
        if s.eps_values.iter().any(|&v| !(v > 0.0)) {
            invalid(errors, "sweep.eps_values", "every eps must be positive");
        }
        if c.model == ModelKind::SemiStationary2D && !s.eps_values.is_empty() {
            invalid(errors, "sweep.eps_values", "the singular law is one-dimensional");
        }
    }

    let k = &c.checks;
    if k.etas.iter().any(|&e| !(e > 0.0)) {
        invalid(errors, "checks.etas", "every eta must be positive");
    }
    if k.s_list.iter().any(|&s| !(s > 0.0 && s <= t.t_final)) {
        invalid(errors, "checks.s_list", "entries must lie in (0, t_final]");
    }
    if !(k.slack >= 0.0) || !(k.energy_tol >= 0.0) {
        invalid(errors, "checks.slack", "tolerances must be nonnegative");
    }
}
