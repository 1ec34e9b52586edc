use thiserror::Error;

/// Failures raised by the solvers and checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("viscous flux overflow at shear {shear:e} (|flux| would exceed 1e300)")]
    FluxOverflow { shear: f64 },

    #[error("density reached vacuum (min rho = {min_rho:e}) at t = {t}")]
    Vacuum { min_rho: f64, t: f64 },

    #[error(
        "Newton iteration did not converge after {iterations} iterations \
         (last residual {last_residual:e}, target {target:e}); damping history {damping:?}"
    )]
    NewtonDivergence {
        iterations: usize,
        last_residual: f64,
        target: f64,
        damping: Vec<f64>,
    },

    #[error("shear constraint violated: |du/dx| = {shear} >= 1")]
    ConstraintViolation { shear: f64 },

    #[error("momentum minimisation did not converge after {iterations} iterations (gradient norm {grad_norm:e}, target {target:e})")]
    SolverDivergence {
        iterations: usize,
        grad_norm: f64,
        target: f64,
        trace: Vec<f64>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{source} (at t = {t})")]
    AtTime {
        t: f64,
        #[source]
        source: Box<SolverError>,
    },
}

impl SolverError {
    pub fn at_time(self, t: f64) -> Self {
        match self {
            SolverError::AtTime { .. } => self,
            other => SolverError::AtTime {
                t,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, with any time annotation removed.
    pub fn root(&self) -> &SolverError {
        match self {
            SolverError::AtTime { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;
