//! Numerical laboratory for compressible power-law fluids and their
//! shear-constrained limits.
//!
//! Solvers are generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the production scalar.

pub mod diagnostics;
pub mod config;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod harness;
pub mod limit;
pub mod linalg;
pub mod onedim;
pub mod output;
pub mod powerlaw;
pub mod rng;
pub mod scalar;
pub mod semistationary;
pub mod singular;
pub mod transport_check;

pub use error::{Result, SolverError};
pub use scalar::Real;

pub type Grid1 = grid::Grid1D<f64>;
pub type Field1 = grid::Field1D<f64>;
pub type Grid2 = grid::Grid2D<f64>;
pub type Field2 = grid::Field2D<f64>;
pub type State1 = onedim::State1D<f64>;
pub type PowerLaw = powerlaw::PowerLawParams<f64>;
pub type Singular = singular::SingularParams<f64>;
