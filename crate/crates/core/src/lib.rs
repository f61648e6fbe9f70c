//! Spectral solver for -(p u')' - q u on the half-line when every solution is
//! square-integrable at infinity (the limit-circle regime). The pipeline:
//! coefficient fields -> oscillatory ansatz and Volterra-corrected Jost
//! solutions -> connection coefficients -> self-adjoint realizations,
//! eigenvalues, resolvents, and spectral expansions.

pub mod connection;
pub mod error;
pub mod extensions;
pub mod field;
pub mod grid;
pub mod jost;
pub mod ode;
pub mod quasiresolvent;

pub use error::{LcError, Result};
pub use field::{Alpha, CoefficientField, Family};
pub use grid::Grid;
pub use ode::{GridSolution, SharedGrid, StepperConfig};
