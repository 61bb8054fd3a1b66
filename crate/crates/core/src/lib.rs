//! Exact likelihood, Fisher information across sampling scales, and
//! efficient estimators for a compound Poisson process with symmetric ±1
//! jumps observed on a regular grid.

pub mod bessel;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod fisher;
pub mod gaussianization;
pub mod increment_law;
pub mod montecarlo;
pub mod nonhomogeneous;
pub mod quad;
pub mod report;
pub mod streams;

pub use error::{Error, Result};
