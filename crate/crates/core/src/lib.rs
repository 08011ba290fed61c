//! Bell operators for CHSH and CGLMP tests, fair-sampling audits of
//! measurement sets, postselection pathologies, and the entanglement
//! dimension witness bound.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cglmp;
pub mod chsh;
pub mod error;
pub mod events;
pub mod linalg;
pub mod measurements;
pub mod montecarlo;
pub mod states;

pub use error::{Error, Result};
pub use linalg::{Complex, ComplexMatrix, EigenDecomposition, HermitianMatrix};
pub use measurements::{FairSamplingReport, MeasurementSetting, Outcome, Realization};
pub use states::{DensityMatrix, QuantumState, SchmidtDecomposition, StateVector};
