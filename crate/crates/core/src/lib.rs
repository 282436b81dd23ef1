//! Phase-space Monte Carlo estimators for linear-optical circuits with
//! exact small-instance oracles.

pub mod clifford;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod observables;
pub mod oracle;
pub mod rng;
pub mod sparse;
pub mod special;
pub mod states;

#[cfg(test)]
mod testutil;

pub use diagnostics::Counters;
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
