//! Numerical toolkit for paths up to tree-like equivalence.
//!
//! The crate is `no_std` and only needs `alloc`. It provides
//!
//! * [`tensor`]: dense truncated tensor algebra over `R^d`,
//! * [`path`]: piecewise-linear paths with concatenation, reversal,
//!   tree reduction and variation norms,
//! * [`signature`]: exact truncated signatures via Chen's identity,
//! * [`topology`]: the product / quotient / reduced-representative metric
//!   comparisons and their witness experiments,
//! * [`ito`]: the signature series for affine controlled ODEs,
//! * [`regression`]: linear functionals fitted on signature features.
//!
//! File formats and the command-line front end live in the `sigpath` crate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod linalg;

pub mod ito;
pub mod path;
pub mod regression;
pub mod signature;
pub mod tensor;
pub mod topology;

pub use error::{Error, Result};
pub use ito::{LinearVectorField, SeriesSolution};
pub use path::PiecewiseLinearPath;
pub use regression::{LinearFunctional, RegressionDataset};
pub use signature::{exp_segment, log_signature, signature};
pub use tensor::{GroupTensor, TruncatedTensor};
pub use topology::ExperimentReport;
