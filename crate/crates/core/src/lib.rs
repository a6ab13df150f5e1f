//! Pre-validation toolkit core.
//!
//! Builds a prediction rule on high-dimensional data inside K-fold
//! training splits, assembles the held-out predictions into a
//! pre-validated predictor, compares it to competing predictors in an
//! external linear or logistic regression, and tests its contribution
//! both analytically and with a row-permutation test. A simulation
//! harness estimates the level, power and coefficient bias of those tests
//! in three scenario families, and samplers for the limiting laws of the
//! leave-one-out t statistic allow Monte Carlo verification.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parallel
//! execution and the command line front end live in the `prevalidation`
//! companion crate.
#![no_std]
#![deny(missing_debug_implementations)]
// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod data;
pub mod error;
pub mod exec;
pub mod external;
pub mod linalg;
pub mod models;
pub mod permutation;
pub mod prevalidation;
pub mod rng;
pub mod simulation;
pub mod special;
pub mod stats;

pub use data::{make_folds, Dataset, FoldAssignment, FoldScheme, OutcomeKind};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use external::{ExternalFit, ExternalKind};
pub use linalg::Matrix;
pub use models::{FittedInternalModel, InternalModelSpec};
pub use permutation::{PermutationResult, StatisticKind};
pub use prevalidation::PrevalidatedPredictor;
pub use rng::SeedStream;
