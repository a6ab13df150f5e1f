//! File formats, reports, parallel execution and the `pvtool` command line
//! on top of [`prevalidation_core`].

pub mod campaign;
pub mod cli;
pub mod io;
pub mod parallel;
pub mod report;

pub use campaign::Campaign;
pub use io::{load_dataset, write_dataset, CsvError, Loaded};
pub use parallel::Rayon;
pub use prevalidation_core as core;
