//! Scenario files, experiment drivers and CSV output for the `wkb`
//! command-line tool.

// `!(v > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drivers;
pub mod error;
pub mod scenario;
pub mod table;

pub use error::{CliError, CliResult};
pub use scenario::{LoadedScenario, Scenario};
pub use table::Table;
