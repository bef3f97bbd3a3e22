//! Experiment harness for learned operator selection on CVRP: Solomon
//! files, solution sets, selector checkpoints, result tables, the studies
//! and the command-line interface.

mod error;

pub mod cli;
pub mod config;
pub mod dataset;
pub mod results;
pub mod solomon;
pub mod store;
pub mod studies;

pub use error::{Error, Result};
