//! Library side of the `spinn` command-line tool.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod model;

pub use error::{CliError, Result};
