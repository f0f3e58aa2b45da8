//! Command-line pipelines over the `eigenorient` library.

pub mod args;
pub mod commands;
pub mod error;
pub mod formats;

pub use args::{Cli, Command};
pub use commands::run;
pub use error::{CliError, CliResult};
