//! Command-line front end for `fracbag-core`: run configuration, artifact
//! files and the run record.

pub mod config;
pub mod error;
pub mod io;
pub mod run;
pub mod sweep;

pub use config::{Command, RunConfig};
pub use error::CliError;
pub use run::{execute, RunRecord};
