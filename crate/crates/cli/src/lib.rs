//! Entry point logic for the `parley` binary: serve, simulate, export and
//! analyze.

pub mod config;
pub mod error;
pub mod plot;
pub mod run;

pub use config::{Args, Mode, ProviderKind, RunConfig};
pub use error::{CliError, ErrorCode};
pub use run::{run, Summary};
