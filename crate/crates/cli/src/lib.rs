//! Command-line harness around `vrlab-core`: single experiments, the full
//! calculator suite, and a WebSocket session server for interactive probing.

pub mod commands;
pub mod config;
pub mod protocol;
pub mod server;
pub mod suite;
pub mod trajectory_csv;

use thiserror::Error;

/// Failure of a command. Every variant maps to exit code 1; usage errors
/// never get this far (clap exits with 2).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Catalog(#[from] vrlab_core::calculators::CatalogError),
    #[error(transparent)]
    Observer(#[from] vrlab_core::observer::ObserverError),
    #[error(transparent)]
    Probe(#[from] vrlab_core::prober::ProbeError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
