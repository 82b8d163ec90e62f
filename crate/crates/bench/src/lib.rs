//! Benchmark harness around `fttim-core`: seeded episode campaigns over
//! synthetic or file-backed features, paired variant comparisons, theory
//! sweeps and embedding export. The `fttim-bench` binary is a thin clap
//! front end over these modules.

pub mod campaign;
pub mod config;
pub mod export;
pub mod report;
pub mod stats;
pub mod theory;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] fttim_core::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;
