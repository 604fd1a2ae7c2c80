//! Library side of the `manifold-embed` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod store;

pub use config::{DataSource, RunConfig, SweepGrid};
pub use error::CliError;

/// Environment variable capping the data-parallel width (`0` = automatic).
pub const THREADS_ENV: &str = "MANIFOLD_EMBED_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a non-negative integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}
