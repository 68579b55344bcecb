//! Config-driven experiment runner for `gausstest-core`.
//!
//! A run reads a JSON [`config::RunConfig`], executes its experiments in
//! order and writes one CSV table (fixed column set, see
//! [`record::COLUMNS`]) plus a `<table>.meta.json` sidecar. Tables depend
//! only on the config and seed, not on the number of worker threads.

pub mod config;
pub mod error;
pub mod output;
pub mod record;
pub mod runner;
pub mod summary;

pub use config::RunConfig;
pub use error::CliError;
pub use runner::{run, RunOutput};

/// Runs `cfg` on a dedicated pool of `workers` threads (all cores if `None`).
pub fn run_with_workers(cfg: &RunConfig, workers: Option<usize>) -> Result<RunOutput, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::config("--workers", "must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config("--workers", e.to_string()))?;
    Ok(pool.install(|| run(cfg)))
}
