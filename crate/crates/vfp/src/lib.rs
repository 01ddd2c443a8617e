//! Command-line driver for `vfp-core`: JSON configuration, initial-condition
//! presets, plain-text snapshots, CSV series, SVG plots and the audit exit
//! code contract (0 pass, 2 flags only, 1 failure or error).

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod snapshot;

pub use commands::{dispatch, Command};
pub use config::RunConfig;
pub use error::{Error, Result};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "VFP_THREADS";

/// Sizes the global worker pool from `VFP_THREADS` (unset: rayon default).
/// Returns the pool size.
pub fn init_threads() -> Result<usize> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var(THREADS_ENV) {
        let n: usize = s
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::validation(THREADS_ENV, format!("expected a positive integer, got `{s}`")))?;
        builder = builder.num_threads(n);
    }
    // a pool built earlier in the process stays in place
    let _ = builder.build_global();
    Ok(rayon::current_num_threads())
}
