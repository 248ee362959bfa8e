//! Seeded Monte Carlo experiments and their artifacts.
//!
//! Every run derives its random streams from `(seed, experiment, λ-index,
//! run-index)` and results are gathered in run order, so the CSV output does
//! not depend on the number of worker threads.

pub mod config;
pub mod mc;
pub mod records;
pub mod validate;

pub use config::{Experiment, ExperimentConfig};
pub use mc::{cscrb_curve, run_fig1, run_fig2, sscrb_curve};
pub use records::{read_csv, write_csv, write_outputs, ExperimentOutput, ExperimentRecord};
pub use validate::{run_validate_sfim, run_validate_sscrb, SfimReport, SscrbReport};

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool when `threads` is set.
pub(crate) fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
