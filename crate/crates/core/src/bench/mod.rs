//! Benchmark harness: environment suites, the training course, the trial
//! matrix and the significance report.

pub mod course;
pub mod matrix;
pub mod report;
pub mod stats;
pub mod suite;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::intervention::InterventionError;
use crate::pipeline::PipelineError;
use crate::registry::UnknownStrategy;
use crate::sim::SimError;
use crate::world::WorldError;

pub use course::{collect, course, course_worlds, nominal_lap, record_worlds, subset, NominalConfig};
pub use matrix::{prepare_variants, run_matrix, standard_variants, MatrixConfig, PreparedVariant, Trial, TrialTable, VariantSpec};
pub use report::{significance_matrix, to_csv, to_markdown, SignificanceMatrix};
pub use stats::{welch_t, WelchResult};
pub use suite::{generate_suite, load_suite, save_suite, SuiteConfig, SuiteEnv};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("undefined test: {0}")]
    UndefinedTest(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Intervention(#[from] InterventionError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Strategy(#[from] UnknownStrategy),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Stable 64-bit seed from a list of labels.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 8 bytes"))
}
