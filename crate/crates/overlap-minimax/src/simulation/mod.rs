//! Data-generating processes and Monte Carlo experiments.
//!
//! Everything here works in `f64`. Each replication draws from its own
//! ChaCha stream keyed by `(seed, replication)`, so results do not depend on
//! scheduling and are reproducible bit for bit.

mod collection;
mod coverage;
mod example1;
mod rct;
mod toy;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::{decompose_estimand, Dataset, EstimandDecomposition, OverlapPartition};
use crate::error::Result;

pub use collection::{
    confidence_sequence_experiment, default_epochs, evaluate_sampling_option, run_confidence_sequence,
    sampling_option_aipwp, simulate_collection, CollectionParams, ConfSeqSummary, OptionAipwpSummary,
    SamplingOption,
};
pub use coverage::{
    coverage_experiment, interval_distance, CoverageConfig, CoverageReport, Dgp, Method, MethodSummary,
};
pub use example1::{simulate_example1, Example1Params};
pub use rct::{observational_from_rct, propensity_map_e, synthetic_rct, thin_rct, CaseStudyParams, ThinnedRct};
pub use toy::build_toy_dataset;

/// Random stream for replication `index` under master `seed`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulated dataset with its true regression functions at every unit.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset<f64>,
    /// `f(x_i, 0)`.
    pub f0: Vec<f64>,
    /// `f(x_i, 1)`.
    pub f1: Vec<f64>,
}

impl Simulated {
    pub fn effects(&self) -> Vec<f64> {
        self.f1.iter().zip(&self.f0).map(|(a, b)| a - b).collect()
    }

    pub fn decompose(&self, part: &OverlapPartition<f64>) -> Result<EstimandDecomposition<f64>> {
        decompose_estimand(&self.effects(), part)
    }

    /// Observed outcomes without noise.
    pub fn mean_outcomes(&self) -> Vec<f64> {
        self.data
            .z()
            .iter()
            .enumerate()
            .map(|(i, &z)| if z { self.f1[i] } else { self.f0[i] })
            .collect()
    }
}
