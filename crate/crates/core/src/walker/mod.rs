//! Seeded Monte Carlo simulation of chain construction and weaving.
//!
//! Chain growth is a one-dimensional random walk: each attach attempt moves
//! the chain forward, backward (last linked photon lost) or leaves it alone.
//! Every random draw comes from a ChaCha8 substream keyed by
//! `(seed, stream index)`, so results are bit-identical regardless of how
//! many threads execute the trials.

mod chain;
mod cluster;
mod stats;
mod weave;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use chain::{
    build_chain, build_chain_with, run_trial, run_trials, simulate_prep, simulate_step,
    step_frequencies, Boundary, LinkedChainStep, PrepOutcome, StepFrequencies, StepModel,
    StepRecord, ThreeOutcomeStep, TrialStats, WalkParams, PREP_ATTEMPT_CAP,
};
pub use cluster::{
    attach_probabilities, cluster_model_rates, simulate_cluster_attach, ClusterAttach,
    ClusterAttachStep, CLUSTER_FAILURES_TO_LOSE_UNIT,
};
pub use stats::{aggregate, Accumulator, Estimate, WalkStats};
pub use weave::{run_weaves, simulate_weave, weave_means, WeaveModel, WeaveOutcome, WeaveStats};

/// Random stream type used by every simulation in this module.
pub type WalkRng = ChaCha8Rng;

/// Events per independent substream in batched runs. Fixed so that the
/// partition of work into streams never depends on the thread count.
pub const BATCH_SIZE: u64 = 16_384;

/// Substream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> WalkRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WalkError {
    #[error("invalid walk parameters: {0}")]
    InvalidParams(String),
    #[error("aggregate needs at least one trial")]
    EmptyInput,
    #[error("preparation did not succeed within {0} attempts")]
    PrepCapExceeded(u64),
}

/// Result of one attach attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepOutcome {
    /// New unit attached; the chain gains a link.
    Forward,
    /// Last linked photon measured; the chain loses a link.
    Backward,
    /// Attempt failed without touching the chain.
    Neutral,
}

/// Resources consumed so far. Counts only ever grow and add across trials.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceTally {
    /// Two-photon units (four-photon units for the cluster variant).
    pub two_photon_units: u64,
    /// `|CS_k>` copies keyed by gate order `k`.
    pub cs_states: BTreeMap<u32, u64>,
    pub free_arms: u64,
}

impl ResourceTally {
    pub fn add_cs(&mut self, order: u32, count: u64) {
        if count > 0 {
            *self.cs_states.entry(order).or_insert(0) += count;
        }
    }

    pub fn cs_total(&self) -> u64 {
        self.cs_states.values().sum()
    }

    pub fn cs_of_order(&self, order: u32) -> u64 {
        self.cs_states.get(&order).copied().unwrap_or(0)
    }

    pub fn absorb(&mut self, other: &ResourceTally) {
        self.two_photon_units += other.two_photon_units;
        self.free_arms += other.free_arms;
        for (&order, &count) in &other.cs_states {
            self.add_cs(order, count);
        }
    }
}

/// Bernoulli trial with success probability `k/(k+1)`, sampled exactly.
pub(crate) fn ftel_attempt<R: rand::Rng + ?Sized>(k: u32, rng: &mut R) -> bool {
    rng.random_range(0..=k) < k
}
