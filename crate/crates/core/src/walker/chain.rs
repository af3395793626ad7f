use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{aggregate, pooled_drift, proportion, Estimate, WalkStats};
use super::{ftel_attempt, substream, ResourceTally, StepOutcome, WalkError, BATCH_SIZE};
use crate::analytics::GateOrder;

/// Upper bound on preparation attempts before a seed is declared pathological.
pub const PREP_ATTEMPT_CAP: u64 = 1_000_000;

/// What happens when a backward step is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Attach attempts act on the end of a long chain; length is the net
    /// number of links gained and may dip below zero.
    #[default]
    Bulk,
    /// Length never drops below zero; a backward draw on an empty chain only
    /// discards the seed unit and is counted as neutral.
    Floor,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkParams {
    pub n: GateOrder,
    pub target_links: u64,
    pub trials: u64,
    pub seed: u64,
    /// Per-trial cap on attach attempts.
    pub max_steps: u64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl WalkParams {
    pub fn validate(&self) -> Result<(), WalkError> {
        if self.target_links == 0 {
            return Err(WalkError::InvalidParams("target_links must be >= 1".into()));
        }
        if self.trials == 0 {
            return Err(WalkError::InvalidParams("trials must be >= 1".into()));
        }
        if self.max_steps < self.target_links {
            return Err(WalkError::InvalidParams(format!(
                "max_steps ({}) must be >= target_links ({})",
                self.max_steps, self.target_links
            )));
        }
        Ok(())
    }
}

/// Cost and outcome of one attach attempt, without the map allocation of a
/// full [`ResourceTally`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub outcome: StepOutcome,
    pub units: u64,
    pub cs: u64,
}

/// A single-step law for the chain random walk.
pub trait StepModel: Sync {
    /// Order of the `|CS_k>` ancillas this model consumes.
    fn cs_order(&self) -> u32;

    fn attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StepRecord, WalkError>;
}

/// Off-line preparation result: attempts until both unit-side
/// F-teleportations succeed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepOutcome {
    pub attempts: u64,
    pub tally: ResourceTally,
}

fn prep_counts<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<(u64, u64), WalkError> {
    let mut attempts = 0;
    let mut cs = 0;
    while attempts < PREP_ATTEMPT_CAP {
        attempts += 1;
        if !ftel_attempt(n, rng) {
            cs += 1;
            continue;
        }
        cs += 2;
        if ftel_attempt(n, rng) {
            return Ok((attempts, cs));
        }
    }
    Err(WalkError::PrepCapExceeded(PREP_ATTEMPT_CAP))
}

/// Prepares one unit: each attempt spends a two-photon unit and one `|CS_n>`
/// if the first F-teleportation fails, two otherwise.
pub fn simulate_prep<R: Rng + ?Sized>(n: GateOrder, rng: &mut R) -> Result<PrepOutcome, WalkError> {
    let (attempts, cs) = prep_counts(n.get(), rng)?;
    let mut tally = ResourceTally {
        two_photon_units: attempts,
        ..Default::default()
    };
    tally.add_cs(n.get(), cs);
    Ok(PrepOutcome { attempts, tally })
}

/// Free-arm chain growth with `CZ_(n)`: prepare a unit off-line, then run the
/// two on-chain F-teleportations. A failure measures the last linked photon
/// with probability 1/2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkedChainStep {
    pub n: GateOrder,
}

impl StepModel for LinkedChainStep {
    fn cs_order(&self) -> u32 {
        self.n.get()
    }

    fn attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StepRecord, WalkError> {
        let n = self.n.get();
        let (units, cs) = prep_counts(n, rng)?;
        let outcome = if ftel_attempt(n, rng) && ftel_attempt(n, rng) {
            StepOutcome::Forward
        } else if rng.random::<bool>() {
            StepOutcome::Backward
        } else {
            StepOutcome::Neutral
        };
        Ok(StepRecord { outcome, units, cs })
    }
}

/// One attach attempt including its preparation.
pub fn simulate_step<R: Rng + ?Sized>(
    n: GateOrder,
    rng: &mut R,
) -> Result<(StepOutcome, ResourceTally), WalkError> {
    let model = LinkedChainStep { n };
    let rec = model.attempt(rng)?;
    let mut tally = ResourceTally {
        two_photon_units: rec.units,
        ..Default::default()
    };
    tally.add_cs(model.cs_order(), rec.cs);
    Ok((rec.outcome, tally))
}

/// Walk with caller-chosen outcome probabilities and fixed per-step costs,
/// for chain variants whose attach statistics come from elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeOutcomeStep {
    p_forward: f64,
    p_backward: f64,
    units_per_step: u64,
    cs_per_step: u64,
    cs_order: u32,
}

impl ThreeOutcomeStep {
    pub fn new(
        p_forward: f64,
        p_backward: f64,
        p_neutral: f64,
        units_per_step: u64,
        cs_per_step: u64,
        cs_order: u32,
    ) -> Result<Self, WalkError> {
        let probs = [p_forward, p_backward, p_neutral];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(WalkError::InvalidParams(format!(
                "outcome probabilities must lie in [0, 1], got {probs:?}"
            )));
        }
        if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(WalkError::InvalidParams(format!(
                "outcome probabilities must sum to 1, got {probs:?}"
            )));
        }
        Ok(ThreeOutcomeStep {
            p_forward,
            p_backward,
            units_per_step,
            cs_per_step,
            cs_order,
        })
    }
}

impl StepModel for ThreeOutcomeStep {
    fn cs_order(&self) -> u32 {
        self.cs_order
    }

    fn attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StepRecord, WalkError> {
        let u: f64 = rng.random();
        let outcome = if u < self.p_forward {
            StepOutcome::Forward
        } else if u < self.p_forward + self.p_backward {
            StepOutcome::Backward
        } else {
            StepOutcome::Neutral
        };
        Ok(StepRecord {
            outcome,
            units: self.units_per_step,
            cs: self.cs_per_step,
        })
    }
}

/// Record of a single chain-building trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialStats {
    pub steps: u64,
    pub forward: u64,
    pub backward: u64,
    pub neutral: u64,
    pub boundary_hits: u64,
    /// Always `forward - backward`.
    pub final_length: i64,
    pub tally: ResourceTally,
    /// Aborted at `max_steps` before reaching the target.
    pub capped: bool,
}

/// Runs trial `index` of a walk; its randomness is substream `index` of
/// `params.seed`.
pub fn run_trial<M: StepModel>(
    model: &M,
    params: &WalkParams,
    index: u64,
) -> Result<TrialStats, WalkError> {
    let mut rng = substream(params.seed, index);
    let target = params.target_links as i64;
    let (mut forward, mut backward, mut neutral, mut hits) = (0u64, 0u64, 0u64, 0u64);
    let (mut units, mut cs) = (0u64, 0u64);
    let mut length = 0i64;
    let mut steps = 0u64;
    while length < target && steps < params.max_steps {
        let rec = model.attempt(&mut rng)?;
        steps += 1;
        units += rec.units;
        cs += rec.cs;
        match rec.outcome {
            StepOutcome::Forward => {
                forward += 1;
                length += 1;
            }
            StepOutcome::Backward if length == 0 && params.boundary == Boundary::Floor => {
                hits += 1;
                neutral += 1;
            }
            StepOutcome::Backward => {
                backward += 1;
                length -= 1;
            }
            StepOutcome::Neutral => neutral += 1,
        }
    }
    let mut tally = ResourceTally {
        two_photon_units: units,
        ..Default::default()
    };
    tally.add_cs(model.cs_order(), cs);
    Ok(TrialStats {
        steps,
        forward,
        backward,
        neutral,
        boundary_hits: hits,
        final_length: length,
        tally,
        capped: length < target,
    })
}

/// Runs every trial of `params` with `model` in parallel on the current
/// rayon pool. Records come back in trial order.
pub fn run_trials<M: StepModel>(
    model: &M,
    params: &WalkParams,
) -> Result<Vec<TrialStats>, WalkError> {
    params.validate()?;
    (0..params.trials)
        .into_par_iter()
        .map(|i| run_trial(model, params, i))
        .collect()
}

/// [`run_trials`] followed by [`aggregate`].
pub fn build_chain_with<M: StepModel>(
    model: &M,
    params: &WalkParams,
) -> Result<WalkStats, WalkError> {
    aggregate(&run_trials(model, params)?)
}

/// Free-arm chain construction with `CZ_(params.n)`.
pub fn build_chain(params: &WalkParams) -> Result<WalkStats, WalkError> {
    build_chain_with(&LinkedChainStep { n: params.n }, params)
}

/// Outcome frequencies of independent attach attempts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFrequencies {
    pub steps: u64,
    pub forward: u64,
    pub backward: u64,
    pub neutral: u64,
    pub p_forward: Estimate,
    pub p_backward: Estimate,
    pub p_neutral: Estimate,
    pub drift: Estimate,
    pub tally: ResourceTally,
}

/// Samples `steps` independent attach attempts, batched into fixed-size
/// substreams of `seed`.
pub fn step_frequencies<M: StepModel>(
    model: &M,
    steps: u64,
    seed: u64,
) -> Result<StepFrequencies, WalkError> {
    if steps == 0 {
        return Err(WalkError::InvalidParams("steps must be >= 1".into()));
    }
    let batches = steps.div_ceil(BATCH_SIZE);
    let counts: Vec<[u64; 5]> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let len = BATCH_SIZE.min(steps - b * BATCH_SIZE);
            let mut c = [0u64; 5];
            for _ in 0..len {
                let rec = model.attempt(&mut rng)?;
                match rec.outcome {
                    StepOutcome::Forward => c[0] += 1,
                    StepOutcome::Backward => c[1] += 1,
                    StepOutcome::Neutral => c[2] += 1,
                }
                c[3] += rec.units;
                c[4] += rec.cs;
            }
            Ok(c)
        })
        .collect::<Result<_, WalkError>>()?;
    let mut total = [0u64; 5];
    for c in &counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let [forward, backward, neutral, units, cs] = total;
    let mut tally = ResourceTally {
        two_photon_units: units,
        ..Default::default()
    };
    tally.add_cs(model.cs_order(), cs);
    Ok(StepFrequencies {
        steps,
        forward,
        backward,
        neutral,
        p_forward: proportion(forward, steps),
        p_backward: proportion(backward, steps),
        p_neutral: proportion(neutral, steps),
        drift: pooled_drift(forward, backward, steps),
        tally,
    })
}
