use serde::{Deserialize, Serialize};

use super::chain::TrialStats;
use super::{ResourceTally, WalkError};

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Estimate {
        let mut acc = Accumulator::default();
        for &x in samples {
            acc.push(x);
        }
        acc.estimate()
    }

    /// `|mean - target|` in units of the standard error; infinite when the
    /// error is zero and the mean is off target.
    pub fn sigmas_from(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        if diff == 0.0 {
            0.0
        } else if self.stderr == 0.0 {
            f64::INFINITY
        } else {
            diff / self.stderr
        }
    }

    pub fn relative_error(&self, target: f64) -> f64 {
        ((self.mean - target) / target).abs()
    }
}

/// Streaming mean/variance (Welford), mergeable in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let weight = other.count as f64 / total as f64;
        self.mean += delta * weight;
        self.m2 += other.m2 + delta * delta * self.count as f64 * weight;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Unbiased (n-1) sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            stderr: if self.count == 0 {
                0.0
            } else {
                (self.variance() / self.count as f64).sqrt()
            },
        }
    }
}

/// Aggregate statistics over the trials of one chain-building run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub trials: u64,
    /// Trials that reached the target length.
    pub completed_trials: u64,
    /// Trials aborted at `max_steps`.
    pub capped_trials: u64,
    pub steps_taken: u64,
    pub forward: u64,
    pub backward: u64,
    pub neutral: u64,
    /// Backward draws absorbed by a floored boundary (counted as neutral).
    pub boundary_hits: u64,
    pub tally: ResourceTally,
    /// Per-trial steps divided by net links gained, over completed trials.
    pub attempts_per_net_link: Estimate,
    pub units_per_link: Estimate,
    pub cs_per_link: Estimate,
    /// Net links gained per step, pooled over every step of every trial.
    pub drift: Estimate,
}

/// Reduces per-trial records to means and standard errors. Trials are folded
/// in slice order so the result is reproducible bit for bit.
pub fn aggregate(trials: &[TrialStats]) -> Result<WalkStats, WalkError> {
    if trials.is_empty() {
        return Err(WalkError::EmptyInput);
    }
    let mut tally = ResourceTally::default();
    let (mut attempts, mut units, mut cs) = (
        Accumulator::default(),
        Accumulator::default(),
        Accumulator::default(),
    );
    let mut stats = WalkStats {
        trials: trials.len() as u64,
        completed_trials: 0,
        capped_trials: 0,
        steps_taken: 0,
        forward: 0,
        backward: 0,
        neutral: 0,
        boundary_hits: 0,
        tally: ResourceTally::default(),
        attempts_per_net_link: Estimate::default(),
        units_per_link: Estimate::default(),
        cs_per_link: Estimate::default(),
        drift: Estimate::default(),
    };
    for t in trials {
        stats.steps_taken += t.steps;
        stats.forward += t.forward;
        stats.backward += t.backward;
        stats.neutral += t.neutral;
        stats.boundary_hits += t.boundary_hits;
        tally.absorb(&t.tally);
        if t.capped {
            stats.capped_trials += 1;
        } else {
            stats.completed_trials += 1;
        }
        if !t.capped && t.final_length > 0 {
            let links = t.final_length as f64;
            attempts.push(t.steps as f64 / links);
            units.push(t.tally.two_photon_units as f64 / links);
            cs.push(t.tally.cs_total() as f64 / links);
        }
    }
    stats.tally = tally;
    stats.attempts_per_net_link = attempts.estimate();
    stats.units_per_link = units.estimate();
    stats.cs_per_link = cs.estimate();
    stats.drift = pooled_drift(stats.forward, stats.backward, stats.steps_taken);
    Ok(stats)
}

/// Mean and standard error of a per-step displacement in {+1, -1, 0}.
pub(crate) fn pooled_drift(forward: u64, backward: u64, steps: u64) -> Estimate {
    if steps == 0 {
        return Estimate::default();
    }
    let n = steps as f64;
    let pf = forward as f64 / n;
    let pb = backward as f64 / n;
    let mean = pf - pb;
    let var = (pf + pb - mean * mean).max(0.0);
    let var = if steps > 1 { var * n / (n - 1.0) } else { 0.0 };
    Estimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

/// Binomial proportion estimate `hits / total`.
pub(crate) fn proportion(hits: u64, total: u64) -> Estimate {
    if total == 0 {
        return Estimate::default();
    }
    let n = total as f64;
    let p = hits as f64 / n;
    let var = if total > 1 {
        p * (1.0 - p) * n / (n - 1.0)
    } else {
        0.0
    };
    Estimate {
        mean: p,
        stderr: (var / n).sqrt(),
    }
}
