//! Free-arm cluster-chain growth by four-photon units.
//!
//! The repair procedure after a failed attach is not pinned down anywhere we
//! can derive it from, so this is one concrete model: attach with one
//! `CZ_(n)`; on failure try up to two repair gates on successively earlier
//! photons of the last unit; a third consecutive failure removes that unit.
//! Its long-run rates are reported next to the closed forms in
//! [`crate::analytics::cluster_resources_per_unit`], not checked against them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::{StepModel, StepRecord};
use super::{ftel_attempt, StepOutcome, WalkError};
use crate::analytics::{GateOrder, ResourceRates};
use crate::rational::Rational;

/// Gate attempts (attach plus repairs) before the last unit is lost.
pub const CLUSTER_FAILURES_TO_LOSE_UNIT: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAttach {
    pub outcome: StepOutcome,
    /// Four-photon units consumed (always one new unit).
    pub units_used: u64,
    pub cs_used: u64,
}

fn cz_attempt<R: Rng + ?Sized>(n: u32, rng: &mut R) -> bool {
    ftel_attempt(n, rng) && ftel_attempt(n, rng)
}

pub fn simulate_cluster_attach<R: Rng + ?Sized>(n: GateOrder, rng: &mut R) -> ClusterAttach {
    let k = n.get();
    let mut cs_used = 1;
    let outcome = if cz_attempt(k, rng) {
        StepOutcome::Forward
    } else {
        let mut repaired = false;
        for _ in 1..CLUSTER_FAILURES_TO_LOSE_UNIT {
            cs_used += 1;
            if cz_attempt(k, rng) {
                repaired = true;
                break;
            }
        }
        if repaired {
            StepOutcome::Neutral
        } else {
            StepOutcome::Backward
        }
    };
    ClusterAttach {
        outcome,
        units_used: 1,
        cs_used,
    }
}

/// Exact `(P(forward), P(backward), E[CS])` of one attach under the repair
/// model.
pub fn attach_probabilities(n: GateOrder) -> (Rational, Rational, Rational) {
    let v = i64::from(n.get());
    let p = Rational::new(v * v, (v + 1) * (v + 1));
    let fail = Rational::one() - p.clone();
    let mut cs = Rational::zero();
    let mut reach = Rational::one();
    for _ in 0..CLUSTER_FAILURES_TO_LOSE_UNIT {
        cs = cs + reach.clone();
        reach = &reach * &fail;
    }
    (p, reach, cs)
}

/// Long-run units and CS per net unit of the repair model, or `None` when it
/// does not drift forward.
pub fn cluster_model_rates(n: GateOrder) -> Option<ResourceRates> {
    let (p, q, cs) = attach_probabilities(n);
    let drift = &p - &q;
    if !drift.is_positive() {
        return None;
    }
    let units = drift.recip();
    Some(ResourceRates {
        cs_states: &cs * &units,
        two_photon_units: units,
        cs_order: n.get(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterAttachStep {
    pub n: GateOrder,
}

impl StepModel for ClusterAttachStep {
    fn cs_order(&self) -> u32 {
        self.n.get()
    }

    fn attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StepRecord, WalkError> {
        let a = simulate_cluster_attach(self.n, rng);
        Ok(StepRecord {
            outcome: a.outcome,
            units: a.units_used,
            cs: a.cs_used,
        })
    }
}
