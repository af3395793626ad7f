use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{Accumulator, Estimate};
use super::{ftel_attempt, substream, ResourceTally, WalkError, BATCH_SIZE};
use crate::analytics::GateOrder;
use crate::rational::Rational;

/// Event model for connecting two chains through their free arms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeaveModel {
    /// Each round spends one `|CS_m>` and runs both F-teleportations; a side
    /// whose teleportation fails loses its arm, and rounds repeat until both
    /// sides succeed together.
    #[default]
    FullCzRetry,
    /// Each side independently burns arms until its own F-teleportation
    /// succeeds; one `|CS_m>` per round in which either side is still trying.
    IndependentSides,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeaveOutcome {
    pub cs_used: u64,
    /// Free arms consumed on each chain, including the one finally woven.
    pub arms_used: [u64; 2],
    pub rounds: u64,
}

pub fn simulate_weave<R: Rng + ?Sized>(
    m: GateOrder,
    model: WeaveModel,
    rng: &mut R,
) -> WeaveOutcome {
    let k = m.get();
    match model {
        WeaveModel::FullCzRetry => {
            let mut arms = [1u64, 1u64];
            let mut rounds = 0;
            loop {
                rounds += 1;
                let a = ftel_attempt(k, rng);
                let b = ftel_attempt(k, rng);
                if a && b {
                    break;
                }
                arms[0] += u64::from(!a);
                arms[1] += u64::from(!b);
            }
            WeaveOutcome {
                cs_used: rounds,
                arms_used: arms,
                rounds,
            }
        }
        WeaveModel::IndependentSides => {
            let mut side = || {
                let mut arms = 1;
                while !ftel_attempt(k, rng) {
                    arms += 1;
                }
                arms
            };
            let arms = [side(), side()];
            let rounds = arms[0].max(arms[1]);
            WeaveOutcome {
                cs_used: rounds,
                arms_used: arms,
                rounds,
            }
        }
    }
}

/// Exact `(E[CS], E[arms per side])` of one weave.
///
/// With side success `s = m/(m+1)`: retrying the full gate costs
/// `1/s²` rounds and `1 + (1-s)/s²` arms per side; independent sides cost
/// `1/s` arms each and `E[max] = 2/s - 1/(1-(1-s)²)` rounds.
pub fn weave_means(m: GateOrder, model: WeaveModel) -> (Rational, Rational) {
    let s = Rational::new(i64::from(m.get()), i64::from(m.get()) + 1);
    let fail = Rational::one() - s.clone();
    match model {
        WeaveModel::FullCzRetry => {
            let rounds = (&s * &s).recip();
            let arms = Rational::one() + &fail * &rounds;
            (rounds, arms)
        }
        WeaveModel::IndependentSides => {
            let arms = s.recip();
            let both_done = (Rational::one() - &fail * &fail).recip();
            (arms.clone() * 2 - both_done, arms)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeaveStats {
    pub m: GateOrder,
    pub model: WeaveModel,
    pub weaves: u64,
    pub cs: Estimate,
    pub arms_a: Estimate,
    pub arms_b: Estimate,
    /// Per-weave mean of the two sides.
    pub arms_per_side: Estimate,
    pub tally: ResourceTally,
}

/// Runs `count` independent weaves, batched into fixed-size substreams.
pub fn run_weaves(
    m: GateOrder,
    model: WeaveModel,
    count: u64,
    seed: u64,
) -> Result<WeaveStats, WalkError> {
    if count == 0 {
        return Err(WalkError::InvalidParams("weave count must be >= 1".into()));
    }
    let batches = count.div_ceil(BATCH_SIZE);
    let parts: Vec<([Accumulator; 4], [u64; 2])> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let mut acc = [Accumulator::default(); 4];
            let mut sums = [0u64; 2];
            for _ in 0..BATCH_SIZE.min(count - b * BATCH_SIZE) {
                let w = simulate_weave(m, model, &mut rng);
                acc[0].push(w.cs_used as f64);
                acc[1].push(w.arms_used[0] as f64);
                acc[2].push(w.arms_used[1] as f64);
                acc[3].push((w.arms_used[0] + w.arms_used[1]) as f64 / 2.0);
                sums[0] += w.cs_used;
                sums[1] += w.arms_used[0] + w.arms_used[1];
            }
            (acc, sums)
        })
        .collect();
    let mut total = [Accumulator::default(); 4];
    let mut tally = ResourceTally::default();
    for (acc, sums) in &parts {
        for (t, p) in total.iter_mut().zip(acc) {
            t.merge(p);
        }
        tally.add_cs(m.get(), sums[0]);
        tally.free_arms += sums[1];
    }
    Ok(WeaveStats {
        m,
        model,
        weaves: count,
        cs: total[0].estimate(),
        arms_a: total[1].estimate(),
        arms_b: total[2].estimate(),
        arms_per_side: total[3].estimate(),
        tally,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(v: u32) -> GateOrder {
        GateOrder::new(v).unwrap()
    }

    /// Exact expectations of (CS, arms on side A) by summing over round
    /// counts, truncated once the remaining tail mass drops below 1e-60.
    fn full_retry_oracle(m: i64) -> (Rational, Rational) {
        let s = Rational::new(m, m + 1);
        let both = &s * &s;
        let fail_round = Rational::one() - both.clone();
        // arms_A = 1 + number of failed rounds in which side A failed.
        let a_fail_given_round_fail = &(Rational::one() - s.clone()) / &fail_round;
        let mut cs = Rational::zero();
        let mut arms = Rational::zero();
        let mut p_reach = Rational::one();
        for rounds in 1..2000i64 {
            let p = &p_reach * &both;
            cs = cs + &p * &Rational::from_integer(rounds);
            let failed = Rational::from_integer(rounds - 1);
            arms = arms + &p * &(Rational::one() + &failed * &a_fail_given_round_fail);
            p_reach = &p_reach * &fail_round;
            if p_reach.to_f64() < 1e-60 {
                break;
            }
        }
        (cs, arms)
    }

    /// E[arms per side] and E[max of both sides] for independent geometric
    /// sides, summed over the joint distribution of the two counts.
    fn independent_oracle(m: i64) -> (f64, f64) {
        let s = m as f64 / (m + 1) as f64;
        let geo = |k: i64| (1.0 - s).powi((k - 1) as i32) * s;
        let (mut arms, mut cs) = (0.0, 0.0);
        for a in 1..400 {
            arms += a as f64 * geo(a);
            for b in 1..400 {
                cs += a.max(b) as f64 * geo(a) * geo(b);
            }
        }
        (arms, cs)
    }

    #[test]
    fn oracle_values() {
        let (cs, arms) = full_retry_oracle(2);
        assert!((cs.to_f64() - 2.25).abs() < 1e-12);
        assert!((arms.to_f64() - 1.75).abs() < 1e-12);
        let (cs, arms) = full_retry_oracle(1);
        assert!((cs.to_f64() - 4.0).abs() < 1e-12);
        assert!((arms.to_f64() - 3.0).abs() < 1e-12);
        let (arms, cs) = independent_oracle(2);
        assert!((arms - 1.5).abs() < 1e-12);
        assert!((cs - 15.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_match_oracles() {
        for m in 1..=5i64 {
            let (cs, arms) = weave_means(order(m as u32), WeaveModel::FullCzRetry);
            let (cs_o, arms_o) = full_retry_oracle(m);
            assert!((cs.to_f64() - cs_o.to_f64()).abs() < 1e-12);
            assert!((arms.to_f64() - arms_o.to_f64()).abs() < 1e-12);
            let (cs, arms) = weave_means(order(m as u32), WeaveModel::IndependentSides);
            let (arms_o, cs_o) = independent_oracle(m);
            assert!((cs.to_f64() - cs_o).abs() < 1e-12);
            assert!((arms.to_f64() - arms_o).abs() < 1e-12);
        }
        assert_eq!(
            weave_means(order(2), WeaveModel::FullCzRetry).0,
            Rational::new(9, 4)
        );
        assert_eq!(
            weave_means(order(2), WeaveModel::IndependentSides),
            (Rational::new(15, 8), Rational::new(3, 2))
        );
    }

    #[test]
    fn full_retry_means() {
        for (m, count) in [(1u32, 200_000u64), (2, 1_000_000), (3, 200_000)] {
            let (cs, arms) = full_retry_oracle(i64::from(m));
            let stats = run_weaves(order(m), WeaveModel::FullCzRetry, count, 31).unwrap();
            assert!(stats.cs.sigmas_from(cs.to_f64()) < 3.5, "m={m} {stats:?}");
            assert!(
                stats.arms_a.sigmas_from(arms.to_f64()) < 3.5,
                "m={m} {stats:?}"
            );
            assert!(
                stats.arms_b.sigmas_from(arms.to_f64()) < 3.5,
                "m={m} {stats:?}"
            );
            // closed form (m^2+m+1)/m^2
            let mm = i64::from(m);
            let closed = Rational::new(mm * mm + mm + 1, mm * mm).to_f64();
            assert!((arms.to_f64() - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_sides_means() {
        for m in [1u32, 2, 4] {
            let (arms, cs) = independent_oracle(i64::from(m));
            let stats = run_weaves(order(m), WeaveModel::IndependentSides, 300_000, 5).unwrap();
            assert!(
                stats.arms_per_side.sigmas_from(arms) < 3.5,
                "m={m} {stats:?}"
            );
            assert!(stats.cs.sigmas_from(cs) < 3.5, "m={m} {stats:?}");
        }
    }

    #[test]
    fn weave_outcome_invariants() {
        let mut rng = substream(0, 0);
        for model in [WeaveModel::FullCzRetry, WeaveModel::IndependentSides] {
            for _ in 0..1000 {
                let w = simulate_weave(order(1), model, &mut rng);
                assert!(w.cs_used >= 1 && w.arms_used[0] >= 1 && w.arms_used[1] >= 1);
                assert!(w.arms_used[0] <= w.rounds && w.arms_used[1] <= w.rounds);
            }
        }
    }

    #[test]
    fn batched_runs_are_reproducible() {
        let a = run_weaves(order(2), WeaveModel::FullCzRetry, 50_000, 9).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| run_weaves(order(2), WeaveModel::FullCzRetry, 50_000, 9).unwrap());
        assert_eq!(a, b);
        assert!(run_weaves(order(2), WeaveModel::FullCzRetry, 0, 9).is_err());
    }
}
