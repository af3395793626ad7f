//! Closed-form resource accounting for free-arm chain construction and weaving.
//!
//! Every quantity is an exact [`Rational`]. `n` is the order of the `CZ_(n)`
//! gates used to grow chains and `m` the order of the gates used to weave
//! chains together.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

/// Order `k` of a KLM-type gate `CZ_(k)`; always at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct GateOrder(u32);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("gate order {0} is out of range (must be at least 1)")]
    OrderOutOfRange(u32),
    #[error("CZ_({0}) gives non-positive drift p - q; chain construction needs n >= 2")]
    NonPositiveDrift(u32),
}

impl GateOrder {
    pub fn new(value: u32) -> Result<Self, AnalyticsError> {
        if value == 0 {
            Err(AnalyticsError::OrderOutOfRange(value))
        } else {
            Ok(GateOrder(value))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    fn as_i64(self) -> i64 {
        i64::from(self.0)
    }
}

impl TryFrom<u32> for GateOrder {
    type Error = AnalyticsError;
    fn try_from(value: u32) -> Result<Self, Self::Error> {
        GateOrder::new(value)
    }
}

impl From<GateOrder> for u32 {
    fn from(order: GateOrder) -> u32 {
        order.0
    }
}

impl fmt::Display for GateOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Average resources consumed per net link (or per net unit for the cluster
/// variant, where `two_photon_units` counts four-photon units instead).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRates {
    pub two_photon_units: Rational,
    pub cs_states: Rational,
    /// Order of the `|CS_k>` ancillas counted in `cs_states`.
    pub cs_order: u32,
}

/// Average resources per two-qubit gate: chain growth in both chains plus
/// the weaving itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCost {
    /// `|CS_n>` copies spent growing both chains.
    pub construction_cs: Rational,
    pub construction_units: Rational,
    /// `|CS_m>` copies spent on the weaving gate.
    pub weave_cs: Rational,
    pub n: GateOrder,
    pub m: GateOrder,
}

/// Success probability `n/(n+1)` of one F-teleportation.
pub fn ftel_success(n: GateOrder) -> Rational {
    Rational::new(n.as_i64(), n.as_i64() + 1)
}

/// Success probability `n²/(n+1)²` of `CZ_(n)`: both F-teleportations succeed.
pub fn cz_success(n: GateOrder) -> Rational {
    let n = n.as_i64();
    Rational::new(n * n, (n + 1) * (n + 1))
}

/// Probability `(2n+1)/(2(n+1)²)` that an attach attempt measures the last
/// linked photon of the chain.
pub fn step_back_prob(n: GateOrder) -> Rational {
    let n = n.as_i64();
    Rational::new(2 * n + 1, 2 * (n + 1) * (n + 1))
}

/// Probability that an attach attempt fails without touching the chain.
/// Equal to [`step_back_prob`].
pub fn step_neutral_prob(n: GateOrder) -> Rational {
    Rational::one() - cz_success(n) - step_back_prob(n)
}

fn drift_denominator(n: GateOrder) -> Result<i64, AnalyticsError> {
    let v = n.as_i64();
    let den = 2 * v * v - 2 * v - 1;
    if den <= 0 {
        Err(AnalyticsError::NonPositiveDrift(n.get()))
    } else {
        Ok(den)
    }
}

/// Mean attach attempts per net link, `R(n) = 2(n+1)²/(2n²-2n-1) = 1/(p-q)`.
pub fn attempts_per_link(n: GateOrder) -> Result<Rational, AnalyticsError> {
    let den = drift_denominator(n)?;
    let v = n.as_i64();
    Ok(Rational::new(2 * (v + 1) * (v + 1), den))
}

/// Mean two-photon units consumed per attach attempt, `(n+1)²/n²`.
pub fn units_per_step(n: GateOrder) -> Rational {
    let v = n.as_i64();
    Rational::new((v + 1) * (v + 1), v * v)
}

/// Mean `|CS_n>` copies consumed per attach attempt, `(2n+1)(n+1)/n²`.
pub fn cs_per_step(n: GateOrder) -> Rational {
    let v = n.as_i64();
    Rational::new((2 * v + 1) * (v + 1), v * v)
}

/// Resources per net link of chain.
pub fn resources_per_link(n: GateOrder) -> Result<ResourceRates, AnalyticsError> {
    let den = drift_denominator(n)?;
    let v = n.as_i64();
    let n2 = v * v;
    Ok(ResourceRates {
        two_photon_units: Rational::new(2 * (v + 1).pow(4), n2 * den),
        cs_states: Rational::new(2 * (v + 1).pow(3) * (2 * v + 1), n2 * den),
        cs_order: n.get(),
    })
}

/// Mean free-armed links a chain spends per two-qubit gate, `(m+1)/m`.
pub fn free_arms_per_gate_per_chain(m: GateOrder) -> Rational {
    Rational::new(m.as_i64() + 1, m.as_i64())
}

/// Resources per two-qubit gate: two chains grown by `2(m+1)/m` links in
/// total at the per-link rate, plus `(m+1)²/m²` weaving ancillas.
pub fn resources_per_gate(n: GateOrder, m: GateOrder) -> Result<GateCost, AnalyticsError> {
    let per_link = resources_per_link(n)?;
    let links = free_arms_per_gate_per_chain(m) * 2;
    let mm = m.as_i64();
    Ok(GateCost {
        construction_cs: &links * &per_link.cs_states,
        construction_units: &links * &per_link.two_photon_units,
        weave_cs: Rational::new((mm + 1) * (mm + 1), mm * mm),
        n,
        m,
    })
}

/// Cluster-variant chain: resources per added four-photon unit. The
/// `two_photon_units` field carries four-photon units here.
pub fn cluster_resources_per_unit(n: GateOrder) -> ResourceRates {
    let v = n.as_i64();
    let den = v * v * (v + 1) * (v + 1) - v;
    ResourceRates {
        two_photon_units: Rational::new((v + 1).pow(4), den),
        cs_states: Rational::new((v + 1).pow(2) * (v * v + 3 * v + 3), den),
        cs_order: n.get(),
    }
}

/// One row of the formula table for a given `(n, m)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaRow {
    pub n: GateOrder,
    pub m: GateOrder,
    pub ftel_success: Rational,
    pub cz_success: Rational,
    pub step_back: Rational,
    /// `None` when `n` gives non-positive drift.
    pub attempts_per_link: Option<Rational>,
    pub per_link: Option<ResourceRates>,
    pub per_gate: Option<GateCost>,
    pub free_arms_per_chain: Rational,
    pub cluster: ResourceRates,
}

pub fn formula_row(n: GateOrder, m: GateOrder) -> FormulaRow {
    FormulaRow {
        n,
        m,
        ftel_success: ftel_success(n),
        cz_success: cz_success(n),
        step_back: step_back_prob(n),
        attempts_per_link: attempts_per_link(n).ok(),
        per_link: resources_per_link(n).ok(),
        per_gate: resources_per_gate(n, m).ok(),
        free_arms_per_chain: free_arms_per_gate_per_chain(m),
        cluster: cluster_resources_per_unit(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn order(v: u32) -> GateOrder {
        GateOrder::new(v).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn gate_order_rejects_zero() {
        assert_eq!(GateOrder::new(0), Err(AnalyticsError::OrderOutOfRange(0)));
        assert!(serde_json::from_str::<GateOrder>("0").is_err());
        assert_eq!(serde_json::from_str::<GateOrder>("3").unwrap(), order(3));
    }

    #[test]
    fn teleport_and_cz_success() {
        assert_eq!(ftel_success(order(1)), r(1, 2));
        assert_eq!(ftel_success(order(2)), r(2, 3));
        assert_eq!(cz_success(order(1)), r(1, 4));
        assert_eq!(cz_success(order(2)), r(4, 9));
        for v in 1..=10 {
            assert!(ftel_success(order(v + 1)) > ftel_success(order(v)));
            assert_eq!(cz_success(order(v)), ftel_success(order(v)).pow(2));
        }
    }

    #[test]
    fn step_back_values() {
        assert_eq!(step_back_prob(order(2)), r(5, 18));
        assert_eq!(step_back_prob(order(1)), r(3, 8));
        assert!(step_back_prob(order(1)) > cz_success(order(1)));
        for v in 1..=10 {
            let n = order(v);
            assert_eq!((Rational::one() - cz_success(n)) / 2, step_back_prob(n));
            assert_eq!(step_neutral_prob(n), step_back_prob(n));
        }
    }

    #[test]
    fn attempts_per_link_values() {
        assert_eq!(attempts_per_link(order(2)).unwrap(), r(6, 1));
        assert_eq!(attempts_per_link(order(3)).unwrap(), r(32, 11));
        assert_eq!(
            attempts_per_link(order(1)),
            Err(AnalyticsError::NonPositiveDrift(1))
        );
    }

    #[test]
    fn per_link_resources() {
        let two = resources_per_link(order(2)).unwrap();
        assert_eq!(two.two_photon_units, r(27, 2));
        assert_eq!(two.cs_states, r(45, 2));
        assert_eq!(two.cs_order, 2);
        let three = resources_per_link(order(3)).unwrap();
        assert_eq!(three.two_photon_units, r(512, 99));
        assert_eq!(three.cs_states, r(896, 99));
        assert!(resources_per_link(order(1)).is_err());
        for v in 2..=8 {
            let n = order(v);
            let rate = attempts_per_link(n).unwrap();
            let res = resources_per_link(n).unwrap();
            assert_eq!(res.two_photon_units, &rate * &units_per_step(n));
            assert_eq!(res.cs_states, &rate * &cs_per_step(n));
        }
    }

    #[test]
    fn per_gate_resources() {
        let g = resources_per_gate(order(2), order(2)).unwrap();
        assert_eq!(g.construction_cs, r(135, 2));
        assert_eq!(g.construction_units, r(81, 2));
        assert_eq!(g.weave_cs, r(9, 4));
        let g = resources_per_gate(order(2), order(1)).unwrap();
        assert_eq!(g.construction_cs, r(90, 1));
        assert_eq!(g.construction_units, r(54, 1));
        assert_eq!(g.weave_cs, r(4, 1));
        assert_eq!(
            resources_per_gate(order(1), order(2)),
            Err(AnalyticsError::NonPositiveDrift(1))
        );
    }

    #[test]
    fn free_arm_counts() {
        assert_eq!(free_arms_per_gate_per_chain(order(1)), r(2, 1));
        assert_eq!(free_arms_per_gate_per_chain(order(2)), r(3, 2));
    }

    #[test]
    fn cluster_values() {
        let c1 = cluster_resources_per_unit(order(1));
        assert_eq!((c1.two_photon_units, c1.cs_states), (r(16, 3), r(28, 3)));
        let c2 = cluster_resources_per_unit(order(2));
        assert_eq!((c2.two_photon_units, c2.cs_states), (r(81, 34), r(117, 34)));
    }

    #[test]
    fn formula_row_marks_undefined_entries() {
        let row = formula_row(order(1), order(1));
        assert!(row.attempts_per_link.is_none());
        assert!(row.per_gate.is_none());
        let row = formula_row(order(2), order(2));
        assert_eq!(row.attempts_per_link, Some(r(6, 1)));
        let json = serde_json::to_string(&row).unwrap();
        let back: FormulaRow = serde_json::from_str(&json).unwrap();
        assert_eq!(back, row);
    }

    proptest! {
        #[test]
        fn drift_is_reciprocal_of_attempts(v in 2u32..200) {
            let n = order(v);
            prop_assert_eq!(
                cz_success(n) - step_back_prob(n),
                attempts_per_link(n).unwrap().recip()
            );
        }

        #[test]
        fn outcome_probabilities_partition_unity(v in 1u32..200) {
            let n = order(v);
            prop_assert_eq!(cz_success(n) + step_back_prob(n) * 2, Rational::one());
        }

        #[test]
        fn per_gate_is_scaled_per_link(v in 2u32..60, w in 1u32..60) {
            let (n, m) = (order(v), order(w));
            let link = resources_per_link(n).unwrap();
            let gate = resources_per_gate(n, m).unwrap();
            let scale = r(2 * (i64::from(w) + 1), i64::from(w));
            prop_assert_eq!(gate.construction_cs, &scale * &link.cs_states);
            prop_assert_eq!(gate.construction_units, &scale * &link.two_photon_units);
            prop_assert_eq!(gate.weave_cs, free_arms_per_gate_per_chain(m).pow(2));
            prop_assert!(link.cs_states.is_positive() && link.two_photon_units.is_positive());
        }

        #[test]
        fn cluster_denominator_positive(v in 1u32..500) {
            let c = cluster_resources_per_unit(order(v));
            prop_assert!(c.two_photon_units.is_positive() && c.cs_states.is_positive());
        }
    }
}
