use freearm::analytics::{
    attempts_per_link, cz_success, formula_row, resources_per_gate, resources_per_link,
    step_back_prob, step_neutral_prob,
};
use freearm::{GateOrder, Rational};
use proptest::prelude::*;

fn order(v: u32) -> GateOrder {
    GateOrder::new(v).unwrap()
}

// p = n²/(n+1)², q = (2n+1)/(2(n+1)²), R = 1/(p - q), computed by hand.
#[test]
fn frozen_attempts_per_link() {
    for (n, want) in [(2, "6/1"), (3, "32/11"), (4, "50/23"), (5, "24/13")] {
        assert_eq!(
            attempts_per_link(order(n)).unwrap().to_string(),
            want,
            "n={n}"
        );
    }
    assert!(attempts_per_link(order(1)).is_err());
}

#[test]
fn frozen_row_at_two_two() {
    let row = formula_row(order(2), order(2));
    let link = row.per_link.unwrap();
    let gate = row.per_gate.unwrap();
    let got = [
        row.attempts_per_link.unwrap(),
        link.two_photon_units,
        link.cs_states,
        gate.construction_cs,
        gate.construction_units,
        gate.weave_cs,
    ];
    let want = ["6", "13.5", "22.5", "67.5", "40.5", "2.25"];
    for (g, w) in got.iter().zip(want) {
        assert_eq!(g.to_decimal(), w);
    }
}

#[test]
fn undefined_entries_at_n1() {
    let row = formula_row(order(1), order(3));
    assert!(row.per_link.is_none() && row.per_gate.is_none());
    assert_eq!(row.cluster.two_photon_units, Rational::new(16, 3));
    assert_eq!(row.free_arms_per_chain, Rational::new(4, 3));
}

proptest! {
    #[test]
    fn attempts_invert_drift(v in 2u32..300) {
        let n = order(v);
        let drift = &cz_success(n) - &step_back_prob(n);
        prop_assert_eq!(attempts_per_link(n).unwrap() * drift, Rational::one());
        let total = cz_success(n) + step_back_prob(n) + step_neutral_prob(n);
        prop_assert_eq!(total, Rational::one());
    }

    #[test]
    fn gate_cost_scales_link_cost(v in 2u32..100, w in 1u32..100) {
        let (n, m) = (order(v), order(w));
        let link = resources_per_link(n).unwrap();
        let gate = resources_per_gate(n, m).unwrap();
        let links = Rational::new(2 * (i64::from(w) + 1), i64::from(w));
        prop_assert_eq!(gate.construction_cs, &links * &link.cs_states);
        prop_assert_eq!(gate.construction_units, &links * &link.two_photon_units);
        prop_assert!(gate.weave_cs > Rational::one());
    }
}
