use freearm::fock::{
    cz_via_cs, dual_rail, f_teleport, ideal_cz, logical_amplitudes, logical_fidelity,
    make_teleport_ancilla,
};
use freearm::GateOrder;
use num_complex::Complex64;
use proptest::prelude::*;

fn order(v: u32) -> GateOrder {
    GateOrder::new(v).unwrap()
}

fn qubit() -> impl Strategy<Value = [Complex64; 2]> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_filter_map(
        "nonzero",
        |(a, b, c, d)| {
            let norm = (a * a + b * b + c * c + d * d).sqrt();
            (norm > 1e-3).then(|| {
                [
                    Complex64::new(a / norm, b / norm),
                    Complex64::new(c / norm, d / norm),
                ]
            })
        },
    )
}

#[test]
fn failures_reveal_the_photon_number() {
    let q = dual_rail(Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)).unwrap();
    let branches = f_teleport(&q, 1, &make_teleport_ancilla(order(2)), order(2)).unwrap();
    let p = |z| -> f64 {
        branches
            .iter()
            .filter(|b| b.z_collapse() == Some(z))
            .map(|b| b.probability)
            .sum()
    };
    // Failure probability 1/3 splits by the input weights 0.36 and 0.64.
    assert!((p(0) - 0.36 / 3.0).abs() < 1e-12);
    assert!((p(1) - 0.64 / 3.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn teleport_carries_any_qubit(q in qubit(), k in 1u32..=3) {
        let input = dual_rail(q[0], q[1]).unwrap();
        let branches = f_teleport(&input, 1, &make_teleport_ancilla(order(k)), order(k)).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for b in branches.iter().filter(|b| b.success) {
            let out = b.output_mode.unwrap();
            let l = logical_amplitudes(&b.output, &[(0, out)]).unwrap();
            prop_assert!((logical_fidelity(&l, &q) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cz_matches_ideal_on_random_inputs(a in qubit(), b in qubit()) {
        let qa = dual_rail(a[0], a[1]).unwrap();
        let qb = dual_rail(b[0], b[1]).unwrap();
        let branches = cz_via_cs(&qa, &qb, order(1)).unwrap();
        let joint: f64 = branches.iter().filter(|x| x.success).map(|x| x.probability).sum();
        prop_assert!((joint - 0.25).abs() < 1e-12);
        for br in branches.iter().filter(|x| x.success) {
            let f = logical_fidelity(br.logical.as_ref().unwrap(), &ideal_cz(a, b));
            prop_assert!(f > 1.0 - 1e-10);
        }
    }
}
