use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{hadamard, pauli_x, pauli_z, Basis, MeasurementRecord, PureState, PROB_EPS};
use super::{DofId, DofKind, PhotonId, StateError};

/// Z corrections `(on A's linked polarization, on B's)` indexed by the
/// X-measurement outcomes `[x_A][x_B]` of the two woven arms.
///
/// Projecting the arms onto `<x_A x_B|` after the CZ leaves the phase
/// `(-1)^{(a+x_A)(b+x_B)}` on link values `a`, `b`; `Z^{x_B}` on A and
/// `Z^{x_A}` on B remove everything except `(-1)^{ab}`.
pub const WEAVE_CORRECTIONS: [[(bool, bool); 2]; 2] = [
    [(false, false), (true, false)],
    [(false, true), (true, true)],
];

/// Whether the linked polarization needs a Z after its free arm was measured
/// with `outcome` (in either basis, when no gate acted on the arm).
pub fn arm_needs_link_correction(outcome: u8) -> bool {
    outcome == 1
}

/// One link of a chain: `(|0>|↕>|+> + |1>|↔>|->)/√2` over
/// `path(chain, pos)`, `pol(chain, pos+1)` and `arm(chain, pos+1)`.
pub fn link_state(chain: u32, pos: u32) -> PureState {
    let h = Complex64::new(0.5, 0.0);
    let z = Complex64::new(0.0, 0.0);
    // index bits: path, pol, arm
    let amps = vec![h, h, z, z, z, z, h, -h];
    PureState::new(
        vec![
            DofId::path(chain, pos),
            DofId::pol(chain, pos + 1),
            DofId::arm(chain, pos + 1),
        ],
        amps,
    )
    .expect("link state is normalized")
}

/// A chain of `links` links on chain index 0 with the data `(α, β)` on the
/// polarization of photon 1.
pub fn build_chain_state(
    links: u32,
    data: (Complex64, Complex64),
) -> Result<PureState, StateError> {
    build_chain_state_on(0, links, data, super::DEFAULT_DOF_CAP)
}

/// The trailing `|0>` path of the last photon is a fixed product factor and
/// is left out, so the state has `1 + 3·links` degrees of freedom.
pub fn build_chain_state_on(
    chain: u32,
    links: u32,
    data: (Complex64, Complex64),
    cap: usize,
) -> Result<PureState, StateError> {
    let needed = 1 + 3 * links as usize;
    if needed > cap {
        return Err(StateError::CapExceeded { needed, cap });
    }
    let mut state = PureState::qubit(DofId::pol(chain, 1), data.0, data.1)?;
    for pos in 1..=links {
        state = state.tensor_capped(&link_state(chain, pos), cap)?;
    }
    Ok(state)
}

/// The four-DOF resource left by a successful weave of two fresh links at
/// position 1 of chains `a` and `b`: `Σ (-1)^{ab} |a a>|b b> / 2` over
/// `path(·,1)`, `pol(·,2)`.
pub fn weave_target_state(a: u32, b: u32) -> PureState {
    let mut amps = vec![Complex64::new(0.0, 0.0); 16];
    let labels = vec![
        DofId::path(a, 1),
        DofId::pol(a, 2),
        DofId::path(b, 1),
        DofId::pol(b, 2),
    ];
    for x in 0..2usize {
        for y in 0..2usize {
            let idx = (x << 3) | (x << 2) | (y << 1) | y;
            amps[idx] = Complex64::new(if x & y == 1 { -0.5 } else { 0.5 }, 0.0);
        }
    }
    PureState::new(labels, amps).expect("weave target is normalized")
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeaveBranch {
    pub records: [MeasurementRecord; 2],
    pub probability: f64,
    /// Z corrections applied to the two linked polarizations.
    pub correction: (bool, bool),
    pub state: PureState,
}

impl WeaveBranch {
    pub fn outcomes(&self) -> (u8, u8) {
        (self.records[0].outcome, self.records[1].outcome)
    }
}

fn linked_pol(arm: &DofId) -> DofId {
    DofId::pol(arm.photon.chain, arm.photon.pos)
}

fn check_arm(state: &PureState, arm: &DofId) -> Result<(), StateError> {
    if !arm.is_free_arm() {
        return Err(StateError::ArmNotFree(*arm));
    }
    if !state.contains(arm) {
        return Err(StateError::UnknownDof(*arm));
    }
    Ok(())
}

/// Weaves two separate chain states through their free arms.
pub fn weave(
    a: &PureState,
    b: &PureState,
    arm_a: &DofId,
    arm_b: &DofId,
) -> Result<Vec<WeaveBranch>, StateError> {
    check_arm(a, arm_a)?;
    check_arm(b, arm_b)?;
    weave_in_place(&a.tensor(b)?, arm_a, arm_b)
}

/// CZ on the two arms, X measurement of both, then the Z corrections of
/// [`WEAVE_CORRECTIONS`] on the arms' linked polarizations.
pub fn weave_in_place(
    state: &PureState,
    arm_a: &DofId,
    arm_b: &DofId,
) -> Result<Vec<WeaveBranch>, StateError> {
    check_arm(state, arm_a)?;
    check_arm(state, arm_b)?;
    for arm in [arm_a, arm_b] {
        if state.single_purity(arm)? > 1.0 - 1e-9 {
            return Err(StateError::Disconnected(*arm));
        }
    }
    let (pol_a, pol_b) = (linked_pol(arm_a), linked_pol(arm_b));
    for pol in [&pol_a, &pol_b] {
        if !state.contains(pol) {
            return Err(StateError::MissingDof(*pol));
        }
    }
    let mut entangled = state.clone();
    entangled.apply_cz(arm_a, arm_b)?;
    let mut out = Vec::with_capacity(4);
    for (rec_a, after_a) in entangled.measure(arm_a, Basis::X)? {
        for (rec_b, after_b) in after_a.measure(arm_b, Basis::X)? {
            let probability = rec_a.probability * rec_b.probability;
            if probability < PROB_EPS {
                continue;
            }
            let correction = WEAVE_CORRECTIONS[rec_a.outcome as usize][rec_b.outcome as usize];
            let mut corrected = after_b;
            if correction.0 {
                corrected.apply_single(&pol_a, &pauli_z())?;
            }
            if correction.1 {
                corrected.apply_single(&pol_b, &pauli_z())?;
            }
            out.push(WeaveBranch {
                records: [
                    rec_a,
                    MeasurementRecord {
                        probability,
                        ..rec_b
                    },
                ],
                probability,
                correction,
                state: corrected,
            });
        }
    }
    Ok(out)
}

/// Failed weave: the arm is lost to a Z measurement. Branch states are left
/// uncorrected; see [`arm_needs_link_correction`].
pub fn fail_weave(
    state: &PureState,
    arm: &DofId,
) -> Result<Vec<(MeasurementRecord, PureState)>, StateError> {
    check_arm(state, arm)?;
    state.measure(arm, Basis::Z)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliCorrection {
    pub x: bool,
    pub z: bool,
}

/// Accumulated Pauli byproducts per chain: the carrier holds
/// `X^x Z^z |ideal>` up to global phase.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorrectionFrame {
    pub chains: BTreeMap<u32, PauliCorrection>,
}

impl CorrectionFrame {
    pub fn single(chain: u32, x: bool, z: bool) -> Self {
        let mut f = CorrectionFrame::default();
        f.chains.insert(chain, PauliCorrection { x, z });
        f
    }

    pub fn get(&self, chain: u32) -> PauliCorrection {
        self.chains.get(&chain).copied().unwrap_or_default()
    }

    pub fn is_identity(&self) -> bool {
        self.chains.values().all(|p| !p.x && !p.z)
    }

    /// Frame of a byproduct `other` applied after `self` (signs dropped).
    pub fn compose(&self, other: &CorrectionFrame) -> CorrectionFrame {
        let mut out = self.clone();
        for (&c, p) in &other.chains {
            let e = out.chains.entry(c).or_default();
            e.x ^= p.x;
            e.z ^= p.z;
        }
        out
    }

    /// Moves the frame through a CZ between chains `a` and `b`.
    pub fn conjugate_cz(&mut self, a: u32, b: u32) {
        let (pa, pb) = (self.get(a), self.get(b));
        self.chains.insert(
            a,
            PauliCorrection {
                x: pa.x,
                z: pa.z ^ pb.x,
            },
        );
        self.chains.insert(
            b,
            PauliCorrection {
                x: pb.x,
                z: pb.z ^ pa.x,
            },
        );
    }

    /// Applies `X^x Z^z` to every chain's carrier.
    pub fn apply(&self, state: &mut PureState) -> Result<(), StateError> {
        for (&c, p) in &self.chains {
            let carrier = carrier(state, c)?;
            if p.z {
                state.apply_single(&carrier, &pauli_z())?;
            }
            if p.x {
                state.apply_single(&carrier, &pauli_x())?;
            }
        }
        Ok(())
    }

    /// Removes the frame: `X^x` then `Z^z` on each carrier.
    pub fn undo(&self, state: &mut PureState) -> Result<(), StateError> {
        for (&c, p) in &self.chains {
            let carrier = carrier(state, c)?;
            if p.x {
                state.apply_single(&carrier, &pauli_x())?;
            }
            if p.z {
                state.apply_single(&carrier, &pauli_z())?;
            }
        }
        Ok(())
    }
}

/// Lowest-position linked polarization of `chain`, which holds its data.
pub(crate) fn carrier(state: &PureState, chain: u32) -> Result<DofId, StateError> {
    state
        .labels()
        .iter()
        .find(|d| d.photon.chain == chain && !d.photon.arm && d.kind == DofKind::Polarization)
        .copied()
        .ok_or(StateError::MissingDof(DofId::pol(chain, 0)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TeleportBranch {
    /// Outcome `2a + b` with `a` the polarization bit, `b` the path bit.
    pub record: MeasurementRecord,
    pub state: PureState,
    /// Byproduct left on the next polarization.
    pub frame: CorrectionFrame,
}

impl TeleportBranch {
    pub fn probability(&self) -> f64 {
        self.record.probability
    }
}

/// Bell measurement of the carrier photon's path and polarization, moving
/// the data onto the next photon's polarization.
pub fn bell_teleport(
    state: &PureState,
    photon: PhotonId,
) -> Result<Vec<TeleportBranch>, StateError> {
    let (c, j) = (photon.chain, photon.pos);
    let pol = DofId::pol(c, j);
    let path = DofId::path(c, j);
    let next = DofId::pol(c, j + 1);
    if photon.arm || carrier(state, c).ok() != Some(pol) {
        return Err(StateError::NotDataCarrier(photon));
    }
    for d in [&path, &next] {
        if !state.contains(d) {
            return Err(StateError::MissingDof(*d));
        }
    }
    let arm = DofId::arm(c, j + 1);
    if state.contains(&arm) {
        return Err(StateError::ArmAttached(next));
    }
    let mut rotated = state.clone();
    rotated.apply_cnot(&pol, &path)?;
    rotated.apply_single(&pol, &hadamard())?;
    let mut out = Vec::with_capacity(4);
    for a in 0..2u8 {
        let (pa, after_a) = rotated.project(&pol, a)?;
        let Some(after_a) = after_a else { continue };
        for b in 0..2u8 {
            let (pb, after_b) = after_a.project(&path, b)?;
            let Some(after_b) = after_b else { continue };
            let probability = pa * pb;
            if probability < PROB_EPS {
                continue;
            }
            out.push(TeleportBranch {
                record: MeasurementRecord {
                    dof: pol,
                    basis: Basis::Bell(path),
                    outcome: 2 * a + b,
                    probability,
                },
                state: after_b,
                frame: CorrectionFrame::single(c, b == 1, a == 1),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::state::fidelity;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    /// Direct expansion of the chain: sum over the path bits `a_i`, each link
    /// contributing `|a_i>|a_i>(|0> + (-1)^{a_i}|1>)/2`.
    fn chain_oracle(links: u32, data: (Complex64, Complex64)) -> PureState {
        let n = 1 + 3 * links as usize;
        let mut labels = vec![DofId::pol(0, 1)];
        for i in 1..=links {
            labels.extend([
                DofId::path(0, i),
                DofId::pol(0, i + 1),
                DofId::arm(0, i + 1),
            ]);
        }
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        for d in 0..2usize {
            for bits in 0..(1usize << links) {
                for arms in 0..(1usize << links) {
                    let mut idx = d;
                    let mut amp = if d == 0 { data.0 } else { data.1 };
                    for i in 0..links as usize {
                        let a = (bits >> i) & 1;
                        let s = (arms >> i) & 1;
                        idx = (idx << 3) | (a << 2) | (a << 1) | s;
                        amp *= 0.5 * if a & s == 1 { -1.0 } else { 1.0 };
                    }
                    amps[idx] = amp;
                }
            }
        }
        PureState::new(labels, amps).unwrap()
    }

    #[test]
    fn chain_matches_direct_expansion() {
        for data in [(c(1.0, 0.0), c(0.0, 0.0)), (c(0.6, 0.0), c(0.0, 0.8))] {
            for links in 1..=3 {
                let s = build_chain_state(links, data).unwrap();
                assert_eq!(s.len(), 1 + 3 * links as usize);
                let f = fidelity(&s, &chain_oracle(links, data)).unwrap();
                assert!((f - 1.0).abs() < 1e-12);
                assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_link_is_ghz_correlated() {
        let s = build_chain_state(1, (c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        assert_eq!(s.len(), 4);
        for (rec, branch) in s.measure(&DofId::path(0, 1), Basis::Z).unwrap() {
            let pol = branch.measure(&DofId::pol(0, 2), Basis::Z).unwrap();
            assert_eq!(pol.len(), 1);
            assert_eq!(pol[0].0.outcome, rec.outcome);
        }
        let plus = build_chain_state(1, (c(H, 0.0), c(H, 0.0))).unwrap();
        assert!((plus.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_errors() {
        let data = (c(1.0, 0.0), c(0.0, 0.0));
        assert_eq!(
            build_chain_state(7, data),
            Err(StateError::CapExceeded {
                needed: 22,
                cap: 20
            })
        );
        assert!(matches!(
            build_chain_state(1, (c(1.0, 0.0), c(1.0, 0.0))),
            Err(StateError::NotNormalized(_))
        ));
    }

    /// Weave branch before correction, expanded term by term: link values
    /// `a`, `b` with arm states `H|a>`, `H|b>`, the arm CZ, and the
    /// projection onto `<x_A|H`, `<x_B|H`.
    fn weave_branch_oracle(xa: usize, xb: usize) -> PureState {
        let hm = [[H, H], [H, -H]];
        let mut amps = vec![c(0.0, 0.0); 16];
        for a in 0..2 {
            for b in 0..2 {
                let mut amp = 0.5;
                let mut sum = 0.0;
                for sa in 0..2 {
                    for sb in 0..2 {
                        let cz = if sa & sb == 1 { -1.0 } else { 1.0 };
                        sum += hm[sa][a] * hm[sb][b] * cz * hm[xa][sa] * hm[xb][sb];
                    }
                }
                amp *= sum;
                amps[(a << 3) | (a << 2) | (b << 1) | b] = c(amp, 0.0);
            }
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        PureState::new(
            vec![
                DofId::path(0, 1),
                DofId::pol(0, 2),
                DofId::path(1, 1),
                DofId::pol(1, 2),
            ],
            amps,
        )
        .unwrap()
    }

    #[test]
    fn correction_table_is_rederived_by_brute_force() {
        let target = weave_target_state(0, 1);
        for (xa, row) in WEAVE_CORRECTIONS.iter().enumerate() {
            for (xb, &frozen) in row.iter().enumerate() {
                let raw = weave_branch_oracle(xa, xb);
                let mut found = Vec::new();
                for za in [false, true] {
                    for zb in [false, true] {
                        let mut s = raw.clone();
                        if za {
                            s.apply_single(&DofId::pol(0, 2), &pauli_z()).unwrap();
                        }
                        if zb {
                            s.apply_single(&DofId::pol(1, 2), &pauli_z()).unwrap();
                        }
                        if (fidelity(&s, &target).unwrap() - 1.0).abs() < 1e-12 {
                            found.push((za, zb));
                        }
                    }
                }
                assert_eq!(found, vec![frozen]);
            }
        }
        // the (+,+) branch needs nothing
        assert_eq!(WEAVE_CORRECTIONS[0][0], (false, false));
    }

    #[test]
    fn weave_of_fresh_links_gives_target_on_every_branch() {
        let (a, b) = (link_state(0, 1), link_state(1, 1));
        let branches = weave(&a, &b, &DofId::arm(0, 2), &DofId::arm(1, 2)).unwrap();
        assert_eq!(branches.len(), 4);
        let target = weave_target_state(0, 1);
        let mut total = 0.0;
        for br in &branches {
            assert!((br.probability - 0.25).abs() < 1e-12);
            assert!((fidelity(&br.state, &target).unwrap() - 1.0).abs() < 1e-10);
            total += br.probability;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weave_matches_ideal_cz_on_chains_with_data() {
        // General oracle: CZ between the linked polarizations, with both
        // arms projected onto |0> (which weighs both link values equally).
        let da = (c(0.6, 0.0), c(0.0, 0.8));
        let db = (c(H, 0.0), c(-H, 0.0));
        let a = build_chain_state_on(0, 2, da, 20).unwrap();
        let b = build_chain_state_on(1, 2, db, 20).unwrap();
        let (arm_a, arm_b) = (DofId::arm(0, 3), DofId::arm(1, 3));
        let oracle = a.tensor(&b).unwrap();
        let oracle = oracle.project(&arm_a, 0).unwrap().1.unwrap();
        let mut oracle = oracle.project(&arm_b, 0).unwrap().1.unwrap();
        oracle
            .apply_cz(&DofId::pol(0, 3), &DofId::pol(1, 3))
            .unwrap();
        for br in weave(&a, &b, &arm_a, &arm_b).unwrap() {
            assert!((fidelity(&br.state, &oracle).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn weave_guards() {
        let a = link_state(0, 1);
        let b = link_state(1, 1);
        assert!(matches!(
            weave(&a, &b, &DofId::pol(0, 2), &DofId::arm(1, 2)),
            Err(StateError::ArmNotFree(_))
        ));
        let zero = |ch: u32| {
            PureState::new(
                vec![DofId::pol(ch, 2), DofId::arm(ch, 2)],
                vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            )
            .unwrap()
        };
        assert!(matches!(
            weave(&zero(0), &zero(1), &DofId::arm(0, 2), &DofId::arm(1, 2)),
            Err(StateError::Disconnected(_))
        ));
    }

    #[test]
    fn failed_weave_keeps_link_maximally_entangled() {
        let s = build_chain_state(1, (c(0.6, 0.0), c(0.0, 0.8))).unwrap();
        let branches = fail_weave(&s, &DofId::arm(0, 2)).unwrap();
        assert_eq!(branches.len(), 2);
        for (rec, br) in &branches {
            assert!((rec.probability - 0.5).abs() < 1e-12);
            let [hi, lo] = br
                .schmidt_coefficients(&DofId::path(0, 1), &DofId::pol(0, 2))
                .unwrap();
            assert!((hi - H).abs() < 1e-10 && (lo - H).abs() < 1e-10);
        }
        assert!(matches!(
            fail_weave(&s, &DofId::path(0, 1)),
            Err(StateError::ArmNotFree(_))
        ));
    }

    fn detach_all(state: PureState, links: u32) -> Vec<(f64, PureState)> {
        let mut out = vec![(1.0, state)];
        for j in 2..=links + 1 {
            let mut next = Vec::new();
            for (p, s) in out {
                for (rec, mut br) in fail_weave(&s, &DofId::arm(0, j)).unwrap() {
                    if arm_needs_link_correction(rec.outcome) {
                        br.apply_single(&DofId::pol(0, j), &pauli_z()).unwrap();
                    }
                    next.push((p * rec.probability, br));
                }
            }
            out = next;
        }
        out
    }

    #[test]
    fn teleport_over_k_links_preserves_data_on_every_branch() {
        for data in [
            (c(1.0, 0.0), c(0.0, 0.0)),
            (c(H, 0.0), c(0.0, H)),
            (c(0.28, 0.96), c(0.0, 0.0)),
        ] {
            for k in 1..=3u32 {
                let chain = build_chain_state(k, data).unwrap();
                let mut branches = detach_all(chain, k);
                assert_eq!(branches.len(), 1 << k);
                for j in 1..=k {
                    let mut next = Vec::new();
                    for (p, s) in branches {
                        let tel = bell_teleport(&s, PhotonId::linked(0, j)).unwrap();
                        assert_eq!(tel.len(), 4);
                        for t in tel {
                            assert!((t.probability() - 0.25).abs() < 1e-12);
                            let mut st = t.state;
                            t.frame.undo(&mut st).unwrap();
                            next.push((p * t.record.probability, st));
                        }
                    }
                    branches = next;
                }
                assert_eq!(branches.len(), (1 << k) * 4usize.pow(k));
                let expect = PureState::qubit(DofId::pol(0, k + 1), data.0, data.1).unwrap();
                let total: f64 = branches.iter().map(|(p, _)| p).sum();
                assert!((total - 1.0).abs() < 1e-12);
                for (_, s) in &branches {
                    assert!((fidelity(s, &expect).unwrap() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn teleport_guards() {
        let s = build_chain_state(2, (c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        assert_eq!(
            bell_teleport(&s, PhotonId::linked(0, 1)),
            Err(StateError::ArmAttached(DofId::pol(0, 2)))
        );
        assert!(matches!(
            bell_teleport(&s, PhotonId::linked(0, 2)),
            Err(StateError::NotDataCarrier(_))
        ));
        let lone = PureState::qubit(DofId::pol(0, 1), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!(matches!(
            bell_teleport(&lone, PhotonId::linked(0, 1)),
            Err(StateError::MissingDof(_))
        ));
    }

    #[test]
    fn frame_apply_then_undo_is_identity() {
        let s = build_chain_state(1, (c(0.6, 0.0), c(0.0, 0.8))).unwrap();
        for x in [false, true] {
            for z in [false, true] {
                let f = CorrectionFrame::single(0, x, z);
                let mut t = s.clone();
                f.apply(&mut t).unwrap();
                f.undo(&mut t).unwrap();
                assert!((fidelity(&s, &t).unwrap() - 1.0).abs() < 1e-12);
                assert!(f.compose(&f).is_identity());
            }
        }
    }

    #[test]
    fn frame_conjugation_through_cz() {
        let mk = |x: bool| {
            let mut f = CorrectionFrame::single(0, x, false);
            f.chains.insert(1, PauliCorrection::default());
            f
        };
        let mut f = mk(true);
        f.conjugate_cz(0, 1);
        assert_eq!(f.get(1), PauliCorrection { x: false, z: true });
        assert_eq!(f.get(0), PauliCorrection { x: true, z: false });
        // check against the matrices: CZ X_A = X_A Z_B CZ
        let mut s = PureState::new(
            vec![DofId::pol(0, 1), DofId::pol(1, 1)],
            vec![c(0.5, 0.0), c(0.5, 0.0), c(0.1, 0.7), c(-0.5, 0.1)]
                .into_iter()
                .map(|a| a / (0.25 + 0.25 + 0.5 + 0.26f64).sqrt())
                .collect(),
        )
        .unwrap();
        let reference = {
            let mut r = s.clone();
            r.apply_cz(&DofId::pol(0, 1), &DofId::pol(1, 1)).unwrap();
            r
        };
        mk(true).apply(&mut s).unwrap();
        s.apply_cz(&DofId::pol(0, 1), &DofId::pol(1, 1)).unwrap();
        f.undo(&mut s).unwrap();
        assert!((fidelity(&s, &reference).unwrap() - 1.0).abs() < 1e-12);
    }
}
