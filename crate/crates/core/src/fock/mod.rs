//! Sparse Fock-space model of the KLM teleportation and `CZ_(n)` gate.
//!
//! Modes are numbered from 0. A dual-rail qubit is one photon across two
//! modes: photon in the first mode is `|0>`, in the second `|1>`.

mod gate;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::analytics::GateOrder;

pub use gate::{
    cz_via_cs, dual_rail, f_teleport, f_teleport_in_place, ideal_cz, logical_amplitudes,
    logical_fidelity, make_cs_state, make_teleport_ancilla, make_tn_state, teleport_phase,
    CzBranch, TeleportBranch, CZ_ORDER_CAP,
};

/// Terms whose squared magnitude falls below this are dropped.
pub const AMP_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FockError {
    #[error("order {0} is outside the supported range")]
    OrderOutOfRange(u32),
    #[error("index {i} is outside 0..={n}")]
    IndexOutOfRange { i: u32, n: u32 },
    #[error("mode {mode} is outside a {modes}-mode state")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("mode {0} is listed twice")]
    DuplicateMode(usize),
    #[error("matrix is not unitary")]
    NotUnitary,
    #[error("matrix is {got}x{got}, expected {expected}x{expected}")]
    BadMatrix { got: usize, expected: usize },
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("occupation vector has {got} modes, expected {expected}")]
    ModeCountMismatch { got: usize, expected: usize },
    #[error("state is not a dual-rail encoding on the given rails")]
    NotDualRail,
    #[error("malformed ancilla: {0}")]
    MalformedAncilla(String),
    #[error("input mode {0} overlaps the ancilla")]
    InputOverlap(usize),
    #[error("logical modes are entangled with the remaining modes")]
    Entangled,
}

/// Sparse superposition of occupation vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    modes: usize,
    terms: BTreeMap<Vec<u8>, Complex64>,
}

impl FockState {
    /// Vacuum on `modes` modes.
    pub fn vacuum(modes: usize) -> Self {
        FockState::basis(vec![0; modes])
    }

    pub fn basis(occupation: Vec<u8>) -> Self {
        let modes = occupation.len();
        FockState {
            modes,
            terms: BTreeMap::from([(occupation, Complex64::new(1.0, 0.0))]),
        }
    }

    /// Builds a state from terms, summing repeated occupations. Fails unless
    /// the result is normalized within 1e-12.
    pub fn from_terms(
        modes: usize,
        terms: impl IntoIterator<Item = (Vec<u8>, Complex64)>,
    ) -> Result<Self, FockError> {
        let state = FockState::unnormalized(modes, terms)?;
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(FockError::NotNormalized(norm));
        }
        Ok(state)
    }

    fn unnormalized(
        modes: usize,
        terms: impl IntoIterator<Item = (Vec<u8>, Complex64)>,
    ) -> Result<Self, FockError> {
        let mut map: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
        for (occ, amp) in terms {
            if occ.len() != modes {
                return Err(FockError::ModeCountMismatch {
                    got: occ.len(),
                    expected: modes,
                });
            }
            *map.entry(occ).or_default() += amp;
        }
        map.retain(|_, a| a.norm_sqr() > AMP_EPS * AMP_EPS);
        Ok(FockState { modes, terms: map })
    }

    pub fn mode_count(&self) -> usize {
        self.modes
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u8>, Complex64> {
        &self.terms
    }

    pub fn amplitude(&self, occupation: &[u8]) -> Complex64 {
        self.terms.get(occupation).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn scaled(mut self, factor: f64) -> Self {
        self.terms.values_mut().for_each(|a| *a *= factor);
        self
    }

    /// Photon numbers present in the superposition (one entry per distinct
    /// total).
    pub fn photon_numbers(&self) -> Vec<u32> {
        let mut n: Vec<u32> = self
            .terms
            .keys()
            .map(|o| o.iter().map(|&x| u32::from(x)).sum())
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// This state's modes followed by `other`'s.
    pub fn tensor(&self, other: &FockState) -> FockState {
        let mut terms = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                let mut occ = a.clone();
                occ.extend_from_slice(b);
                terms.insert(occ, x * y);
            }
        }
        FockState {
            modes: self.modes + other.modes,
            terms,
        }
    }

    /// `⟨a|b⟩`; mode counts must agree.
    pub fn inner(&self, other: &FockState) -> Result<Complex64, FockError> {
        if self.modes != other.modes {
            return Err(FockError::ModeCountMismatch {
                got: other.modes,
                expected: self.modes,
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(o, a)| a.conj() * other.amplitude(o))
            .sum())
    }
}

/// Passive linear-optics transformation on an ordered subset of modes:
/// `a†_{targets[j]} → Σ_l matrix[l][j] a†_{targets[l]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    targets: Vec<usize>,
    matrix: Vec<Vec<Complex64>>,
}

impl ModeUnitary {
    pub fn new(targets: Vec<usize>, matrix: Vec<Vec<Complex64>>) -> Result<Self, FockError> {
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) {
                return Err(FockError::DuplicateMode(*t));
            }
        }
        let d = targets.len();
        if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
            return Err(FockError::BadMatrix {
                got: matrix.len(),
                expected: d,
            });
        }
        for i in 0..d {
            for j in 0..d {
                let dot: Complex64 = (0..d).map(|k| matrix[k][i].conj() * matrix[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).norm() > 1e-10 {
                    return Err(FockError::NotUnitary);
                }
            }
        }
        Ok(ModeUnitary { targets, matrix })
    }

    /// `F_d` with entries `ω^{jl}/√d`, `ω = e^{2πi/d}`.
    pub fn fourier(targets: Vec<usize>) -> Result<Self, FockError> {
        let d = targets.len();
        ModeUnitary::new(targets, fourier_matrix(d))
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }
}

pub fn fourier_matrix(d: usize) -> Vec<Vec<Complex64>> {
    let scale = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|j| {
            (0..d)
                .map(|l| Complex64::from_polar(scale, TAU * ((j * l) % d) as f64 / d as f64))
                .collect()
        })
        .collect()
}

fn factorial(k: u8) -> f64 {
    (1..=u32::from(k)).map(f64::from).product()
}

pub fn apply_mode_unitary(state: &FockState, u: &ModeUnitary) -> Result<FockState, FockError> {
    if let Some(&mode) = u.targets.iter().find(|&&t| t >= state.modes) {
        return Err(FockError::ModeOutOfRange {
            mode,
            modes: state.modes,
        });
    }
    let d = u.targets.len();
    let mut out: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
    for (occ, amp) in &state.terms {
        // distribute each creation operator over the target modes
        let mut partial: BTreeMap<Vec<u8>, Complex64> = BTreeMap::from([(vec![0u8; d], *amp)]);
        let mut norm_in = 1.0;
        for (j, &mode) in u.targets.iter().enumerate() {
            norm_in *= factorial(occ[mode]);
            for _ in 0..occ[mode] {
                let mut next = BTreeMap::new();
                for (o, c) in &partial {
                    for l in 0..d {
                        let w = u.matrix[l][j];
                        if w.norm_sqr() == 0.0 {
                            continue;
                        }
                        let mut o2 = o.clone();
                        o2[l] += 1;
                        *next.entry(o2).or_insert(Complex64::default()) += c * w;
                    }
                }
                partial = next;
            }
        }
        for (o, c) in partial {
            let norm_out: f64 = o.iter().map(|&k| factorial(k)).product();
            let mut full = occ.clone();
            for (l, &mode) in u.targets.iter().enumerate() {
                full[mode] = o[l];
            }
            *out.entry(full).or_default() += c * (norm_out / norm_in).sqrt();
        }
    }
    FockState::unnormalized(state.modes, out)
}

fn order(n: GateOrder) -> usize {
    n.get() as usize
}
