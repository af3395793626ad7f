use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DofId, StateError};

/// Default bound on the number of degrees of freedom held at once.
pub const DEFAULT_DOF_CAP: usize = 20;

/// Branches below this probability are dropped from enumerations.
pub const PROB_EPS: f64 = 1e-14;

pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn pauli_x() -> Matrix2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_z() -> Matrix2 {
    [[ONE, ZERO], [ZERO, -ONE]]
}

pub fn hadamard() -> Matrix2 {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

pub fn is_unitary(u: &Matrix2, tol: f64) -> bool {
    for i in 0..2 {
        for j in 0..2 {
            let dot: Complex64 = (0..2).map(|k| u[k][i].conj() * u[k][j]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            if (dot - Complex64::new(expect, 0.0)).norm() > tol {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Z,
    /// Outcome 0 is `|+>`, outcome 1 is `|->`.
    X,
    /// Joint measurement of the record's DOF with the paired one. Outcome
    /// `2a + b`: `a` from the H-rotated first qubit, `b` from the second.
    Bell(DofId),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub dof: DofId,
    pub basis: Basis,
    pub outcome: u8,
    pub probability: f64,
}

/// Dense pure state. `labels[0]` is the most significant bit of the
/// amplitude index; labels are kept in canonical (sorted) order.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    labels: Vec<DofId>,
    amps: Vec<Complex64>,
}

impl PureState {
    /// Builds a state from labels in any order; reorders to canonical form.
    pub fn new(labels: Vec<DofId>, amps: Vec<Complex64>) -> Result<Self, StateError> {
        let expected = 1usize << labels.len();
        if amps.len() != expected {
            return Err(StateError::BadLength {
                got: amps.len(),
                expected,
            });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(StateError::DuplicateDof(*l));
            }
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(StateError::NotNormalized(norm));
        }
        let mut state = PureState { labels, amps };
        state.canonicalize();
        Ok(state)
    }

    /// `α|0> + β|1>` on a single DOF.
    pub fn qubit(label: DofId, alpha: Complex64, beta: Complex64) -> Result<Self, StateError> {
        PureState::new(vec![label], vec![alpha, beta])
    }

    /// The zero-qubit state with amplitude 1.
    pub fn empty() -> Self {
        PureState {
            labels: Vec::new(),
            amps: vec![ONE],
        }
    }

    pub fn labels(&self) -> &[DofId] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, dof: &DofId) -> bool {
        self.labels.binary_search(dof).is_ok()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn position(&self, dof: &DofId) -> Result<usize, StateError> {
        self.labels
            .binary_search(dof)
            .map_err(|_| StateError::UnknownDof(*dof))
    }

    fn bit(&self, pos: usize) -> usize {
        self.labels.len() - 1 - pos
    }

    /// Amplitude of the basis state given as one bit per label, in label order.
    pub fn amplitude(&self, bits: &[u8]) -> Complex64 {
        let idx = bits
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1));
        self.amps[idx]
    }

    fn canonicalize(&mut self) {
        let n = self.labels.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| self.labels[i]);
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return;
        }
        // new position j holds old position order[j]
        let mut amps = vec![ZERO; self.amps.len()];
        for (old_idx, &a) in self.amps.iter().enumerate() {
            let mut new_idx = 0usize;
            for (j, &old_pos) in order.iter().enumerate() {
                let bit = (old_idx >> (n - 1 - old_pos)) & 1;
                new_idx |= bit << (n - 1 - j);
            }
            amps[new_idx] = a;
        }
        self.labels = order.iter().map(|&i| self.labels[i]).collect();
        self.amps = amps;
    }

    /// Tensor product with a state on disjoint labels, bounded by `cap`.
    pub fn tensor_capped(&self, other: &PureState, cap: usize) -> Result<PureState, StateError> {
        if let Some(dup) = other.labels.iter().find(|l| self.contains(l)) {
            return Err(StateError::DuplicateDof(*dup));
        }
        let needed = self.labels.len() + other.labels.len();
        if needed > cap {
            return Err(StateError::CapExceeded { needed, cap });
        }
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut state = PureState { labels, amps };
        state.canonicalize();
        Ok(state)
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState, StateError> {
        self.tensor_capped(other, DEFAULT_DOF_CAP)
    }

    pub fn apply_single(&mut self, dof: &DofId, u: &Matrix2) -> Result<(), StateError> {
        let mask = 1usize << self.bit(self.position(dof)?);
        for idx in 0..self.amps.len() {
            if idx & mask == 0 {
                let (a0, a1) = (self.amps[idx], self.amps[idx | mask]);
                self.amps[idx] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[idx | mask] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
        Ok(())
    }

    /// Negates every amplitude with both `a` and `b` set.
    pub fn apply_cz(&mut self, a: &DofId, b: &DofId) -> Result<(), StateError> {
        if a == b {
            return Err(StateError::DuplicateDof(*a));
        }
        let ma = 1usize << self.bit(self.position(a)?);
        let mb = 1usize << self.bit(self.position(b)?);
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            if idx & ma != 0 && idx & mb != 0 {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: &DofId, target: &DofId) -> Result<(), StateError> {
        if control == target {
            return Err(StateError::DuplicateDof(*control));
        }
        let mc = 1usize << self.bit(self.position(control)?);
        let mt = 1usize << self.bit(self.position(target)?);
        for idx in 0..self.amps.len() {
            if idx & mc != 0 && idx & mt == 0 {
                self.amps.swap(idx, idx | mt);
            }
        }
        Ok(())
    }

    /// Projects `dof` onto `|outcome>` in the Z basis and removes it.
    /// Returns the outcome probability and the renormalized remainder (`None`
    /// when the probability is below [`PROB_EPS`]).
    pub fn project(
        &self,
        dof: &DofId,
        outcome: u8,
    ) -> Result<(f64, Option<PureState>), StateError> {
        let pos = self.position(dof)?;
        let shift = self.bit(pos);
        let low = (1usize << shift) - 1;
        let half = self.amps.len() / 2;
        let mut amps = Vec::with_capacity(half);
        for rest in 0..half {
            let idx = ((rest & !low) << 1) | (usize::from(outcome & 1) << shift) | (rest & low);
            amps.push(self.amps[idx]);
        }
        let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if prob < PROB_EPS {
            return Ok((prob, None));
        }
        let scale = 1.0 / prob.sqrt();
        amps.iter_mut().for_each(|a| *a *= scale);
        let mut labels = self.labels.clone();
        labels.remove(pos);
        Ok((prob, Some(PureState { labels, amps })))
    }

    /// Enumerates the outcomes of measuring `dof` in `basis` (Z or X). The
    /// measured DOF is removed from every branch.
    pub fn measure(
        &self,
        dof: &DofId,
        basis: Basis,
    ) -> Result<Vec<(MeasurementRecord, PureState)>, StateError> {
        let rotated;
        let source = match basis {
            Basis::Z => self,
            Basis::X => {
                let mut s = self.clone();
                s.apply_single(dof, &hadamard())?;
                rotated = s;
                &rotated
            }
            Basis::Bell(_) => {
                return Err(StateError::MalformedProgram(
                    "Bell measurements go through bell_teleport".into(),
                ))
            }
        };
        let mut out = Vec::with_capacity(2);
        for outcome in 0..2u8 {
            let (probability, state) = source.project(dof, outcome)?;
            if let Some(state) = state {
                out.push((
                    MeasurementRecord {
                        dof: *dof,
                        basis,
                        outcome,
                        probability,
                    },
                    state,
                ));
            }
        }
        Ok(out)
    }

    /// Renames DOFs (e.g. onto logical labels) and restores canonical order.
    pub fn relabel(&self, map: impl Fn(&DofId) -> DofId) -> Result<PureState, StateError> {
        let labels: Vec<DofId> = self.labels.iter().map(map).collect();
        PureState::new(labels, self.amps.clone())
    }

    /// Reduced density matrix on `dofs`, indexed with `dofs[0]` as the most
    /// significant bit.
    pub fn reduced_density(&self, dofs: &[DofId]) -> Result<Vec<Vec<Complex64>>, StateError> {
        let shifts: Vec<usize> = dofs
            .iter()
            .map(|d| self.position(d).map(|p| self.bit(p)))
            .collect::<Result<_, _>>()?;
        let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let dim = 1usize << dofs.len();
        let sub_index = |idx: usize| {
            shifts
                .iter()
                .fold(0usize, |acc, &s| (acc << 1) | ((idx >> s) & 1))
        };
        let mut rho = vec![vec![ZERO; dim]; dim];
        for i in 0..self.amps.len() {
            for j in 0..self.amps.len() {
                if i & !mask == j & !mask {
                    rho[sub_index(i)][sub_index(j)] += self.amps[i] * self.amps[j].conj();
                }
            }
        }
        Ok(rho)
    }

    /// Schmidt coefficients of the pair `(a, b)`, which must jointly be in a
    /// pure state (unentangled with everything else).
    pub fn schmidt_coefficients(&self, a: &DofId, b: &DofId) -> Result<[f64; 2], StateError> {
        let pair = self.reduced_density(&[*a, *b])?;
        let purity: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| (pair[i][j] * pair[j][i]).re)
            .sum();
        if (purity - 1.0).abs() > 1e-10 {
            return Err(StateError::MixedSubsystem(*a, *b));
        }
        let rho = self.reduced_density(&[*a])?;
        let (p, q, off) = (rho[0][0].re, rho[1][1].re, rho[0][1].norm());
        let mean = (p + q) / 2.0;
        let spread = (((p - q) / 2.0).powi(2) + off * off).sqrt();
        let hi = (mean + spread).max(0.0).sqrt();
        let lo = (mean - spread).max(0.0).sqrt();
        Ok([hi, lo])
    }

    /// Purity `Tr ρ²` of the single-DOF reduced state.
    pub fn single_purity(&self, dof: &DofId) -> Result<f64, StateError> {
        let rho = self.reduced_density(&[*dof])?;
        Ok((0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (rho[i][j] * rho[j][i]).re)
            .sum())
    }

    pub fn inner(&self, other: &PureState) -> Result<Complex64, StateError> {
        if self.labels != other.labels {
            return Err(StateError::LabelMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// `|<a|b>|²`, insensitive to global phase. Labels must match exactly.
pub fn fidelity(a: &PureState, b: &PureState) -> Result<f64, StateError> {
    Ok(a.inner(b)?.norm_sqr())
}
