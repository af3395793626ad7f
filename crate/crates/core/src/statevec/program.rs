use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{
    arm_needs_link_correction, bell_teleport, carrier, fail_weave, link_state, weave_in_place,
    CorrectionFrame,
};
use super::state::{fidelity, is_unitary, pauli_z, Matrix2, PureState, DEFAULT_DOF_CAP};
use super::{DofId, PhotonId, StateError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Complex numbers travel as `[re, im]` pairs.
type JsonComplex = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalQubit {
    pub name: String,
    /// Amplitudes of `|0>` and `|1>`.
    pub input: [JsonComplex; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Gate {
    Unitary {
        qubit: String,
        matrix: [[JsonComplex; 2]; 2],
    },
    Cphase {
        a: String,
        b: String,
        /// Weave attempts lost before the successful one; each entry names
        /// the side whose arm was measured out.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        failed_attempts: Vec<Side>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub qubits: Vec<LogicalQubit>,
    #[serde(default)]
    pub gates: Vec<Gate>,
}

fn to_c(v: JsonComplex) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn to_matrix(m: &[[JsonComplex; 2]; 2]) -> Matrix2 {
    [
        [to_c(m[0][0]), to_c(m[0][1])],
        [to_c(m[1][0]), to_c(m[1][1])],
    ]
}

fn from_matrix(m: &Matrix2) -> [[JsonComplex; 2]; 2] {
    m.map(|row| row.map(|z| [z.re, z.im]))
}

/// Gates resolved to qubit indices.
enum Resolved {
    Unitary(u32, Matrix2),
    Cphase(u32, u32, Vec<Side>),
}

impl Program {
    fn index(&self, name: &str) -> Result<u32, StateError> {
        self.qubits
            .iter()
            .position(|q| q.name == name)
            .map(|i| i as u32)
            .ok_or_else(|| StateError::MalformedProgram(format!("unknown qubit {name:?}")))
    }

    fn resolve(&self) -> Result<Vec<Resolved>, StateError> {
        for (i, q) in self.qubits.iter().enumerate() {
            if self.qubits[..i].iter().any(|p| p.name == q.name) {
                return Err(StateError::MalformedProgram(format!(
                    "duplicate qubit {:?}",
                    q.name
                )));
            }
        }
        self.gates
            .iter()
            .map(|g| match g {
                Gate::Unitary { qubit, matrix } => {
                    let m = to_matrix(matrix);
                    if !is_unitary(&m, 1e-10) {
                        return Err(StateError::NotUnitary);
                    }
                    Ok(Resolved::Unitary(self.index(qubit)?, m))
                }
                Gate::Cphase {
                    a,
                    b,
                    failed_attempts,
                } => {
                    let (ia, ib) = (self.index(a)?, self.index(b)?);
                    if ia == ib {
                        return Err(StateError::MalformedProgram(format!(
                            "cphase needs two distinct qubits, got {a:?} twice"
                        )));
                    }
                    Ok(Resolved::Cphase(ia, ib, failed_attempts.clone()))
                }
            })
            .collect()
    }

    fn input_state(&self, label: impl Fn(u32) -> DofId) -> Result<PureState, StateError> {
        let mut state = PureState::empty();
        for (i, q) in self.qubits.iter().enumerate() {
            let qubit = PureState::qubit(label(i as u32), to_c(q.input[0]), to_c(q.input[1]))?;
            state = state.tensor_capped(&qubit, usize::MAX)?;
        }
        Ok(state)
    }

    /// Links each qubit's chain must provide.
    pub fn links_needed(&self) -> Result<Vec<usize>, StateError> {
        let mut need = vec![0usize; self.qubits.len()];
        for g in self.resolve()? {
            match g {
                Resolved::Unitary(q, _) => need[q as usize] += 1,
                Resolved::Cphase(a, b, failed) => {
                    need[a as usize] += 1;
                    need[b as usize] += 1;
                    for s in failed {
                        need[match s {
                            Side::A => a,
                            Side::B => b,
                        } as usize] += 1;
                    }
                }
            }
        }
        Ok(need)
    }
}

/// The program applied directly to the logical inputs, on labels
/// [`DofId::logical`].
pub fn ideal_circuit(program: &Program) -> Result<PureState, StateError> {
    let gates = program.resolve()?;
    if program.qubits.is_empty() {
        return Err(StateError::MalformedProgram("no qubits".into()));
    }
    let mut state = program.input_state(DofId::logical)?;
    for g in gates {
        match g {
            Resolved::Unitary(q, m) => state.apply_single(&DofId::logical(q), &m)?,
            Resolved::Cphase(a, b, _) => state.apply_cz(&DofId::logical(a), &DofId::logical(b))?,
        }
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum BranchPolicy {
    EnumerateAll,
    /// Follows `samples` measurement records drawn with their Born
    /// probabilities.
    SampleSeeded {
        seed: u64,
        samples: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvolveOptions {
    pub policy: BranchPolicy,
    /// Merge branches whose states agree up to global phase. Later outcomes
    /// depend only on the state, so this keeps enumeration exact.
    pub merge_equivalent: bool,
    pub keep_branches: bool,
    pub dof_cap: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            policy: BranchPolicy::EnumerateAll,
            merge_equivalent: true,
            keep_branches: false,
            dof_cap: DEFAULT_DOF_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    /// Measurement histories ending in this state.
    pub paths: u64,
    pub probability: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub schema_version: u32,
    pub qubits: usize,
    pub links_per_qubit: usize,
    pub min_fidelity: f64,
    /// Measurement histories covered (samples drawn when sampling).
    pub branch_count: u64,
    pub distinct_states: usize,
    /// `None` when sampling.
    pub probability_sum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<BranchRecord>>,
}

/// One step of the physical schedule. Every measurement inside a step is
/// followed by its feed-forward correction.
#[derive(Clone, Debug)]
enum Op {
    Rotate {
        chain: u32,
        pos: u32,
        m: Matrix2,
    },
    /// Add link `pos`, measure its arm out in Z, teleport through it.
    Advance {
        chain: u32,
        pos: u32,
    },
    /// Add link `pos` on both chains, weave the arms, teleport both.
    Cphase {
        a: (u32, u32),
        b: (u32, u32),
    },
}

fn add_link(state: &PureState, chain: u32, pos: u32, cap: usize) -> Result<PureState, StateError> {
    state.tensor_capped(&link_state(chain, pos), cap)
}

fn teleport_all(
    branches: Vec<(f64, PureState, CorrectionFrame)>,
    chain: u32,
    pos: u32,
) -> Result<Vec<(f64, PureState, CorrectionFrame)>, StateError> {
    let mut out = Vec::with_capacity(branches.len() * 4);
    for (p, s, f) in branches {
        for t in bell_teleport(&s, PhotonId::linked(chain, pos))? {
            out.push((p * t.record.probability, t.state, f.compose(&t.frame)));
        }
    }
    Ok(out)
}

fn apply_op(op: &Op, state: &PureState, cap: usize) -> Result<Vec<(f64, PureState)>, StateError> {
    match op {
        Op::Rotate { chain, pos, m } => {
            let mut s = state.clone();
            s.apply_single(&DofId::pol(*chain, *pos), m)?;
            Ok(vec![(1.0, s)])
        }
        Op::Advance { chain, pos } => {
            let (c, j) = (*chain, *pos);
            let linked = add_link(state, c, j, cap)?;
            let mut detached = Vec::with_capacity(2);
            for (rec, mut s) in fail_weave(&linked, &DofId::arm(c, j + 1))? {
                if arm_needs_link_correction(rec.outcome) {
                    s.apply_single(&DofId::pol(c, j + 1), &pauli_z())?;
                }
                detached.push((rec.probability, s, CorrectionFrame::default()));
            }
            teleport_all(detached, c, j)?
                .into_iter()
                .map(|(p, mut s, f)| {
                    f.undo(&mut s)?;
                    Ok((p, s))
                })
                .collect()
        }
        Op::Cphase { a, b } => {
            let linked = add_link(&add_link(state, a.0, a.1, cap)?, b.0, b.1, cap)?;
            let woven: Vec<_> = weave_in_place(
                &linked,
                &DofId::arm(a.0, a.1 + 1),
                &DofId::arm(b.0, b.1 + 1),
            )?
            .into_iter()
            .map(|w| (w.probability, w.state, CorrectionFrame::default()))
            .collect();
            let moved = teleport_all(teleport_all(woven, a.0, a.1)?, b.0, b.1)?;
            moved
                .into_iter()
                .map(|(p, mut s, mut f)| {
                    // the byproducts were produced before the CZ took effect
                    f.conjugate_cz(a.0, b.0);
                    f.undo(&mut s)?;
                    Ok((p, s))
                })
                .collect()
        }
    }
}

fn schedule(program: &Program, links: usize) -> Result<(Vec<Op>, Vec<u32>), StateError> {
    let need = program.links_needed()?;
    if let Some((q, &n)) = need.iter().enumerate().find(|(_, &n)| n > links) {
        return Err(StateError::ChainTooShort {
            qubit: program.qubits[q].name.clone(),
            needed: n,
            links,
        });
    }
    let mut pos = vec![1u32; program.qubits.len()];
    let mut ops = Vec::new();
    let advance = |ops: &mut Vec<Op>, pos: &mut Vec<u32>, c: u32| {
        ops.push(Op::Advance {
            chain: c,
            pos: pos[c as usize],
        });
        pos[c as usize] += 1;
    };
    for g in program.resolve()? {
        match g {
            Resolved::Unitary(c, m) => {
                ops.push(Op::Rotate {
                    chain: c,
                    pos: pos[c as usize],
                    m,
                });
                advance(&mut ops, &mut pos, c);
            }
            Resolved::Cphase(a, b, failed) => {
                for s in failed {
                    advance(&mut ops, &mut pos, if s == Side::A { a } else { b });
                }
                ops.push(Op::Cphase {
                    a: (a, pos[a as usize]),
                    b: (b, pos[b as usize]),
                });
                pos[a as usize] += 1;
                pos[b as usize] += 1;
            }
        }
    }
    for c in 0..program.qubits.len() as u32 {
        while (pos[c as usize] as usize) <= links {
            advance(&mut ops, &mut pos, c);
        }
    }
    Ok((ops, pos))
}

#[derive(Clone, Debug)]
struct Branch {
    state: PureState,
    probability: f64,
    paths: u64,
}

fn expand(
    op: &Op,
    branches: Vec<Branch>,
    cap: usize,
    merge: bool,
) -> Result<Vec<Branch>, StateError> {
    let children: Vec<Vec<(f64, PureState)>> = branches
        .par_iter()
        .map(|b| apply_op(op, &b.state, cap))
        .collect::<Result<_, _>>()?;
    let mut out: Vec<Branch> = Vec::new();
    for (parent, kids) in branches.iter().zip(children) {
        for (p, state) in kids {
            let child = Branch {
                state,
                probability: parent.probability * p,
                paths: parent.paths,
            };
            if merge {
                let same = out
                    .iter_mut()
                    .find(|b| fidelity(&b.state, &child.state).is_ok_and(|f| f > 1.0 - 1e-12));
                if let Some(b) = same {
                    b.probability += child.probability;
                    b.paths = b.paths.saturating_add(child.paths);
                    continue;
                }
            }
            out.push(child);
        }
    }
    Ok(out)
}

fn readout(state: &PureState, final_pos: &[u32]) -> Result<PureState, StateError> {
    for (c, &p) in final_pos.iter().enumerate() {
        let expected = DofId::pol(c as u32, p);
        if carrier(state, c as u32)? != expected {
            return Err(StateError::MissingDof(expected));
        }
    }
    if state.len() != final_pos.len() {
        return Err(StateError::LabelMismatch);
    }
    state.relabel(|d| DofId::logical(d.photon.chain))
}

/// Runs the program on freshly built chains of `links_per_qubit` links
/// and compares every branch's output to [`ideal_circuit`].
pub fn evolve_program(
    program: &Program,
    links_per_qubit: usize,
    options: &EvolveOptions,
) -> Result<EvolutionReport, StateError> {
    let ideal = ideal_circuit(program)?;
    let (ops, final_pos) = schedule(program, links_per_qubit)?;
    let initial = program.input_state(|q| DofId::pol(q, 1))?;
    if initial.len() > options.dof_cap {
        return Err(StateError::CapExceeded {
            needed: initial.len(),
            cap: options.dof_cap,
        });
    }
    let mut records = Vec::new();
    let (branch_count, probability_sum) = match options.policy {
        BranchPolicy::EnumerateAll => {
            let mut branches = vec![Branch {
                state: initial,
                probability: 1.0,
                paths: 1,
            }];
            for op in &ops {
                branches = expand(op, branches, options.dof_cap, options.merge_equivalent)?;
            }
            let mut count = 0u64;
            let mut total = 0.0;
            for b in &branches {
                let out = readout(&b.state, &final_pos)?;
                records.push(BranchRecord {
                    paths: b.paths,
                    probability: b.probability,
                    fidelity: fidelity(&out, &ideal)?,
                });
                count = count.saturating_add(b.paths);
                total += b.probability;
            }
            (count, Some(total))
        }
        BranchPolicy::SampleSeeded { seed, samples } => {
            let sampled: Vec<BranchRecord> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i);
                    let mut state = initial.clone();
                    let mut probability = 1.0;
                    for op in &ops {
                        let kids = apply_op(op, &state, options.dof_cap)?;
                        let mut r: f64 = rng.random::<f64>();
                        let mut pick = kids.len() - 1;
                        for (k, (p, _)) in kids.iter().enumerate() {
                            if r < *p {
                                pick = k;
                                break;
                            }
                            r -= p;
                        }
                        let (p, s) = kids.into_iter().nth(pick).expect("at least one branch");
                        probability *= p;
                        state = s;
                    }
                    let out = readout(&state, &final_pos)?;
                    Ok(BranchRecord {
                        paths: 1,
                        probability,
                        fidelity: fidelity(&out, &ideal)?,
                    })
                })
                .collect::<Result<_, StateError>>()?;
            records = sampled;
            (samples, None)
        }
    };
    let min_fidelity = records
        .iter()
        .map(|r| r.fidelity)
        .fold(f64::INFINITY, f64::min);
    Ok(EvolutionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        qubits: program.qubits.len(),
        links_per_qubit,
        min_fidelity,
        branch_count,
        distinct_states: records.len(),
        probability_sum,
        branches: options.keep_branches.then_some(records),
    })
}

fn random_unitary<R: Rng>(rng: &mut R) -> Matrix2 {
    use std::f64::consts::PI;
    let [alpha, beta, gamma, delta]: [f64; 4] =
        std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    let e = |t: f64| Complex64::from_polar(1.0, t);
    let (c, s) = ((gamma / 2.0).cos(), (gamma / 2.0).sin());
    // e^{iα} Rz(β) Ry(γ) Rz(δ)
    [
        [
            e(alpha - beta / 2.0 - delta / 2.0) * c,
            -e(alpha - beta / 2.0 + delta / 2.0) * s,
        ],
        [
            e(alpha + beta / 2.0 - delta / 2.0) * s,
            e(alpha + beta / 2.0 + delta / 2.0) * c,
        ],
    ]
}

/// A seeded program with `cphases` CPHASE gates (none for a single qubit),
/// random inputs and as many random rotations and failed weave attempts as
/// fit in chains of `links` links.
pub fn random_program(seed: u64, qubits: usize, cphases: usize, links: usize) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..qubits).map(|i| format!("q{i}")).collect();
    let qubit_list = names
        .iter()
        .map(|name| {
            let u = random_unitary(&mut rng);
            LogicalQubit {
                name: name.clone(),
                input: [[u[0][0].re, u[0][0].im], [u[1][0].re, u[1][0].im]],
            }
        })
        .collect();
    let mut pairs = Vec::new();
    let mut reserved = vec![0usize; qubits];
    if qubits >= 2 {
        for _ in 0..cphases {
            let a = rng.random_range(0..qubits);
            let b = (a + rng.random_range(1..qubits)) % qubits;
            if reserved[a] < links && reserved[b] < links {
                reserved[a] += 1;
                reserved[b] += 1;
                pairs.push((a, b));
            }
        }
    }
    let mut used = vec![0usize; qubits];
    let spare = |q: usize, used: &[usize], reserved: &[usize]| links - used[q] - reserved[q];
    let mut gates = Vec::new();
    let rotate =
        |rng: &mut ChaCha8Rng, used: &mut Vec<usize>, reserved: &[usize], gates: &mut Vec<Gate>| {
            let q = rng.random_range(0..qubits);
            if spare(q, used, reserved) > 0 && rng.random_bool(0.7) {
                used[q] += 1;
                gates.push(Gate::Unitary {
                    qubit: names[q].clone(),
                    matrix: from_matrix(&random_unitary(rng)),
                });
            }
        };
    for (a, b) in pairs {
        rotate(&mut rng, &mut used, &reserved, &mut gates);
        reserved[a] -= 1;
        reserved[b] -= 1;
        let mut failed = Vec::new();
        for (side, q) in [(Side::A, a), (Side::B, b)] {
            if spare(q, &used, &reserved) > 1 && rng.random_bool(0.3) {
                used[q] += 1;
                failed.push(side);
            }
        }
        used[a] += 1;
        used[b] += 1;
        gates.push(Gate::Cphase {
            a: names[a].clone(),
            b: names[b].clone(),
            failed_attempts: failed,
        });
    }
    for _ in 0..qubits {
        rotate(&mut rng, &mut used, &reserved, &mut gates);
    }
    Program {
        qubits: qubit_list,
        gates,
    }
}

/// Per-qubit link usage keyed by name, for diagnostics.
pub fn link_usage(program: &Program) -> Result<BTreeMap<String, usize>, StateError> {
    let need = program.links_needed()?;
    Ok(program
        .qubits
        .iter()
        .zip(need)
        .map(|(q, n)| (q.name.clone(), n))
        .collect())
}
