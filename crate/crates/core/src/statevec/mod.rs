//! Exact qubit-level model of free-arm chains.
//!
//! Each photon carries a path qubit and, for linked photons, a polarization
//! qubit (`|↕> = |0>`, `|↔> = |1>`). Free-arm photons only carry a path
//! qubit. States are dense vectors over a canonically ordered label set and
//! every measurement is enumerated branch by branch.

mod chain;
mod program;
mod state;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use chain::{
    arm_needs_link_correction, bell_teleport, build_chain_state, build_chain_state_on, fail_weave,
    link_state, weave, weave_in_place, weave_target_state, CorrectionFrame, PauliCorrection,
    TeleportBranch, WeaveBranch, WEAVE_CORRECTIONS,
};
pub use program::{
    evolve_program, ideal_circuit, link_usage, random_program, BranchPolicy, BranchRecord,
    EvolutionReport, EvolveOptions, Gate, LogicalQubit, Program, Side, REPORT_SCHEMA_VERSION,
};
pub use state::{
    fidelity, hadamard, is_unitary, pauli_x, pauli_z, Basis, Matrix2, MeasurementRecord, PureState,
    DEFAULT_DOF_CAP, PROB_EPS,
};

/// One photon in a chain. Positions start at 1; `arm` marks the free-arm
/// photon attached to linked photon `pos`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhotonId {
    pub chain: u32,
    pub pos: u32,
    pub arm: bool,
}

impl PhotonId {
    pub fn linked(chain: u32, pos: u32) -> Self {
        PhotonId {
            chain,
            pos,
            arm: false,
        }
    }

    pub fn free_arm(chain: u32, pos: u32) -> Self {
        PhotonId {
            chain,
            pos,
            arm: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DofKind {
    Path,
    Polarization,
}

/// A two-level degree of freedom of one photon. The derived ordering
/// (chain, position, arm flag, kind) is the canonical amplitude layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DofId {
    pub photon: PhotonId,
    pub kind: DofKind,
}

impl DofId {
    pub fn path(chain: u32, pos: u32) -> Self {
        DofId {
            photon: PhotonId::linked(chain, pos),
            kind: DofKind::Path,
        }
    }

    pub fn pol(chain: u32, pos: u32) -> Self {
        DofId {
            photon: PhotonId::linked(chain, pos),
            kind: DofKind::Polarization,
        }
    }

    /// Path qubit of the free arm hanging off linked photon `pos`.
    pub fn arm(chain: u32, pos: u32) -> Self {
        DofId {
            photon: PhotonId::free_arm(chain, pos),
            kind: DofKind::Path,
        }
    }

    /// Label used for logical qubit `q` in oracle states.
    pub fn logical(q: u32) -> Self {
        DofId::pol(q, 0)
    }

    pub fn is_free_arm(&self) -> bool {
        self.photon.arm && self.kind == DofKind::Path
    }
}

impl fmt::Display for DofId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DofKind::Path => "path",
            DofKind::Polarization => "pol",
        };
        let prime = if self.photon.arm { "'" } else { "" };
        write!(
            f,
            "{}[{}]{prime}.{kind}",
            self.photon.chain, self.photon.pos
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StateError {
    #[error("unknown degree of freedom {0}")]
    UnknownDof(DofId),
    #[error("degree of freedom {0} appears twice")]
    DuplicateDof(DofId),
    #[error("state would need {needed} degrees of freedom, cap is {cap}")]
    CapExceeded { needed: usize, cap: usize },
    #[error("amplitudes are not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("amplitude vector has length {got}, expected {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("{0} is not a free-arm path")]
    ArmNotFree(DofId),
    #[error("free arm {0} is not entangled with any link")]
    Disconnected(DofId),
    #[error("photon {0:?} does not carry the data of its chain")]
    NotDataCarrier(PhotonId),
    #[error("missing degree of freedom {0}")]
    MissingDof(DofId),
    #[error("link into {0} still has its free arm attached")]
    ArmAttached(DofId),
    #[error("label sets differ")]
    LabelMismatch,
    #[error("degrees of freedom {0} and {1} are not in a joint pure state")]
    MixedSubsystem(DofId, DofId),
    #[error("matrix is not unitary")]
    NotUnitary,
    #[error("qubit {qubit} needs {needed} links but chains have {links}")]
    ChainTooShort {
        qubit: String,
        needed: usize,
        links: usize,
    },
    #[error("malformed program: {0}")]
    MalformedProgram(String),
}
