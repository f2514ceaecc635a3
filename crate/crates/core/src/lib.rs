//! Design and simulation of frequency-bin circuits that herald non-Gaussian
//! states from squeezed vacuum with photon-number-resolved detection.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! - [`circuit`]: EOM and pulse-shaper layers composed into an `N×N` mode unitary.
//! - [`gaussian`]: closed-form covariance algebra from the unitary and the
//!   input squeezing down to the second-moment matrix `σ`.
//! - [`hafnian`]: Gaussian moments as loop hafnians, with precomputed tables
//!   and a perfect-matching reference.
//! - [`herald`]: detection probabilities, heralded Fock coefficients, targets,
//!   fidelity and cost.
//! - [`oracle`]: an independent truncated-Fock simulator for small lattices.
//! - [`optimizer`]: particle-swarm search over circuit and squeezing parameters.

pub mod circuit;
pub mod error;
pub mod gaussian;
pub mod hafnian;
pub mod herald;
pub mod optimizer;
pub mod oracle;

pub use num_complex::Complex64 as C64;

pub use circuit::{
    compose_unitary, EomSetting, FrequencyLattice, QfpCircuit, ShaperSetting, UnitaryMatrix,
};
pub use error::{Error, Result};
pub use gaussian::{SigmaMatrix, SqueezingVector};
pub use hafnian::{HafnianTables, KanTable, PhotonPattern};
pub use herald::{DetectionScheme, HeraldedState, TargetState};
pub use optimizer::{Design, DesignResult, DesignSpace, PsoConfig};
