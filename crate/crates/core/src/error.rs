use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not unitary on the active modes (leakage {leakage:.3e} > {tolerance:.1e})")]
    NonUnitary { leakage: f64, tolerance: f64 },
    #[error("hafnian table too large: {rows} rows exceeds cap {cap}")]
    TableTooLarge { rows: usize, cap: usize },
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error("refusing brute-force enumeration of {total} photons (cap {cap})")]
    TooManyPhotons { total: usize, cap: usize },
    #[error("herald impossible: success probability {probability:.3e} is below {floor:.1e}")]
    HeraldImpossible { probability: f64, floor: f64 },
    #[error("oracle request too large: {0}")]
    OracleTooLarge(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
