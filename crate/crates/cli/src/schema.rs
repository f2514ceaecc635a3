//! On-disk JSON formats. Every file carries `schema_version`; files written
//! by a newer major version are refused.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use qfp_herald::herald::cat_target;
use qfp_herald::optimizer::{DesignRecord, Tolerances};
use qfp_herald::{Design, DesignSpace, HeraldedState, PsoConfig, TargetState, C64};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "1.0";
pub const SCHEMA_MAJOR: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        // adding 0.0 turns −0.0 into 0.0
        Self {
            re: z.re + 0.0,
            im: z.im + 0.0,
        }
    }
}

impl From<Complex> for C64 {
    fn from(z: Complex) -> Self {
        C64::new(z.re, z.im)
    }
}

pub fn to_complex(c: &[C64]) -> Vec<Complex> {
    c.iter().copied().map(Complex::from).collect()
}

pub fn from_complex(c: &[Complex]) -> Vec<C64> {
    c.iter().copied().map(C64::from).collect()
}

pub fn check_version(version: &str) -> CliResult<()> {
    let major = version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u64>().ok())
        .ok_or_else(|| CliError::Config(format!("malformed schema_version {version:?}")))?;
    if major > SCHEMA_MAJOR {
        return Err(CliError::Config(format!(
            "schema_version {version} is newer than supported {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    EvenCat { alpha: f64 },
}

impl TargetSpec {
    pub fn build(&self, n_c: usize) -> CliResult<TargetState> {
        match *self {
            Self::EvenCat { alpha } => {
                if !alpha.is_finite() {
                    return Err(CliError::Config("cat amplitude must be finite".into()));
                }
                Ok(cat_target(C64::new(alpha, 0.0), n_c))
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            Self::EvenCat { alpha } => alpha,
        }
    }
}

fn default_n_s() -> usize {
    1
}

fn default_m_max() -> f64 {
    qfp_herald::circuit::DEFAULT_M_MAX
}

fn default_r_max() -> f64 {
    qfp_herald::gaussian::DEFAULT_R_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub components: usize,
    pub n_modes: usize,
    pub passband: usize,
    pub n_squeezed: usize,
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    pub n_c: usize,
    #[serde(default = "default_m_max")]
    pub m_max: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl SpaceConfig {
    pub fn build(&self, n_c: Option<usize>) -> CliResult<DesignSpace> {
        let space = DesignSpace {
            components: self.components,
            n_modes: self.n_modes,
            passband: self.passband,
            n_squeezed: self.n_squeezed,
            n_s: self.n_s,
            n_c: n_c.unwrap_or(self.n_c),
            m_max: self.m_max,
            r_max: self.r_max,
            tolerances: self.tolerances,
        };
        space.validate()?;
        Ok(space)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoSection {
    #[serde(default)]
    pub swarm_size: Option<usize>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub inertia: Option<f64>,
    #[serde(default)]
    pub cognitive: Option<f64>,
    #[serde(default)]
    pub social: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub initial_positions: Vec<Vec<f64>>,
}

impl PsoSection {
    pub fn build(&self, seed: u64) -> PsoConfig {
        let d = PsoConfig::default();
        PsoConfig {
            swarm_size: self.swarm_size.unwrap_or(d.swarm_size),
            iterations: self.iterations.unwrap_or(d.iterations),
            inertia: self.inertia.unwrap_or(d.inertia),
            cognitive: self.cognitive.unwrap_or(d.cognitive),
            social: self.social.unwrap_or(d.social),
            seed,
            initial_positions: self.initial_positions.clone(),
            parallel: true,
        }
    }
}

/// Input to `design`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: String,
    pub space: SpaceConfig,
    #[serde(default)]
    pub pso: Option<PsoSection>,
    pub target: TargetSpec,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    #[serde(flatten)]
    pub spec: TargetSpec,
    pub truncation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub n_s: usize,
    pub n_squeezed: usize,
    pub n_c: usize,
    /// `κ` for `n_K = 0..=n_c`
    pub kappa: Vec<usize>,
    pub total_rows: usize,
    pub bytes: usize,
}

/// Serialized heralded state; the global phase is canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub probability: f64,
    pub fidelity: Option<f64>,
    pub cost: Option<f64>,
    pub coefficients: Vec<Complex>,
}

impl From<&HeraldedState> for StateRecord {
    fn from(state: &HeraldedState) -> Self {
        let state = state.clone().canonical_phase();
        Self {
            probability: state.probability,
            fidelity: state.fidelity,
            cost: state.cost,
            coefficients: to_complex(&state.coefficients),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEntry {
    pub params: Vec<f64>,
    pub cost: f64,
    pub design: Design,
    /// absent when no valid design was found
    pub state: Option<StateRecord>,
}

impl DesignEntry {
    pub fn new(record: &DesignRecord, design: Design) -> Self {
        Self {
            params: record.params.clone(),
            cost: record.cost,
            design,
            state: record.state.as_ref().map(StateRecord::from),
        }
    }
}

/// Output of `design`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub schema_version: String,
    pub kind: String,
    pub version: String,
    pub seed: u64,
    pub space: DesignSpace,
    pub target: TargetRecord,
    pub pso: PsoConfig,
    pub tables: TableStats,
    pub best_by_cost: DesignEntry,
    pub best_by_fidelity: Option<DesignEntry>,
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Hand-written single design, accepted by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignInput {
    pub schema_version: String,
    pub kind: String,
    pub space: SpaceConfig,
    pub target: TargetSpec,
    #[serde(default)]
    pub design: Option<Design>,
    #[serde(default)]
    pub params: Option<Vec<f64>>,
}

/// Output of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub schema_version: String,
    pub kind: String,
    pub version: String,
    pub seed: u64,
    pub space: DesignSpace,
    pub target: TargetRecord,
    pub design: Design,
    pub params: Vec<f64>,
    pub probability: f64,
    pub fidelity: f64,
    pub cost: f64,
    pub coefficients: Vec<Complex>,
    pub converged: bool,
    pub probe_n_c: usize,
    pub probe_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub schema_version: String,
    pub kind: String,
    pub seed: u64,
    pub trials: usize,
    pub n_modes: usize,
    pub cutoff: usize,
    pub n_c: usize,
    pub max_delta_population: f64,
    pub max_delta_probability: f64,
    pub max_delta_amplitude: f64,
    /// trials where exactly one path reported "cannot herald"
    pub disagreements: usize,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleRecord {
    pub source: String,
    pub selection: String,
    pub alpha: Option<f64>,
    pub components: Option<usize>,
    pub n_squeezed: Option<usize>,
    pub n_modes: Option<usize>,
    pub n_c: Option<usize>,
    pub fidelity: Option<f64>,
    pub probability: f64,
    pub cost: Option<f64>,
    pub coefficients: Vec<Complex>,
    pub wavefunction_csv: Option<String>,
    pub fock_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub schema_version: String,
    pub kind: String,
    pub records: Vec<BundleRecord>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, &e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::json(path, &e))?;
    match value.get("schema_version").and_then(|v| v.as_str()) {
        Some(v) => check_version(v)?,
        None => {
            return Err(CliError::Config(format!(
                "{}: missing schema_version",
                path.display()
            )))
        }
    }
    // re-parse from text so diagnostics carry line and column
    serde_json::from_str(&text).map_err(|e| CliError::json(path, &e))
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Invariant(format!("serialization failed: {e}")))
}

pub fn tables_stats(tables: &qfp_herald::HafnianTables) -> TableStats {
    let kappa: Vec<usize> = tables.tables().iter().map(|t| t.kappa()).collect();
    let bytes = tables
        .tables()
        .iter()
        .map(|t| t.kappa() * (t.width() + 1) * std::mem::size_of::<f64>())
        .sum();
    TableStats {
        n_s: tables.n_s,
        n_squeezed: tables.n_squeezed,
        n_c: tables.n_c,
        total_rows: tables.total_rows(),
        kappa,
        bytes,
    }
}

pub fn target_record(spec: &TargetSpec, target: &TargetState) -> TargetRecord {
    TargetRecord {
        spec: *spec,
        truncation_error: target.truncation_error,
    }
}

pub const KIND_DESIGN_RESULT: &str = "design_result";
pub const KIND_DESIGN: &str = "design";
pub const KIND_EVALUATION: &str = "evaluation";
pub const KIND_ORACLE_REPORT: &str = "oracle_report";
pub const KIND_BUNDLE: &str = "bundle";
pub const KIND_STATE: &str = "state";

/// Minimal state file: coefficients and an optional target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub schema_version: String,
    pub kind: String,
    pub coefficients: Vec<Complex>,
    #[serde(default)]
    pub target: Option<TargetSpec>,
}
