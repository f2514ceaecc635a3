//! Particle-swarm search over circuit and squeezing parameters.
//!
//! A parameter vector is laid out as `(m, θ)` for each EOM, then the
//! passband phases of each shaper, then the `N_s` squeezing values placed
//! on the bins centered on the undetected bin.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    compose_unitary, EomSetting, FrequencyLattice, QfpCircuit, ShaperSetting, DEFAULT_M_MAX,
    DEFAULT_UNITARITY_TOL,
};
use crate::error::{Error, Result};
use crate::gaussian::{SqueezingVector, DEFAULT_R_MAX};
use crate::hafnian::{precompute_tables, HafnianTables};
use crate::herald::{
    herald_from_unitary, DetectionScheme, HeraldedState, TargetState, DEFAULT_P_FLOOR,
};
use crate::C64;

/// Cost assigned to designs that leak or cannot herald.
pub const SENTINEL_COST: f64 = 1.0;

/// Fidelity above which a design enters the second archive.
pub const FIDELITY_ARCHIVE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub unitarity: f64,
    pub p_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: DEFAULT_UNITARITY_TOL,
            p_floor: DEFAULT_P_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    /// total component count `Q`, odd
    pub components: usize,
    pub n_modes: usize,
    pub passband: usize,
    pub n_squeezed: usize,
    pub n_s: usize,
    pub n_c: usize,
    pub m_max: f64,
    pub r_max: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl DesignSpace {
    pub fn new(
        components: usize,
        n_modes: usize,
        passband: usize,
        n_squeezed: usize,
        n_s: usize,
        n_c: usize,
    ) -> Result<Self> {
        let space = Self {
            components,
            n_modes,
            passband,
            n_squeezed,
            n_s,
            n_c,
            m_max: DEFAULT_M_MAX,
            r_max: DEFAULT_R_MAX,
            tolerances: Tolerances::default(),
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components == 0 || self.components % 2 == 0 {
            return Err(Error::Config(format!(
                "component count Q must be odd, got {}",
                self.components
            )));
        }
        if self.n_squeezed < 3 || self.n_squeezed % 2 == 0 {
            return Err(Error::Config(format!(
                "number of squeezed bins must be odd and at least 3, got {}",
                self.n_squeezed
            )));
        }
        if self.n_squeezed > self.passband {
            return Err(Error::Config(format!(
                "{} squeezed bins do not fit in a {}-bin passband",
                self.n_squeezed, self.passband
            )));
        }
        if !(self.m_max > 0.0 && self.m_max.is_finite()) {
            return Err(Error::Config(format!(
                "m_max must be positive, got {}",
                self.m_max
            )));
        }
        if !(self.r_max >= 0.0 && self.r_max <= DEFAULT_R_MAX) {
            return Err(Error::Config(format!(
                "r_max must lie in [0, {DEFAULT_R_MAX}], got {}",
                self.r_max
            )));
        }
        let lattice = self.lattice()?;
        if !lattice
            .passband_range()
            .contains(&(self.center() - self.n_squeezed / 2))
            || !lattice
                .passband_range()
                .contains(&(self.center() + self.n_squeezed / 2))
        {
            return Err(Error::Config(
                "squeezed bins extend past the passband".into(),
            ));
        }
        Ok(())
    }

    /// Undetected bin `K`.
    pub fn center(&self) -> usize {
        self.n_modes / 2
    }

    pub fn lattice(&self) -> Result<FrequencyLattice> {
        FrequencyLattice::with_center(self.n_modes, self.passband, self.center(), self.n_squeezed)
    }

    pub fn scheme(&self) -> Result<DetectionScheme> {
        DetectionScheme::new(self.n_s, self.n_squeezed, self.center())
    }

    pub fn tables(&self) -> Result<HafnianTables> {
        precompute_tables(self.n_s, self.n_squeezed, self.n_c)
    }

    pub fn n_eoms(&self) -> usize {
        self.components.div_ceil(2)
    }

    pub fn n_shapers(&self) -> usize {
        self.components / 2
    }

    pub fn dimension(&self) -> usize {
        2 * self.n_eoms() + self.passband * self.n_shapers() + self.n_squeezed
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.dimension());
        for _ in 0..self.n_eoms() {
            out.push((0.0, self.m_max));
            out.push((0.0, TAU));
        }
        out.extend(std::iter::repeat_n(
            (0.0, TAU),
            self.passband * self.n_shapers(),
        ));
        out.extend(std::iter::repeat_n((0.0, self.r_max), self.n_squeezed));
        out
    }
}

/// A concrete circuit plus the squeezing on the `N_s` central bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub circuit: QfpCircuit,
    pub squeezing: Vec<f64>,
}

impl Design {
    pub fn squeezing_vector(&self, r_max: f64) -> Result<SqueezingVector> {
        let lattice = &self.circuit.lattice;
        SqueezingVector::centered(lattice.n_modes(), lattice.center(), &self.squeezing, r_max)
    }
}

pub fn encode_params(design: &Design, space: &DesignSpace) -> Result<Vec<f64>> {
    if design.circuit.eoms.len() != space.n_eoms()
        || design.circuit.shapers.len() != space.n_shapers()
        || design.squeezing.len() != space.n_squeezed
    {
        return Err(Error::InvalidArguments(
            "design does not match the design space".into(),
        ));
    }
    let mut out = Vec::with_capacity(space.dimension());
    for eom in &design.circuit.eoms {
        out.push(eom.modulation_index);
        out.push(eom.temporal_phase);
    }
    for shaper in &design.circuit.shapers {
        if shaper.phases.len() != space.passband {
            return Err(Error::InvalidArguments(
                "shaper width does not match the passband".into(),
            ));
        }
        out.extend_from_slice(&shaper.phases);
    }
    out.extend_from_slice(&design.squeezing);
    Ok(out)
}

/// Out-of-bounds entries are clamped; the flag reports whether any were.
pub fn decode_params(params: &[f64], space: &DesignSpace) -> Result<(Design, bool)> {
    if params.len() != space.dimension() {
        return Err(Error::InvalidArguments(format!(
            "parameter vector has length {}, expected {}",
            params.len(),
            space.dimension()
        )));
    }
    if params.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArguments(
            "parameter vector is not finite".into(),
        ));
    }
    let mut clamped = false;
    let values: Vec<f64> = params
        .iter()
        .zip(space.bounds())
        .map(|(&x, (lo, hi))| {
            let y = x.clamp(lo, hi);
            clamped |= y != x;
            y
        })
        .collect();

    let (eom_part, rest) = values.split_at(2 * space.n_eoms());
    let (shaper_part, squeezing) = rest.split_at(space.passband * space.n_shapers());
    let eoms = eom_part
        .chunks(2)
        .map(|p| EomSetting::bounded(p[0], p[1], space.m_max))
        .collect::<Result<Vec<_>>>()?;
    let shapers = shaper_part
        .chunks(space.passband)
        .map(|p| ShaperSetting::new(p.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let circuit = QfpCircuit::new(space.lattice()?, eoms, shapers)?;
    Ok((
        Design {
            circuit,
            squeezing: squeezing.to_vec(),
        },
        clamped,
    ))
}

/// Heralded state of a design plus the center block of `σ`.
pub fn herald_design(
    design: &Design,
    space: &DesignSpace,
    tables: &HafnianTables,
) -> Result<(HeraldedState, DMatrix<C64>)> {
    let u = compose_unitary(&design.circuit)?;
    u.ensure_unitary(space.tolerances.unitarity)?;
    let r = design.squeezing_vector(space.r_max)?;
    herald_from_unitary(
        &u,
        &r,
        &space.scheme()?,
        tables,
        space.tolerances.unitarity,
        space.tolerances.p_floor,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Valid(HeraldedState),
    Invalid(Error),
}

impl Evaluation {
    pub fn cost(&self) -> f64 {
        match self {
            Self::Valid(state) => state.cost.unwrap_or(SENTINEL_COST),
            Self::Invalid(_) => SENTINEL_COST,
        }
    }

    pub fn fidelity(&self) -> Option<f64> {
        match self {
            Self::Valid(state) => state.fidelity,
            Self::Invalid(_) => None,
        }
    }

    pub fn state(&self) -> Option<&HeraldedState> {
        match self {
            Self::Valid(state) => Some(state),
            Self::Invalid(_) => None,
        }
    }
}

pub fn evaluate_design(
    params: &[f64],
    space: &DesignSpace,
    target: &TargetState,
    tables: &HafnianTables,
) -> Evaluation {
    let scored = decode_params(params, space)
        .and_then(|(design, _)| herald_design(&design, space, tables))
        .and_then(|(state, _)| state.scored(target));
    match scored {
        Ok(state) => Evaluation::Valid(state),
        Err(e) => Evaluation::Invalid(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
    /// Positions for the first particles; the rest start uniformly at random.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_positions: Vec<Vec<f64>>,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_parallel() -> bool {
    true
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 60,
            iterations: 500,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            seed: 0,
            initial_positions: Vec::new(),
            parallel: true,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self, space: &DesignSpace) -> Result<()> {
        if self.swarm_size == 0 {
            return Err(Error::Config(
                "swarm must contain at least one particle".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iteration count must be positive".into()));
        }
        for (name, value) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        if self.initial_positions.len() > self.swarm_size {
            return Err(Error::Config(
                "more initial positions than particles".into(),
            ));
        }
        if let Some(bad) = self
            .initial_positions
            .iter()
            .find(|p| p.len() != space.dimension())
        {
            return Err(Error::Config(format!(
                "initial position has length {}, expected {}",
                bad.len(),
                space.dimension()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRecord {
    pub params: Vec<f64>,
    pub cost: f64,
    /// `None` when no valid design was found
    pub state: Option<HeraldedState>,
}

impl DesignRecord {
    fn from_evaluation(params: &[f64], evaluation: &Evaluation) -> Self {
        Self {
            params: params.to_vec(),
            cost: evaluation.cost(),
            state: evaluation.state().cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub best_by_cost: DesignRecord,
    /// lowest-cost visited design with `F > 0.9`
    pub best_by_fidelity: Option<DesignRecord>,
    /// global best cost after initialization and after each iteration
    pub trace: Vec<f64>,
    pub seed: u64,
    pub evaluations: usize,
}

struct Particle {
    rng: ChaCha8Rng,
    position: Vec<f64>,
    velocity: Vec<f64>,
    best_position: Vec<f64>,
    best_cost: f64,
}

fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn evaluate_swarm(
    particles: &[Particle],
    space: &DesignSpace,
    target: &TargetState,
    tables: &HafnianTables,
    parallel: bool,
) -> Vec<Evaluation> {
    let eval = |p: &Particle| evaluate_design(&p.position, space, target, tables);
    if parallel {
        particles.par_iter().map(eval).collect()
    } else {
        particles.iter().map(eval).collect()
    }
}

/// Move one coordinate and reflect it back into `[lo, hi]`.
fn reflect(x: f64, v: f64, lo: f64, hi: f64) -> (f64, f64) {
    let y = x + v;
    if y > hi {
        ((2.0 * hi - y).max(lo), -v)
    } else if y < lo {
        ((2.0 * lo - y).min(hi), -v)
    } else {
        (y, v)
    }
}

/// Global-best particle swarm minimizing the cost.
pub fn pso_run(
    space: &DesignSpace,
    target: &TargetState,
    tables: &HafnianTables,
    config: &PsoConfig,
) -> Result<DesignResult> {
    space.validate()?;
    config.validate(space)?;
    if target.cutoff() != space.n_c || tables.n_c != space.n_c {
        return Err(Error::Config(format!(
            "target cutoff {} and table cutoff {} must both equal n_c = {}",
            target.cutoff(),
            tables.n_c,
            space.n_c
        )));
    }
    let bounds = space.bounds();
    let mut particles: Vec<Particle> = (0..config.swarm_size)
        .map(|i| {
            let mut rng = particle_rng(config.seed, i);
            let random: Vec<f64> = bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect();
            let position = config.initial_positions.get(i).cloned().unwrap_or(random);
            let position: Vec<f64> = position
                .iter()
                .zip(&bounds)
                .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
                .collect();
            let velocity = bounds
                .iter()
                .map(|&(lo, hi)| 0.5 * (hi - lo) * rng.random_range(-1.0..1.0))
                .collect();
            Particle {
                rng,
                best_position: position.clone(),
                position,
                velocity,
                best_cost: f64::INFINITY,
            }
        })
        .collect();

    let mut best_by_cost: Option<DesignRecord> = None;
    let mut best_by_fidelity: Option<DesignRecord> = None;
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let mut evaluations = 0;

    for iteration in 0..=config.iterations {
        if iteration > 0 {
            let global = best_by_cost
                .as_ref()
                .map(|b| b.params.clone())
                .unwrap_or_default();
            for p in particles.iter_mut() {
                for d in 0..bounds.len() {
                    let (lo, hi) = bounds[d];
                    let span = hi - lo;
                    let r1: f64 = p.rng.random();
                    let r2: f64 = p.rng.random();
                    let v = config.inertia * p.velocity[d]
                        + config.cognitive * r1 * (p.best_position[d] - p.position[d])
                        + config.social * r2 * (global[d] - p.position[d]);
                    let (x, v) = reflect(p.position[d], v.clamp(-span, span), lo, hi);
                    p.position[d] = x;
                    p.velocity[d] = v;
                }
            }
        }

        let results = evaluate_swarm(&particles, space, target, tables, config.parallel);
        evaluations += results.len();
        for (p, evaluation) in particles.iter_mut().zip(&results) {
            let cost = evaluation.cost();
            if cost < p.best_cost {
                p.best_cost = cost;
                p.best_position.clone_from(&p.position);
            }
            if best_by_cost.as_ref().is_none_or(|b| cost < b.cost) {
                best_by_cost = Some(DesignRecord::from_evaluation(&p.position, evaluation));
            }
            if evaluation.fidelity().is_some_and(|f| f > FIDELITY_ARCHIVE)
                && best_by_fidelity.as_ref().is_none_or(|b| cost < b.cost)
            {
                best_by_fidelity = Some(DesignRecord::from_evaluation(&p.position, evaluation));
            }
        }
        trace.push(best_by_cost.as_ref().map_or(SENTINEL_COST, |b| b.cost));
    }

    Ok(DesignResult {
        best_by_cost: best_by_cost.expect("swarm is non-empty"),
        best_by_fidelity,
        trace,
        seed: config.seed,
        evaluations,
    })
}
