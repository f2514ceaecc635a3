//! Brute-force reference simulator in the truncated Fock basis.
//!
//! The mode unitary is factored into nearest-neighbour two-mode rotations and
//! output phases, and each factor is applied to a dense amplitude tensor
//! through exact binomial expansions. Passive factors never mix total photon
//! number sectors, so every sector whose total stays at or below the cutoff
//! is propagated exactly.

use nalgebra::DMatrix;

use crate::circuit::leakage_check;
use crate::error::{Error, Result};
use crate::C64;

pub const MAX_ORACLE_MODES: usize = 4;
pub const MAX_ORACLE_CUTOFF: usize = 10;

/// Dense amplitudes `⟨n₁…n_N|ψ⟩` with every `nᵢ ≤ cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockTensor {
    n_modes: usize,
    cutoff: usize,
    amps: Vec<C64>,
    /// norm lost to the per-mode cutoff when the state was built
    pub tail_mass: f64,
}

impl FockTensor {
    fn check_size(n_modes: usize, cutoff: usize) -> Result<()> {
        if n_modes == 0 || n_modes > MAX_ORACLE_MODES || cutoff > MAX_ORACLE_CUTOFF {
            return Err(Error::OracleTooLarge(format!(
                "{n_modes} modes at cutoff {cutoff} (limits {MAX_ORACLE_MODES} modes, cutoff {MAX_ORACLE_CUTOFF})"
            )));
        }
        Ok(())
    }

    pub fn vacuum(n_modes: usize, cutoff: usize) -> Result<Self> {
        Self::check_size(n_modes, cutoff)?;
        let mut amps = vec![C64::new(0.0, 0.0); (cutoff + 1).pow(n_modes as u32)];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self {
            n_modes,
            cutoff,
            amps,
            tail_mass: 0.0,
        })
    }

    /// Product state from single-mode amplitude vectors of equal length.
    pub fn product(modes: &[Vec<C64>]) -> Result<Self> {
        let cutoff = modes.first().map_or(0, |m| m.len().saturating_sub(1));
        Self::check_size(modes.len(), cutoff)?;
        if modes.iter().any(|m| m.len() != cutoff + 1) {
            return Err(Error::InvalidArguments(
                "single-mode vectors differ in length".into(),
            ));
        }
        let dim = cutoff + 1;
        let amps: Vec<C64> = (0..dim.pow(modes.len() as u32))
            .map(|flat| {
                let mut rest = flat;
                let mut amp = C64::new(1.0, 0.0);
                for mode in modes.iter().rev() {
                    amp *= mode[rest % dim];
                    rest /= dim;
                }
                amp
            })
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        Ok(Self {
            n_modes: modes.len(),
            cutoff,
            amps,
            tail_mass: (1.0 - norm).max(0.0),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn index(&self, counts: &[usize]) -> usize {
        counts.iter().fold(0, |acc, &n| acc * (self.cutoff + 1) + n)
    }

    fn counts(&self, mut flat: usize) -> Vec<usize> {
        let dim = self.cutoff + 1;
        let mut out = vec![0; self.n_modes];
        for slot in out.iter_mut().rev() {
            *slot = flat % dim;
            flat /= dim;
        }
        out
    }

    pub fn amplitude(&self, counts: &[usize]) -> C64 {
        if counts.len() != self.n_modes || counts.iter().any(|&n| n > self.cutoff) {
            return C64::new(0.0, 0.0);
        }
        self.amps[self.index(counts)]
    }

    /// Probability of each total photon number `0..=N·cutoff`.
    pub fn photon_number_distribution(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_modes * self.cutoff + 1];
        for (flat, a) in self.amps.iter().enumerate() {
            out[self.counts(flat).iter().sum::<usize>()] += a.norm_sqr();
        }
        out
    }
}

/// Squeezed vacuum with the `q` quadrature anti-squeezed:
/// `a_{2k} = tanhᵏr·√((2k)!)/(2ᵏ k!·√cosh r)`, odd entries zero.
pub fn squeezed_vacuum_fock(r: f64, cutoff: usize) -> Vec<C64> {
    let t = r.tanh();
    let mut out = vec![C64::new(0.0, 0.0); cutoff + 1];
    let mut amp = 1.0 / r.cosh().sqrt();
    for k in 0..=cutoff / 2 {
        out[2 * k] = C64::new(amp, 0.0);
        // a_{2k+2}/a_{2k} = t·√((2k+1)(2k+2))/(2(k+1))
        amp *= t * (((2 * k + 1) * (2 * k + 2)) as f64).sqrt() / (2 * (k + 1)) as f64;
    }
    out
}

/// `[[e^{iφ}cos θ, −sin θ], [e^{iφ}sin θ, cos θ]]` on modes `(upper, upper + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeRotation {
    pub upper: usize,
    pub theta: f64,
    pub phi: f64,
}

impl TwoModeRotation {
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let e = C64::from_polar(1.0, self.phi);
        let (s, c) = self.theta.sin_cos();
        [[e * c, C64::new(-s, 0.0)], [e * s, C64::new(c, 0.0)]]
    }

    fn embed(&self, n: usize) -> DMatrix<C64> {
        let mut out = DMatrix::identity(n, n);
        let m = self.matrix();
        let (i, j) = (self.upper, self.upper + 1);
        out[(i, i)] = m[0][0];
        out[(i, j)] = m[0][1];
        out[(j, i)] = m[1][0];
        out[(j, j)] = m[1][1];
        out
    }
}

/// `U = diag(phases) · R_k ⋯ R_1`; `rotations[0]` acts first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReckDecomposition {
    pub n_modes: usize,
    pub rotations: Vec<TwoModeRotation>,
    pub phases: Vec<C64>,
}

impl ReckDecomposition {
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let mut u = DMatrix::<C64>::identity(self.n_modes, self.n_modes);
        for rot in &self.rotations {
            u = rot.embed(self.n_modes) * u;
        }
        for (mut row, phase) in u.row_iter_mut().zip(&self.phases) {
            row *= *phase;
        }
        u
    }
}

/// Factor a unitary into nearest-neighbour rotations by nulling the strictly
/// lower triangle row by row from the bottom, multiplying rotations in from
/// the right.
pub fn reck_decompose(u: &DMatrix<C64>, tolerance: f64) -> Result<ReckDecomposition> {
    if u.nrows() != u.ncols() || u.nrows() == 0 {
        return Err(Error::InvalidDimension(
            "decomposition needs a square matrix".into(),
        ));
    }
    let leakage = leakage_check(u);
    if leakage.is_nan() || leakage > tolerance {
        return Err(Error::NonUnitary { leakage, tolerance });
    }
    let n = u.nrows();
    let mut work = u.clone();
    let mut rotations = Vec::new();
    for row in (1..n).rev() {
        for col in 0..row {
            let (x, y) = (work[(row, col)], work[(row, col + 1)]);
            if x.norm() < 1e-15 {
                continue;
            }
            let rot = TwoModeRotation {
                upper: col,
                theta: x.norm().atan2(y.norm()),
                phi: if y.norm() < 1e-15 {
                    x.arg()
                } else {
                    x.arg() - y.arg()
                },
            };
            let m = rot.matrix();
            // work ← work · R†
            for r in 0..n {
                let (a, b) = (work[(r, col)], work[(r, col + 1)]);
                work[(r, col)] = a * m[0][0].conj() + b * m[0][1].conj();
                work[(r, col + 1)] = a * m[1][0].conj() + b * m[1][1].conj();
            }
            work[(row, col)] = C64::new(0.0, 0.0);
            rotations.push(rot);
        }
    }
    Ok(ReckDecomposition {
        n_modes: n,
        rotations,
        phases: (0..n).map(|i| work[(i, i)]).collect(),
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn sqrt_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).sqrt()).product()
}

fn apply_rotation(state: &FockTensor, rot: &TwoModeRotation) -> FockTensor {
    let [[v00, v01], [v10, v11]] = rot.matrix();
    let (m1, m2) = (rot.upper, rot.upper + 1);
    let mut out = vec![C64::new(0.0, 0.0); state.amps.len()];
    for (flat, &amp) in state.amps.iter().enumerate() {
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let mut counts = state.counts(flat);
        let (n1, n2) = (counts[m1], counts[m2]);
        let norm = amp / (sqrt_factorial(n1) * sqrt_factorial(n2));
        // a₁†^{n₁} a₂†^{n₂} → (v00 a₁† + v10 a₂†)^{n₁} (v01 a₁† + v11 a₂†)^{n₂}
        for k in 0..=n1 {
            let first = binomial(n1, k) * v00.powu(k as u32) * v10.powu((n1 - k) as u32);
            for l in 0..=n2 {
                let (o1, o2) = (k + l, n1 + n2 - k - l);
                if o1 > state.cutoff || o2 > state.cutoff {
                    continue;
                }
                let second = binomial(n2, l) * v01.powu(l as u32) * v11.powu((n2 - l) as u32);
                counts[m1] = o1;
                counts[m2] = o2;
                out[state.index(&counts)] +=
                    norm * first * second * (sqrt_factorial(o1) * sqrt_factorial(o2));
            }
        }
    }
    FockTensor {
        amps: out,
        ..state.clone()
    }
}

/// Propagate `state` through the factored circuit.
pub fn apply_circuit_fock(state: &FockTensor, circuit: &ReckDecomposition) -> Result<FockTensor> {
    if circuit.n_modes != state.n_modes {
        return Err(Error::InvalidArguments(format!(
            "{}-mode circuit applied to a {}-mode state",
            circuit.n_modes, state.n_modes
        )));
    }
    let mut current = state.clone();
    for rot in &circuit.rotations {
        current = apply_rotation(&current, rot);
    }
    for flat in 0..current.amps.len() {
        let counts = current.counts(flat);
        let phase: C64 = counts
            .iter()
            .zip(&circuit.phases)
            .map(|(&n, p)| p.powu(n as u32))
            .product();
        current.amps[flat] *= phase;
    }
    Ok(current)
}

/// Project every mode except `undetected` onto `pattern`, returning the
/// normalized coefficients for `n = 0..=n_c` and the success probability.
pub fn herald_fock(
    state: &FockTensor,
    pattern: &[usize],
    undetected: usize,
    n_c: usize,
    p_floor: f64,
) -> Result<(Vec<C64>, f64)> {
    if pattern.len() != state.n_modes || undetected >= state.n_modes {
        return Err(Error::InvalidArguments(
            "pattern does not match the state".into(),
        ));
    }
    let detected: usize = pattern
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != undetected)
        .map(|(_, &n)| n)
        .sum();
    if n_c + detected > state.cutoff {
        return Err(Error::InvalidArguments(format!(
            "cutoff {} cannot resolve n_c {n_c} with {detected} detected photons",
            state.cutoff
        )));
    }
    let mut counts = pattern.to_vec();
    let slice: Vec<C64> = (0..=n_c)
        .map(|n| {
            counts[undetected] = n;
            state.amplitude(&counts)
        })
        .collect();
    let probability: f64 = slice.iter().map(|a| a.norm_sqr()).sum();
    if probability.is_nan() || probability <= p_floor {
        return Err(Error::HeraldImpossible {
            probability,
            floor: p_floor,
        });
    }
    let scale = 1.0 / probability.sqrt();
    Ok((slice.into_iter().map(|a| a * scale).collect(), probability))
}

/// Squeezed inputs through `u`, then heralding; the end-to-end reference path.
pub fn oracle_herald(
    u: &DMatrix<C64>,
    r: &[f64],
    pattern: &[usize],
    undetected: usize,
    cutoff: usize,
    n_c: usize,
    p_floor: f64,
) -> Result<(Vec<C64>, f64)> {
    let inputs: Vec<Vec<C64>> = r.iter().map(|&x| squeezed_vacuum_fock(x, cutoff)).collect();
    let state = FockTensor::product(&inputs)?;
    let circuit = reck_decompose(u, 1e-10)?;
    let out = apply_circuit_fock(&state, &circuit)?;
    herald_fock(&out, pattern, undetected, n_c, p_floor)
}
