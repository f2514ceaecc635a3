//! Heralded output states: PNR pattern probabilities, Fock coefficients of the
//! undetected bin, target states and figures of merit.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuit::UnitaryMatrix;
use crate::error::{Error, Result};
use crate::gaussian::{sigma_matrix, SqueezingVector};
use crate::hafnian::{moment_integral, precompute_tables, HafnianTables, KanTable, PhotonPattern};
use crate::C64;

/// Success probabilities at or below this are treated as "cannot herald".
pub const DEFAULT_P_FLOOR: f64 = 1e-12;

/// Smallest `1 − F` fed to the logarithm in [`cost`].
pub const INFIDELITY_CLAMP: f64 = 1e-16;

/// Default Fock cutoff `n_c`.
pub const DEFAULT_CUTOFF: usize = 40;

/// Detect `n_s` photons in each squeezed bin except the center `K`, which is
/// left undetected, and vacuum in every other bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionScheme {
    pub n_s: usize,
    pub n_squeezed: usize,
    pub center: usize,
}

impl DetectionScheme {
    pub fn new(n_s: usize, n_squeezed: usize, center: usize) -> Result<Self> {
        if n_squeezed == 0 || n_squeezed % 2 == 0 {
            return Err(Error::InvalidArguments(format!(
                "number of squeezed bins must be odd, got {n_squeezed}"
            )));
        }
        if center < n_squeezed / 2 {
            return Err(Error::InvalidArguments(format!(
                "{n_squeezed} squeezed bins do not fit around bin {center}"
            )));
        }
        Ok(Self {
            n_s,
            n_squeezed,
            center,
        })
    }

    /// First squeezed bin.
    pub fn first(&self) -> usize {
        self.center - self.n_squeezed / 2
    }

    /// Full-lattice pattern heralding `n_k` photons in the center.
    pub fn full_pattern(&self, n_modes: usize, n_k: usize) -> PhotonPattern {
        let mut counts = vec![0; n_modes];
        for c in counts.iter_mut().skip(self.first()).take(self.n_squeezed) {
            *c = self.n_s;
        }
        counts[self.center] = n_k;
        PhotonPattern::new(counts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub coefficients: Vec<C64>,
    pub label: String,
    pub alpha: Option<C64>,
    /// `ε_{n_c} = 1 − Σ|τₙ|²` over the exact (untruncated) state.
    pub truncation_error: f64,
}

impl TargetState {
    pub fn cutoff(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Fock coefficients of the even cat `(|α⟩ + |−α⟩)/√(2(1 + e^{−2|α|²}))`,
/// truncated at `n_c` without renormalization.
pub fn cat_target(alpha: C64, n_c: usize) -> TargetState {
    let mag2 = alpha.norm_sqr();
    let norm = 1.0 / (2.0 * (1.0 + (-2.0 * mag2).exp())).sqrt();
    // coherent amplitude e^{−|α|²/2} αⁿ/√n! built incrementally
    let mut coherent = C64::new((-mag2 / 2.0).exp(), 0.0);
    let mut coefficients = Vec::with_capacity(n_c + 1);
    let mut tail = 0.0;
    for n in 0.. {
        let tau = if n % 2 == 0 {
            coherent * 2.0 * norm
        } else {
            C64::new(0.0, 0.0)
        };
        if n <= n_c {
            coefficients.push(tau);
        } else {
            tail += tau.norm_sqr();
            let past_peak = n % 2 == 0 && n as f64 > mag2 + 10.0;
            if coherent.norm() == 0.0 || past_peak && tau.norm_sqr() <= tail * 1e-18 {
                break;
            }
        }
        coherent = coherent * alpha / ((n + 1) as f64).sqrt();
    }
    TargetState {
        coefficients,
        label: "even_cat".into(),
        alpha: Some(alpha),
        truncation_error: tail,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedState {
    /// `c_{n_K}` for `n_K = 0..=n_c`, unit norm.
    pub coefficients: Vec<C64>,
    pub probability: f64,
    pub fidelity: Option<f64>,
    pub cost: Option<f64>,
    pub scheme: DetectionScheme,
}

impl HeraldedState {
    pub fn cutoff(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Attach fidelity and cost against `target`.
    pub fn scored(mut self, target: &TargetState) -> Result<Self> {
        let f = fidelity(&self.coefficients, &target.coefficients)?;
        self.fidelity = Some(f);
        self.cost = Some(cost(self.probability, f));
        Ok(self)
    }

    /// Rotate the global phase so the largest coefficient is real positive.
    pub fn canonical_phase(mut self) -> Self {
        let largest = self
            .coefficients
            .iter()
            .copied()
            .fold(C64::new(0.0, 0.0), |best, c| {
                if c.norm() > best.norm() {
                    c
                } else {
                    best
                }
            });
        if largest.norm() > 0.0 {
            let rot = largest.conj() / largest.norm();
            for c in &mut self.coefficients {
                *c *= rot;
            }
        }
        self
    }
}

fn fock_weight(n: usize) -> f64 {
    // n!·2ⁿ
    (1..=n).fold(1.0, |acc, k| acc * 2.0 * k as f64)
}

fn cosh_product(r: &SqueezingVector) -> f64 {
    r.values().iter().map(|x| x.cosh()).product()
}

/// `P = |𝓘|² / ∏ᵢ nᵢ!·2^{nᵢ}·cosh rᵢ` for a pattern over all `N` modes.
pub fn pattern_probability(
    sigma: &DMatrix<C64>,
    r: &SqueezingVector,
    pattern: &PhotonPattern,
    table: &KanTable,
) -> Result<f64> {
    if r.len() != pattern.len() {
        return Err(Error::InvalidArguments(format!(
            "{} squeezing values for a {}-mode pattern",
            r.len(),
            pattern.len()
        )));
    }
    let moment = moment_integral(sigma, pattern, table)?;
    let weight: f64 = pattern.counts().iter().map(|&n| fock_weight(n)).product();
    Ok(moment.norm_sqr() / (weight * cosh_product(r)))
}

/// Fock coefficients of the undetected center bin, given the center
/// `N_s×N_s` block of `σ`.
pub fn heralded_coefficients(
    sigma_center: &DMatrix<C64>,
    r: &SqueezingVector,
    scheme: &DetectionScheme,
    tables: &HafnianTables,
    p_floor: f64,
) -> Result<HeraldedState> {
    let amplitudes = herald_amplitudes(sigma_center, r, scheme, tables)?;
    let probability: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if probability.is_nan() || probability <= p_floor {
        return Err(Error::HeraldImpossible {
            probability,
            floor: p_floor,
        });
    }
    let scale = 1.0 / probability.sqrt();
    Ok(HeraldedState {
        coefficients: amplitudes.into_iter().map(|a| a * scale).collect(),
        probability,
        fidelity: None,
        cost: None,
        scheme: *scheme,
    })
}

/// Full pipeline from the mode unitary to the heralded center-bin state.
pub fn herald_from_unitary(
    u: &UnitaryMatrix,
    r: &SqueezingVector,
    scheme: &DetectionScheme,
    tables: &HafnianTables,
    unitarity_tol: f64,
    p_floor: f64,
) -> Result<(HeraldedState, DMatrix<C64>)> {
    let sigma = sigma_matrix(u, r, unitarity_tol)?;
    let center = sigma.center_block(scheme.center, scheme.n_squeezed);
    let state = heralded_coefficients(&center, r, scheme, tables, p_floor)?;
    Ok((state, center))
}

/// Unnormalized amplitudes `a_{n_K} = 𝓘 / ∏√(nᵢ!·2^{nᵢ}·cosh rᵢ)`.
fn herald_amplitudes(
    sigma_center: &DMatrix<C64>,
    r: &SqueezingVector,
    scheme: &DetectionScheme,
    tables: &HafnianTables,
) -> Result<Vec<C64>> {
    if tables.n_s != scheme.n_s || tables.n_squeezed != scheme.n_squeezed {
        return Err(Error::InvalidArguments(format!(
            "tables for n_s={}, N_s={} used with n_s={}, N_s={}",
            tables.n_s, tables.n_squeezed, scheme.n_s, scheme.n_squeezed
        )));
    }
    if scheme.center + scheme.n_squeezed / 2 >= r.len() {
        return Err(Error::InvalidArguments(
            "squeezed bins exceed the lattice".into(),
        ));
    }
    let detected = fock_weight(scheme.n_s).powi(scheme.n_squeezed as i32 - 1);
    let base = 1.0 / (detected * cosh_product(r)).sqrt();
    tables
        .tables()
        .iter()
        .enumerate()
        .map(|(n_k, table)| {
            let pattern = tables.pattern(n_k);
            let moment = moment_integral(sigma_center, &pattern, table)?;
            Ok(moment * (base / fock_weight(n_k).sqrt()))
        })
        .collect()
}

/// `true` when raising the cutoff to `n_c_probe` changes `P` by less than 1e−9.
pub fn convergence_check(
    state: &HeraldedState,
    sigma_center: &DMatrix<C64>,
    r: &SqueezingVector,
    n_c_probe: usize,
) -> Result<bool> {
    let n_c = state.cutoff();
    if n_c_probe <= n_c {
        return Err(Error::InvalidArguments(format!(
            "probe cutoff {n_c_probe} must exceed {n_c}"
        )));
    }
    let probe = probability_at_cutoff(sigma_center, r, &state.scheme, n_c_probe)?;
    Ok((probe - state.probability).abs() < 1e-9)
}

/// Heralding probability summed over `n_K = 0..=n_c`.
pub fn probability_at_cutoff(
    sigma_center: &DMatrix<C64>,
    r: &SqueezingVector,
    scheme: &DetectionScheme,
    n_c: usize,
) -> Result<f64> {
    let tables = precompute_tables(scheme.n_s, scheme.n_squeezed, n_c)?;
    let amplitudes = herald_amplitudes(sigma_center, r, scheme, &tables)?;
    Ok(amplitudes.iter().map(|a| a.norm_sqr()).sum())
}

/// `F = |Σₙ τₙ* cₙ|²`.
pub fn fidelity(c: &[C64], target: &[C64]) -> Result<f64> {
    if c.len() != target.len() {
        return Err(Error::InvalidArguments(format!(
            "state has {} coefficients, target {}",
            c.len(),
            target.len()
        )));
    }
    let overlap: C64 = target.iter().zip(c).map(|(t, c)| t.conj() * c).sum();
    Ok(overlap.norm_sqr())
}

/// `𝒞 = P·log₁₀(1 − F)` with `1 − F` clamped at [`INFIDELITY_CLAMP`].
pub fn cost(probability: f64, fidelity: f64) -> f64 {
    let infidelity = (1.0 - fidelity).max(INFIDELITY_CLAMP);
    probability * infidelity.log10()
}

/// `⟨q|Φ⟩ = Σₙ cₙ ψₙ(q)` with `ħ = 1` Hermite functions.
pub fn quadrature_wavefunction(c: &[C64], q_grid: &[f64]) -> Vec<C64> {
    let front = PI.powf(-0.25);
    q_grid
        .iter()
        .map(|&q| {
            let mut prev = 0.0;
            let mut cur = front * (-q * q / 2.0).exp();
            let mut sum = C64::new(0.0, 0.0);
            for (n, &cn) in c.iter().enumerate() {
                sum += cn * cur;
                let next = (2.0 / (n + 1) as f64).sqrt() * q * cur
                    - (n as f64 / (n + 1) as f64).sqrt() * prev;
                prev = cur;
                cur = next;
            }
            sum
        })
        .collect()
}

/// Largest deviation of `arg cₙ` from the weighted mean phase, over
/// coefficients with `|cₙ| > 1e−6`.
pub fn phase_flatness(c: &[C64]) -> f64 {
    let significant: Vec<C64> = c.iter().copied().filter(|z| z.norm() > 1e-6).collect();
    if significant.is_empty() {
        return 0.0;
    }
    // |c|²-weighted circular mean of the phases
    let mut mean: C64 = significant.iter().map(|z| z * z.norm()).sum();
    if mean.norm() < 1e-12 {
        mean = significant
            .iter()
            .copied()
            .fold(C64::new(0.0, 0.0), |best, z| {
                if z.norm() > best.norm() {
                    z
                } else {
                    best
                }
            });
    }
    let reference = mean.conj() / mean.norm();
    significant
        .iter()
        .map(|z| (z * reference).arg().abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hafnian::KanTable;

    fn passthrough(r: f64, n_c: usize) -> HeraldedState {
        let sigma = DMatrix::from_element(1, 1, C64::new(2.0 * r.tanh(), 0.0));
        let sq = SqueezingVector::new(vec![r], 1.5).unwrap();
        let scheme = DetectionScheme::new(0, 1, 0).unwrap();
        let tables = precompute_tables(0, 1, n_c).unwrap();
        heralded_coefficients(&sigma, &sq, &scheme, &tables, DEFAULT_P_FLOOR).unwrap()
    }

    #[test]
    fn vacuum_pattern_has_unit_probability() {
        let sigma = DMatrix::<C64>::zeros(3, 3);
        let p = PhotonPattern::new(vec![0, 0, 0]);
        let t = KanTable::new(&[0, 0, 0]).unwrap();
        let prob = pattern_probability(&sigma, &SqueezingVector::vacuum(3), &p, &t).unwrap();
        assert_eq!(prob, 1.0);
    }

    #[test]
    fn two_photon_probability_of_squeezed_vacuum() {
        let r = 0.5_f64;
        let sigma = DMatrix::from_element(1, 1, C64::new(2.0 * r.tanh(), 0.0));
        let sq = SqueezingVector::new(vec![r], 1.5).unwrap();
        let p2 = PhotonPattern::new(vec![2]);
        let got = pattern_probability(&sigma, &sq, &p2, &KanTable::new(&[2]).unwrap()).unwrap();
        let expected = (2.0 * r.tanh()).powi(2) / (2.0 * 4.0 * r.cosh());
        assert!((got - expected).abs() < 1e-15);
        // tanh²r / (2 cosh r)
        assert!((got - 0.094_691_091_560_217_7).abs() < 1e-14);
        let p3 = PhotonPattern::new(vec![3]);
        let odd = pattern_probability(&sigma, &sq, &p3, &KanTable::new(&[3]).unwrap()).unwrap();
        assert_eq!(odd, 0.0);
    }

    #[test]
    fn single_mode_passthrough_matches_analytic_expansion() {
        let state = passthrough(0.5, 40);
        let ratio = state.coefficients[2].norm() / state.coefficients[0].norm();
        assert!((ratio - 0.5_f64.tanh() / 2f64.sqrt()).abs() < 1e-12);
        assert!((ratio - 0.326_77).abs() < 1e-5);
        assert!((state.norm_sq() - 1.0).abs() < 1e-12);
        assert!((state.probability - 1.0).abs() < 1e-9);
        for odd in state.coefficients.iter().skip(1).step_by(2) {
            assert_eq!(odd.norm(), 0.0);
        }
    }

    #[test]
    fn vacuum_cannot_fire_detectors() {
        let sigma = DMatrix::<C64>::zeros(3, 3);
        let scheme = DetectionScheme::new(1, 3, 1).unwrap();
        let tables = precompute_tables(1, 3, 6).unwrap();
        let err = heralded_coefficients(
            &sigma,
            &SqueezingVector::vacuum(3),
            &scheme,
            &tables,
            DEFAULT_P_FLOOR,
        );
        assert!(matches!(err, Err(Error::HeraldImpossible { .. })));
    }

    #[test]
    fn convergence_examples() {
        let weak = passthrough(0.3, 20);
        let sigma = DMatrix::from_element(1, 1, C64::new(2.0 * 0.3f64.tanh(), 0.0));
        let sq = SqueezingVector::new(vec![0.3], 1.5).unwrap();
        assert!(convergence_check(&weak, &sigma, &sq, 30).unwrap());

        let strong = passthrough(1.5, 4);
        let sigma = DMatrix::from_element(1, 1, C64::new(2.0 * 1.5f64.tanh(), 0.0));
        let sq = SqueezingVector::new(vec![1.5], 1.5).unwrap();
        assert!(!convergence_check(&strong, &sigma, &sq, 10).unwrap());
        assert!(convergence_check(&strong, &sigma, &sq, 4).is_err());

        let vac = passthrough(0.0, 2);
        let sigma = DMatrix::<C64>::zeros(1, 1);
        assert!(convergence_check(&vac, &sigma, &SqueezingVector::vacuum(1), 8).unwrap());
    }

    #[test]
    fn fidelity_examples() {
        let tau = cat_target(C64::new(1.2, 0.0), 30);
        let norm = tau.norm_sq().sqrt();
        let c: Vec<C64> = tau.coefficients.iter().map(|z| z / norm).collect();
        let target_unit = c.clone();
        assert!((fidelity(&c, &target_unit).unwrap() - 1.0).abs() < 1e-14);

        let mut orth = vec![C64::new(0.0, 0.0); 31];
        orth[1] = C64::new(1.0, 0.0);
        assert_eq!(fidelity(&orth, &target_unit).unwrap(), 0.0);

        let rotated: Vec<C64> = c.iter().map(|z| z * C64::from_polar(1.0, 0.9)).collect();
        assert_eq!(
            fidelity(&rotated, &target_unit).unwrap(),
            fidelity(&rotated, &target_unit).unwrap()
        );
        assert!((fidelity(&rotated, &target_unit).unwrap() - 1.0).abs() < 1e-14);
        assert!(fidelity(&c[..3], &target_unit).is_err());
    }

    #[test]
    fn cost_examples() {
        assert!((cost(0.1, 0.9) + 0.1).abs() < 1e-15);
        assert_eq!(cost(0.0, 0.5), 0.0);
        assert_eq!(cost(0.5, 1.0), 0.5 * -16.0);
        assert!(cost(0.3, 0.2) <= 0.0);
    }

    #[test]
    fn cat_truncation_errors() {
        let vac = cat_target(C64::new(0.0, 0.0), 5);
        assert_eq!(vac.coefficients[0], C64::new(1.0, 0.0));
        assert!(vac.coefficients[1..].iter().all(|z| z.norm() == 0.0));

        let e20 = cat_target(C64::new(3.0, 0.0), 20).truncation_error;
        let e30 = cat_target(C64::new(3.0, 0.0), 30).truncation_error;
        let e40 = cat_target(C64::new(3.0, 0.0), 40).truncation_error;
        assert!(e20 < 1e-3 && e20 > 1e-5, "{e20}");
        assert!(e30 < 1e-8 && e30 > 1e-10, "{e30}");
        assert!(e40 < 1e-14, "{e40}");

        let t = cat_target(C64::new(3.0, 0.0), 20);
        assert!((t.norm_sq() + t.truncation_error - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wavefunction_examples() {
        let vac = [C64::new(1.0, 0.0)];
        let psi = quadrature_wavefunction(&vac, &[0.0]);
        assert!((psi[0].re - PI.powf(-0.25)).abs() < 1e-15);
        assert!((psi[0].re - 0.751_13).abs() < 1e-5);
        let one = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        assert_eq!(quadrature_wavefunction(&one, &[0.0])[0].norm(), 0.0);

        let cat = cat_target(C64::new(1.5, 0.0), 30);
        let grid: Vec<f64> = (0..41).map(|k| -4.0 + 0.2 * k as f64).collect();
        let psi = quadrature_wavefunction(&cat.coefficients, &grid);
        for k in 0..41 {
            assert!((psi[k] - psi[40 - k]).norm() < 1e-10);
        }
        // normalization by trapezoid on a wide grid
        let fine: Vec<f64> = (0..=2000).map(|k| -10.0 + 0.01 * k as f64).collect();
        let dens: f64 = quadrature_wavefunction(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)], &fine)
            .iter()
            .map(|z| z.norm_sqr() * 0.01)
            .sum();
        assert!((dens - 1.0).abs() < 1e-9);
    }

    #[test]
    fn phase_flatness_examples() {
        let real = [0.7, 0.5, 0.3, 0.1];
        let c: Vec<C64> = real.iter().map(|&x| C64::from_polar(x, 1.1)).collect();
        assert!(phase_flatness(&c) < 1e-12);
        let mut flipped: Vec<C64> = real.iter().map(|&x| C64::new(x, 0.0)).collect();
        flipped[2] = -flipped[2];
        assert!((phase_flatness(&flipped) - PI).abs() < 1e-12);
        let scrambled: Vec<C64> = real
            .iter()
            .enumerate()
            .map(|(k, &x)| C64::from_polar(x, 1.7 * k as f64))
            .collect();
        let f = phase_flatness(&scrambled);
        assert!(f > 0.0 && f <= PI);
    }

    #[test]
    fn canonical_phase_keeps_fidelity() {
        let cat = cat_target(C64::new(1.0, 0.0), 10);
        let c: Vec<C64> = cat
            .coefficients
            .iter()
            .map(|z| z * C64::from_polar(1.0, -2.0))
            .collect();
        let state = HeraldedState {
            coefficients: c,
            probability: 0.1,
            fidelity: None,
            cost: None,
            scheme: DetectionScheme::new(1, 3, 1).unwrap(),
        };
        let canon = state.clone().canonical_phase();
        let top = canon
            .coefficients
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()));
        let largest = canon.coefficients.iter().find(|z| z.norm() == top).unwrap();
        assert!(largest.im.abs() < 1e-15 && largest.re > 0.0);
        let f0 = state.scored(&cat).unwrap().fidelity.unwrap();
        let f1 = canon.scored(&cat).unwrap().fidelity.unwrap();
        assert!((f0 - f1).abs() < 1e-14);
    }
}
