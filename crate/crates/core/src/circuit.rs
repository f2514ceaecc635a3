//! Frequency-bin unitaries built from alternating electro-optic phase
//! modulators (EOMs) and line-by-line pulse shapers.
//!
//! Each device applies a diagonal phase: EOMs in the time domain and pulse
//! shapers in the frequency domain. On an `N`-bin lattice the EOM therefore
//! acts as `F·D·F†`, a circulant matrix, while the shaper is diagonal and
//! doubles as a hard bandpass filter that blocks bins outside the central
//! passband window.

use std::f64::consts::TAU;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Default bound on the EOM modulation index, in radians.
pub const DEFAULT_M_MAX: f64 = 5.0;

/// Default unitarity tolerance on the active input modes.
pub const DEFAULT_UNITARITY_TOL: f64 = 1e-6;

/// Geometry of the simulated frequency-bin lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyLattice {
    n_modes: usize,
    passband: usize,
    center: usize,
    active_width: usize,
}

impl FrequencyLattice {
    /// Lattice with the undetected bin at `n_modes / 2` and a single active
    /// input bin.
    pub fn new(n_modes: usize, passband: usize) -> Result<Self> {
        Self::with_center(n_modes, passband, n_modes / 2, 1)
    }

    /// `active_width` is the odd number of input bins, centered on `center`,
    /// that carry light. Leakage is measured on those input columns only.
    pub fn with_center(
        n_modes: usize,
        passband: usize,
        center: usize,
        active_width: usize,
    ) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidLattice("n_modes must be positive".into()));
        }
        if passband == 0 || passband > n_modes {
            return Err(Error::InvalidLattice(format!(
                "passband {passband} must lie in 1..={n_modes}"
            )));
        }
        let lattice = Self {
            n_modes,
            passband,
            center,
            active_width,
        };
        if !lattice.passband_range().contains(&center) {
            return Err(Error::InvalidLattice(format!(
                "center bin {center} lies outside the passband window {:?}",
                lattice.passband_range()
            )));
        }
        if active_width == 0 || active_width % 2 == 0 {
            return Err(Error::InvalidLattice(format!(
                "active width {active_width} must be odd"
            )));
        }
        let half = active_width / 2;
        if center < half || center + half >= n_modes {
            return Err(Error::InvalidLattice(format!(
                "{active_width} active bins around {center} do not fit in {n_modes} modes"
            )));
        }
        Ok(lattice)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn passband(&self) -> usize {
        self.passband
    }

    /// Index `K` of the undetected output bin.
    pub fn center(&self) -> usize {
        self.center
    }

    pub fn active_width(&self) -> usize {
        self.active_width
    }

    /// Bins transmitted by every pulse shaper.
    pub fn passband_range(&self) -> Range<usize> {
        let start = (self.n_modes - self.passband) / 2;
        start..start + self.passband
    }

    /// Input bins that carry light.
    pub fn active_range(&self) -> Range<usize> {
        let half = self.active_width / 2;
        self.center - half..self.center + half + 1
    }
}

/// Single-sinewave EOM drive `φ(t_n) = m·sin(2πn/N + θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EomSetting {
    pub modulation_index: f64,
    pub temporal_phase: f64,
}

impl EomSetting {
    pub fn new(modulation_index: f64, temporal_phase: f64) -> Result<Self> {
        Self::bounded(modulation_index, temporal_phase, DEFAULT_M_MAX)
    }

    pub fn bounded(modulation_index: f64, temporal_phase: f64, m_max: f64) -> Result<Self> {
        if !modulation_index.is_finite() || !(0.0..=m_max).contains(&modulation_index) {
            return Err(Error::InvalidParameter(format!(
                "modulation index {modulation_index} outside [0, {m_max}]"
            )));
        }
        if !temporal_phase.is_finite() {
            return Err(Error::InvalidParameter(
                "temporal phase must be finite".into(),
            ));
        }
        Ok(Self {
            modulation_index,
            temporal_phase: temporal_phase.rem_euclid(TAU),
        })
    }

    pub fn off() -> Self {
        Self {
            modulation_index: 0.0,
            temporal_phase: 0.0,
        }
    }
}

/// Per-bin phases applied across the passband; all other bins are blocked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShaperSetting {
    pub phases: Vec<f64>,
}

impl ShaperSetting {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "shaper phases must be finite".into(),
            ));
        }
        Ok(Self {
            phases: phases.into_iter().map(|p| p.rem_euclid(TAU)).collect(),
        })
    }

    pub fn flat(passband: usize) -> Self {
        Self {
            phases: vec![0.0; passband],
        }
    }
}

/// Alternating EOM / pulse-shaper stack, bookended by EOMs.
///
/// Index 0 of each list is the first device of its kind the light meets;
/// the full order is `eoms[0], shapers[0], eoms[1], ..., eoms[last]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfpCircuit {
    pub lattice: FrequencyLattice,
    pub eoms: Vec<EomSetting>,
    pub shapers: Vec<ShaperSetting>,
}

impl QfpCircuit {
    pub fn new(
        lattice: FrequencyLattice,
        eoms: Vec<EomSetting>,
        shapers: Vec<ShaperSetting>,
    ) -> Result<Self> {
        let circuit = Self {
            lattice,
            eoms,
            shapers,
        };
        circuit.validate()?;
        Ok(circuit)
    }

    /// Total component count `Q`.
    pub fn components(&self) -> usize {
        self.eoms.len() + self.shapers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eoms.is_empty() || self.eoms.len() != self.shapers.len() + 1 {
            return Err(Error::InvalidCircuit(format!(
                "{} EOMs and {} shapers do not alternate with EOMs at both ends",
                self.eoms.len(),
                self.shapers.len()
            )));
        }
        let passband = self.lattice.passband();
        if let Some(bad) = self.shapers.iter().find(|s| s.phases.len() != passband) {
            return Err(Error::InvalidCircuit(format!(
                "shaper has {} phases for a {passband}-bin passband",
                bad.phases.len()
            )));
        }
        Ok(())
    }
}

/// Composed circuit matrix together with its leakage on the active inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    pub entries: DMatrix<C64>,
    pub leakage: f64,
    pub active: Range<usize>,
}

impl UnitaryMatrix {
    /// Wraps `entries`, measuring leakage over all columns.
    pub fn from_entries(entries: DMatrix<C64>) -> Self {
        let active = 0..entries.ncols();
        let leakage = leakage_check(&entries);
        Self {
            entries,
            leakage,
            active,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ensure_unitary(&self, tolerance: f64) -> Result<()> {
        if self.leakage.is_finite() && self.leakage <= tolerance {
            Ok(())
        } else {
            Err(Error::NonUnitary {
                leakage: self.leakage,
                tolerance,
            })
        }
    }
}

/// `F_{mn} = exp(2πi·mn/n)/√n`.
pub fn dft_matrix(n: usize) -> Result<DMatrix<C64>> {
    if n == 0 {
        return Err(Error::InvalidDimension("DFT size must be positive".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(DMatrix::from_fn(n, n, |m, k| {
        // reduce the exponent first so large products keep full precision
        let e = ((m * k) % n) as f64 / n as f64;
        C64::from_polar(scale, TAU * e)
    }))
}

/// EOM layer `F·D·F†` with `D_nn = exp(i·m·sin(2πn/N + θ))`.
///
/// The product is circulant, so it is filled from its first column.
pub fn eom_layer(setting: &EomSetting, lattice: &FrequencyLattice) -> DMatrix<C64> {
    let n = lattice.n_modes();
    let drive: Vec<C64> = (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64 + setting.temporal_phase;
            C64::from_polar(1.0, setting.modulation_index * t.sin())
        })
        .collect();
    // f_d = (1/N) Σ_k D_k e^{2πi k d / N}
    let coeffs: Vec<C64> = (0..n)
        .map(|d| {
            drive
                .iter()
                .enumerate()
                .map(|(k, &dk)| dk * C64::from_polar(1.0, TAU * ((k * d) % n) as f64 / n as f64))
                .sum::<C64>()
                / n as f64
        })
        .collect();
    DMatrix::from_fn(n, n, |row, col| coeffs[(row + n - col) % n])
}

/// Diagonal shaper layer with hard zeros outside the passband.
pub fn shaper_layer(setting: &ShaperSetting, lattice: &FrequencyLattice) -> DMatrix<C64> {
    let n = lattice.n_modes();
    let window = lattice.passband_range();
    let mut out = DMatrix::zeros(n, n);
    for (bin, &phase) in window.zip(&setting.phases) {
        out[(bin, bin)] = C64::from_polar(1.0, phase);
    }
    out
}

/// Product of all layers, first layer rightmost.
///
/// The matrix is returned even when it leaks; callers gate on `leakage`.
pub fn compose_unitary(circuit: &QfpCircuit) -> Result<UnitaryMatrix> {
    circuit.validate()?;
    let lattice = &circuit.lattice;
    let mut total = eom_layer(&circuit.eoms[0], lattice);
    for (shaper, eom) in circuit.shapers.iter().zip(&circuit.eoms[1..]) {
        let s = shaper_layer(shaper, lattice);
        if s.nrows() != total.nrows() {
            return Err(Error::InvalidCircuit("layer dimension mismatch".into()));
        }
        // diagonal shaper: scale rows instead of a dense product
        for (r, mut row) in total.row_iter_mut().enumerate() {
            row *= s[(r, r)];
        }
        total = eom_layer(eom, lattice) * total;
    }
    let active = lattice.active_range();
    let leakage = column_leakage(&total, active.clone());
    Ok(UnitaryMatrix {
        entries: total,
        leakage,
        active,
    })
}

/// Largest entry of `|U†U − I|`.
pub fn leakage_check(u: &DMatrix<C64>) -> f64 {
    column_leakage(u, 0..u.ncols())
}

/// Largest entry of `|U_S†U_S − I|` where `U_S` holds the columns in `cols`.
pub fn column_leakage(u: &DMatrix<C64>, cols: Range<usize>) -> f64 {
    let sub = u.columns(cols.start, cols.len());
    let gram = sub.adjoint() * sub;
    let mut worst = 0.0_f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (gram[(i, j)] - target).norm();
            if dev.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max(dev);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_dev(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn ident(n: usize) -> DMatrix<C64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn dft_small_sizes() {
        assert!(matches!(dft_matrix(0), Err(Error::InvalidDimension(_))));
        assert_eq!(dft_matrix(1).unwrap(), ident(1));
        let f2 = dft_matrix(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expected = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(s, 0.0),
                C64::new(s, 0.0),
                C64::new(s, 0.0),
                C64::new(-s, 0.0),
            ],
        );
        assert!(max_dev(&f2, &expected) < 1e-15);
        let f4 = dft_matrix(4).unwrap();
        assert!(max_dev(&(f4.adjoint() * &f4), &ident(4)) < 1e-14);
    }

    #[test]
    fn eom_matches_explicit_fourier_product() {
        let lattice = FrequencyLattice::new(8, 8).unwrap();
        let setting = EomSetting::new(1.3, 0.7).unwrap();
        let f = dft_matrix(8).unwrap();
        let d = DMatrix::from_fn(8, 8, |i, j| {
            if i == j {
                C64::from_polar(1.0, 1.3 * (TAU * i as f64 / 8.0 + 0.7).sin())
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let explicit = &f * d * f.adjoint();
        assert!(max_dev(&eom_layer(&setting, &lattice), &explicit) < 1e-13);
    }

    #[test]
    fn eom_off_is_identity() {
        let lattice = FrequencyLattice::new(8, 8).unwrap();
        assert!(max_dev(&eom_layer(&EomSetting::off(), &lattice), &ident(8)) < 1e-15);
    }

    #[test]
    fn eom_sidebands_follow_fourier_series_quadrature() {
        // f_d = (1/T)∫ e^{iφ(t)} e^{i d Δω t} dt by a dense midpoint rule
        let quadrature = |m: f64, theta: f64, d: i64| {
            let samples = 20_000;
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..samples {
                let x = TAU * (s as f64 + 0.5) / samples as f64;
                acc += C64::from_polar(1.0, m * (x + theta).sin() + d as f64 * x);
            }
            acc / samples as f64
        };
        // on 8 bins the sidebands alias with J_{d±8}; at m = 0.5 that is ~1e−5
        for (n, tol) in [(8usize, 1e-5), (32, 1e-12)] {
            let lattice = FrequencyLattice::new(n, n).unwrap();
            let u = eom_layer(&EomSetting::new(0.5, 0.0).unwrap(), &lattice);
            assert!(leakage_check(&u) < 1e-12);
            for d in -3i64..=3 {
                let row = d.rem_euclid(n as i64) as usize;
                assert!(
                    (u[(row, 0)] - quadrature(0.5, 0.0, d)).norm() < tol,
                    "n={n} d={d}"
                );
            }
        }
        let lattice = FrequencyLattice::new(32, 32).unwrap();
        let u = eom_layer(&EomSetting::new(1.7, 2.2).unwrap(), &lattice);
        for d in -4i64..=4 {
            let row = d.rem_euclid(32) as usize;
            assert!(
                (u[(row, 0)] - quadrature(1.7, 2.2, d)).norm() < 1e-10,
                "d={d}"
            );
        }
    }

    #[test]
    fn eom_is_circulant() {
        let lattice = FrequencyLattice::new(7, 7).unwrap();
        let u = eom_layer(&EomSetting::new(2.1, 4.0).unwrap(), &lattice);
        for i in 0..7 {
            for j in 0..7 {
                assert!((u[(i, j)] - u[((i + 1) % 7, (j + 1) % 7)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn shaper_blocking_and_phases() {
        let full = FrequencyLattice::new(6, 6).unwrap();
        assert_eq!(shaper_layer(&ShaperSetting::flat(6), &full), ident(6));

        let narrow = FrequencyLattice::new(6, 4).unwrap();
        let s = shaper_layer(&ShaperSetting::flat(4), &narrow);
        assert_eq!(s[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(s[(5, 5)], C64::new(0.0, 0.0));
        assert_eq!(s[(1, 1)], C64::new(1.0, 0.0));

        let flipped = ShaperSetting::new(vec![PI, 0.0, 0.0, 0.0]).unwrap();
        let s = shaper_layer(&flipped, &narrow);
        assert!((s[(1, 1)] - C64::new(-1.0, 0.0)).norm() < 1e-15);

        let mask = s.map(|z| z.norm());
        assert_eq!(mask.component_mul(&mask), mask);
    }

    #[test]
    fn compose_trivial_circuits() {
        let lattice = FrequencyLattice::new(5, 5).unwrap();
        let single = QfpCircuit::new(lattice, vec![EomSetting::off()], vec![]).unwrap();
        let u = compose_unitary(&single).unwrap();
        assert_eq!(u.leakage, 0.0);
        assert!(max_dev(&u.entries, &ident(5)) < 1e-15);

        let three = QfpCircuit::new(
            lattice,
            vec![EomSetting::off(), EomSetting::off()],
            vec![ShaperSetting::flat(5)],
        )
        .unwrap();
        assert!(max_dev(&compose_unitary(&three).unwrap().entries, &ident(5)) < 1e-15);
    }

    #[test]
    fn circuit_shape_is_validated() {
        let lattice = FrequencyLattice::new(5, 3).unwrap();
        let err = QfpCircuit::new(
            lattice,
            vec![EomSetting::off()],
            vec![ShaperSetting::flat(3)],
        );
        assert!(matches!(err, Err(Error::InvalidCircuit(_))));
        let err = QfpCircuit::new(
            lattice,
            vec![EomSetting::off(), EomSetting::off()],
            vec![ShaperSetting::flat(5)],
        );
        assert!(matches!(err, Err(Error::InvalidCircuit(_))));
    }

    #[test]
    fn lattice_invariants() {
        assert!(FrequencyLattice::new(0, 0).is_err());
        assert!(FrequencyLattice::new(8, 9).is_err());
        assert!(FrequencyLattice::with_center(8, 4, 0, 1).is_err());
        assert!(FrequencyLattice::with_center(8, 8, 4, 2).is_err());
        let l = FrequencyLattice::with_center(64, 32, 32, 5).unwrap();
        assert_eq!(l.passband_range(), 16..48);
        assert_eq!(l.active_range(), 30..35);
    }

    #[test]
    fn eom_setting_bounds() {
        assert!(EomSetting::new(-0.1, 0.0).is_err());
        assert!(EomSetting::new(5.1, 0.0).is_err());
        assert!(EomSetting::bounded(5.1, 0.0, 6.0).is_ok());
        let e = EomSetting::new(1.0, -1.0).unwrap();
        assert!((0.0..TAU).contains(&e.temporal_phase));
    }

    #[test]
    fn leakage_examples() {
        assert_eq!(leakage_check(&ident(3)), 0.0);
        let mut blocked = ident(2);
        blocked[(1, 1)] = C64::new(0.0, 0.0);
        assert_eq!(leakage_check(&blocked), 1.0);
        let lattice = FrequencyLattice::new(4, 4).unwrap();
        let mut u = eom_layer(&EomSetting::new(0.9, 0.3).unwrap(), &lattice);
        u.column_mut(2).fill(C64::new(0.0, 0.0));
        assert!((leakage_check(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_modulation_leaks_through_narrow_passband() {
        let lattice = FrequencyLattice::new(8, 4).unwrap();
        let circuit = QfpCircuit::new(
            lattice,
            vec![EomSetting::new(5.0, 0.0).unwrap(), EomSetting::off()],
            vec![ShaperSetting::flat(4)],
        )
        .unwrap();
        let u = compose_unitary(&circuit).unwrap();
        assert!(u.leakage > DEFAULT_UNITARITY_TOL);
        assert!(u.ensure_unitary(DEFAULT_UNITARITY_TOL).is_err());
    }
}
