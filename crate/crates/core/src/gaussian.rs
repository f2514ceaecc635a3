//! Covariance-matrix algebra for pure Gaussian states with zero displacement.
//!
//! Conventions: `qqpp` ordering, `ħ = 1`, vacuum covariance `I/2`. The input
//! state is a product of single-mode squeezed vacua with
//! `V₀ = ½·diag(e^{2r₁}, …, e^{2r_N}, e^{−2r₁}, …, e^{−2r_N})`; any squeezing
//! phase is absorbed into the passive transformation.
//!
//! Everything downstream of the circuit is closed form: `Γ⁻¹ = S_p (V₀ + ½)⁻¹ S_pᵀ`
//! reduces to the blocks `A` and `C`, which fix `H⁻¹` and finally the second
//! moment matrix `σ` that feeds the loop hafnian. No matrix is inverted.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuit::UnitaryMatrix;
use crate::error::{Error, Result};
use crate::C64;

/// Default cap on single-mode squeezing.
pub const DEFAULT_R_MAX: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingVector {
    r: Vec<f64>,
}

impl SqueezingVector {
    /// Arbitrary per-mode squeezing, each entry in `[0, r_max]`.
    pub fn new(r: Vec<f64>, r_max: f64) -> Result<Self> {
        if let Some(bad) = r
            .iter()
            .find(|&&x| !(x.is_finite() && (0.0..=r_max).contains(&x)))
        {
            return Err(Error::InvalidParameter(format!(
                "squeezing {bad} outside [0, {r_max}]"
            )));
        }
        Ok(Self { r })
    }

    /// Squeezing on the `values.len()` bins centered on `center`, vacuum elsewhere.
    pub fn centered(n_modes: usize, center: usize, values: &[f64], r_max: f64) -> Result<Self> {
        let width = values.len();
        if width % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "{width} squeezed bins cannot be centered"
            )));
        }
        let half = width / 2;
        if center < half || center + half >= n_modes {
            return Err(Error::InvalidParameter(format!(
                "{width} squeezed bins around {center} exceed {n_modes} modes"
            )));
        }
        let mut r = vec![0.0; n_modes];
        r[center - half..=center + half].copy_from_slice(values);
        Self::new(r, r_max)
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self {
            r: vec![0.0; n_modes],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Indices with nonzero squeezing.
    pub fn support(&self) -> Vec<usize> {
        self.r
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn tanh(&self) -> Vec<f64> {
        self.r.iter().map(|x| x.tanh()).collect()
    }
}

/// Real blocks of `S_p = [[S_A, S_B], [−S_B, S_A]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticOrthogonal {
    pub s_a: DMatrix<f64>,
    pub s_b: DMatrix<f64>,
}

impl SymplecticOrthogonal {
    pub fn n_modes(&self) -> usize {
        self.s_a.nrows()
    }

    /// The full `2N×2N` matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&self.s_a);
        out.view_mut((0, n), (n, n)).copy_from(&self.s_b);
        out.view_mut((n, 0), (n, n)).copy_from(&(-&self.s_b));
        out.view_mut((n, n), (n, n)).copy_from(&self.s_a);
        out
    }

    /// Largest violation of the four block identities of a symplectic
    /// orthogonal matrix.
    pub fn block_identity_residual(&self) -> f64 {
        let (a, b) = (&self.s_a, &self.s_b);
        let id = DMatrix::<f64>::identity(self.n_modes(), self.n_modes());
        let checks = [
            a.transpose() * b - b.transpose() * a,
            a * b.transpose() - b * a.transpose(),
            a.transpose() * a + b.transpose() * b - &id,
            a * a.transpose() + b * b.transpose() - &id,
        ];
        checks.iter().map(|m| m.amax()).fold(0.0, f64::max)
    }
}

/// `Γ⁻¹ = [[A, C], [C, 2I − A]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaBlocks {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl GammaBlocks {
    pub fn n_modes(&self) -> usize {
        self.a.nrows()
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let two_minus_a = DMatrix::<f64>::identity(n, n) * 2.0 - &self.a;
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&self.a);
        out.view_mut((0, n), (n, n)).copy_from(&self.c);
        out.view_mut((n, 0), (n, n)).copy_from(&self.c);
        out.view_mut((n, n), (n, n)).copy_from(&two_minus_a);
        out
    }

    /// `A − I + iC`, the off-diagonal block of `W†HW`.
    fn offset(&self) -> DMatrix<C64> {
        let n = self.n_modes();
        DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            C64::new(self.a[(i, j)] - delta, self.c[(i, j)])
        })
    }
}

/// `H⁻¹` for `H = 𝓑 + I/2`; complex symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct HInverse(pub DMatrix<C64>);

impl HInverse {
    pub fn n_modes(&self) -> usize {
        self.0.nrows() / 2
    }
}

/// Second moments `σᵢⱼ = ⟨sᵢsⱼ⟩` with `s = q + ip`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaMatrix(pub DMatrix<C64>);

impl SigmaMatrix {
    /// Principal submatrix on `indices`, in the given order.
    pub fn block(&self, indices: &[usize]) -> DMatrix<C64> {
        DMatrix::from_fn(indices.len(), indices.len(), |i, j| {
            self.0[(indices[i], indices[j])]
        })
    }

    /// The `width×width` block centered on `center`.
    pub fn center_block(&self, center: usize, width: usize) -> DMatrix<C64> {
        let half = width / 2;
        let idx: Vec<usize> = (center - half..=center + half).collect();
        self.block(&idx)
    }
}

/// `S_p = W·diag(U, U*)·W†`, i.e. `S_A = Re U`, `S_B = −Im U`.
pub fn unitary_to_symplectic(u: &UnitaryMatrix, tolerance: f64) -> Result<SymplecticOrthogonal> {
    u.ensure_unitary(tolerance)?;
    Ok(SymplecticOrthogonal {
        s_a: u.entries.map(|z| z.re),
        s_b: u.entries.map(|z| -z.im),
    })
}

/// `W = (1/√2)[[I, I], [−iI, iI]]`.
pub fn w_matrix(n: usize) -> DMatrix<C64> {
    let s = 1.0 / 2f64.sqrt();
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        w[(i, i)] = C64::new(s, 0.0);
        w[(i, i + n)] = C64::new(s, 0.0);
        w[(i + n, i)] = C64::new(0.0, -s);
        w[(i + n, i + n)] = C64::new(0.0, s);
    }
    w
}

/// Closed-form blocks of `Γ⁻¹` with `T = diag(tanh rᵢ)`:
/// `A = I − S_A T S_Aᵀ + S_B T S_Bᵀ`, `C = S_A T S_Bᵀ + S_B T S_Aᵀ`.
pub fn gamma_inverse_blocks(s: &SymplecticOrthogonal, r: &SqueezingVector) -> Result<GammaBlocks> {
    let n = s.n_modes();
    if r.len() != n {
        return Err(Error::InvalidDimension(format!(
            "{} squeezing values for {n} modes",
            r.len()
        )));
    }
    let t = r.tanh();
    let support: Vec<usize> = (0..n).filter(|&k| t[k] != 0.0).collect();
    // only squeezed columns contribute
    let a_t = DMatrix::from_fn(n, support.len(), |i, k| {
        s.s_a[(i, support[k])] * t[support[k]]
    });
    let b_t = DMatrix::from_fn(n, support.len(), |i, k| {
        s.s_b[(i, support[k])] * t[support[k]]
    });
    let a_s = s.s_a.select_columns(&support);
    let b_s = s.s_b.select_columns(&support);

    let mut a = DMatrix::<f64>::identity(n, n) - &a_t * a_s.transpose() + &b_t * b_s.transpose();
    let mut c = &a_t * b_s.transpose() + &b_t * a_s.transpose();
    symmetrize(&mut a);
    symmetrize(&mut c);
    Ok(GammaBlocks { a, c })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `det Γ = ∏ cosh² rᵢ`.
pub fn det_gamma(r: &SqueezingVector) -> f64 {
    r.values().iter().map(|x| x.cosh().powi(2)).product()
}

/// `Γ = S_p V₀ S_pᵀ + I/2`, assembled densely.
pub fn gamma_matrix(s: &SymplecticOrthogonal, r: &SqueezingVector) -> DMatrix<f64> {
    let n = s.n_modes();
    let v0 = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i != j {
            0.0
        } else if i < n {
            0.5 * (2.0 * r.values()[i]).exp()
        } else {
            0.5 * (-2.0 * r.values()[i - n]).exp()
        }
    });
    let sp = s.full();
    &sp * v0 * sp.transpose() + DMatrix::<f64>::identity(2 * n, 2 * n) * 0.5
}

/// `𝓑 = ½[[A + iC, C − i(A − I)], [C − i(A − I), 2I − A − iC]]`.
pub fn b_matrix(blocks: &GammaBlocks) -> DMatrix<C64> {
    let n = blocks.n_modes();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let a = blocks.a[(i, j)];
            let c = blocks.c[(i, j)];
            let delta = if i == j { 1.0 } else { 0.0 };
            out[(i, j)] = C64::new(a, c) * 0.5;
            let off = C64::new(c, -(a - delta)) * 0.5;
            out[(i, j + n)] = off;
            out[(i + n, j)] = off;
            out[(i + n, j + n)] = C64::new(2.0 * delta - a, -c) * 0.5;
        }
    }
    out
}

/// `H⁻¹ = ½[[3I − A − iC, i(A − I + iC)], [i(A − I + iC), I + A + iC]]`.
pub fn h_inverse(blocks: &GammaBlocks) -> HInverse {
    let n = blocks.n_modes();
    let offset = blocks.offset();
    let i_unit = C64::new(0.0, 1.0);
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            let (a, c) = (blocks.a[(i, j)], blocks.c[(i, j)]);
            out[(i, j)] = C64::new(3.0 * delta - a, -c) * 0.5;
            let off = i_unit * offset[(i, j)] * 0.5;
            out[(i, j + n)] = off;
            out[(i + n, j)] = off;
            out[(i + n, j + n)] = C64::new(delta + a, c) * 0.5;
        }
    }
    HInverse(out)
}

/// `σᵢⱼ = 2(H⁻¹ᵢⱼ − H⁻¹_{i+N, j+N})`.
pub fn sigma_from_h_inverse(h: &HInverse) -> SigmaMatrix {
    let n = h.n_modes();
    let mut sigma = DMatrix::from_fn(n, n, |i, j| (h.0[(i, j)] - h.0[(i + n, j + n)]) * 2.0);
    for i in 0..n {
        for j in i + 1..n {
            sigma[(j, i)] = sigma[(i, j)];
        }
    }
    SigmaMatrix(sigma)
}

/// `U`, `r` → `σ` through the closed-form blocks.
pub fn sigma_matrix(u: &UnitaryMatrix, r: &SqueezingVector, tolerance: f64) -> Result<SigmaMatrix> {
    let s = unitary_to_symplectic(u, tolerance)?;
    let blocks = gamma_inverse_blocks(&s, r)?;
    Ok(sigma_from_h_inverse(&h_inverse(&blocks)))
}
