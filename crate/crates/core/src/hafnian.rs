//! Gaussian moments `⟨s₁^{n₁}⋯s_N^{n_N}⟩` as loop hafnians.
//!
//! The fast path is Kan's alternating-binomial formula
//!
//! ```text
//! Hf(σ) = 1/(Σ/2)! · Σ_ν (−1)^{Σν} ∏ C(nᵢ, νᵢ) · (½ hᵀσh)^{Σ/2},   hᵢ = nᵢ/2 − νᵢ
//! ```
//!
//! whose only `σ`-dependent piece is the quadratic form. Everything else is
//! enumerated once into a [`KanTable`] and reused across evaluations. The
//! perfect-matching expansion [`loop_hafnian_wick`] is kept as a reference.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::C64;

/// Default ceiling on the rows of any single table.
pub const DEFAULT_TABLE_CAP: usize = 10_000_000;

/// Default ceiling on the photon total accepted by the matching enumeration.
pub const DEFAULT_WICK_CAP: usize = 12;

/// Photon counts `n⃗`, one per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PhotonPattern {
    counts: Vec<usize>,
}

impl PhotonPattern {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total photon number `Σ`.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn is_odd(&self) -> bool {
        self.total() % 2 == 1
    }
}

/// Precomputed terms of Kan's formula for one photon pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct KanTable {
    counts: Vec<usize>,
    /// parity of `𝒲ᵢ = Σⱼ Dᵢⱼ`
    sign_odd: Vec<bool>,
    /// `𝒳ᵢ = ∏ⱼ C(sⱼ, Dᵢⱼ)`
    binom: Vec<f64>,
    /// `𝒵ᵢ`, row-major `κ × S`
    z: Vec<f64>,
    half_total: u32,
    inv_factorial: f64,
}

impl KanTable {
    pub fn new(counts: &[usize]) -> Result<Self> {
        Self::with_cap(counts, DEFAULT_TABLE_CAP)
    }

    pub fn with_cap(counts: &[usize], cap: usize) -> Result<Self> {
        let rows = counts
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s + 1))
            .unwrap_or(usize::MAX);
        if rows > cap {
            return Err(Error::TableTooLarge { rows, cap });
        }
        let total: usize = counts.iter().sum();
        let half_total = (total / 2) as u32;
        let width = counts.len();
        let binomials: Vec<Vec<f64>> = counts.iter().map(|&s| binomial_row(s)).collect();

        let mut sign_odd = Vec::with_capacity(rows);
        let mut binom = Vec::with_capacity(rows);
        let mut z = Vec::with_capacity(rows * width);
        // odometer over ν, last index fastest
        let mut nu = vec![0usize; width];
        for _ in 0..rows {
            let weight: usize = nu.iter().sum();
            sign_odd.push(weight % 2 == 1);
            binom.push(nu.iter().zip(&binomials).map(|(&v, row)| row[v]).product());
            z.extend(
                nu.iter()
                    .zip(counts)
                    .map(|(&v, &s)| s as f64 / 2.0 - v as f64),
            );
            for j in (0..width).rev() {
                if nu[j] < counts[j] {
                    nu[j] += 1;
                    break;
                }
                nu[j] = 0;
            }
        }

        let inv_factorial = (1..=half_total).fold(1.0, |acc, k| acc / k as f64);
        Ok(Self {
            counts: counts.to_vec(),
            sign_odd,
            binom,
            z,
            half_total,
            inv_factorial,
        })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Row count `κ`.
    pub fn kappa(&self) -> usize {
        self.binom.len()
    }

    pub fn width(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Row `i` of the index matrix `D`.
    pub fn d_row(&self, i: usize) -> Vec<usize> {
        self.z_row(i)
            .iter()
            .zip(&self.counts)
            .map(|(&z, &s)| (s as f64 / 2.0 - z) as usize)
            .collect()
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.width()..(i + 1) * self.width()]
    }

    pub fn sign_exponent_is_odd(&self, i: usize) -> bool {
        self.sign_odd[i]
    }

    pub fn binomial_product(&self, i: usize) -> f64 {
        self.binom[i]
    }

    /// `1/(Σ/2)!`
    pub fn inverse_factorial(&self) -> f64 {
        self.inv_factorial
    }

    fn evaluate(&self, sigma: &DMatrix<C64>) -> C64 {
        let s = self.width();
        let sig: Vec<C64> = (0..s * s).map(|k| sigma[(k / s, k % s)]).collect();
        let mut sum = C64::new(0.0, 0.0);
        for (row, z) in self.z.chunks_exact(s.max(1)).enumerate().take(self.kappa()) {
            let mut q = C64::new(0.0, 0.0);
            for j in 0..s {
                if z[j] == 0.0 {
                    continue;
                }
                let mut acc = sig[j * s + j] * (0.5 * z[j]);
                for k in j + 1..s {
                    acc += sig[j * s + k] * z[k];
                }
                q += acc * z[j];
            }
            let term = q.powu(self.half_total) * self.binom[row];
            if self.sign_odd[row] {
                sum -= term;
            } else {
                sum += term;
            }
        }
        if s == 0 {
            sum = C64::new(1.0, 0.0);
        }
        sum * self.inv_factorial
    }
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..=n {
        row[k] = row[k - 1] * (n + 1 - k) as f64 / k as f64;
    }
    // round to exact integers; all values here are far below 2^53
    row.iter().map(|v| v.round()).collect()
}

/// Tables for the heralding pattern `s⃗ = (n_s, …, n_s, n_K, n_s, …, n_s)`
/// over the `N_s` squeezed bins, one [`KanTable`] per `n_K ∈ 0..=n_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct HafnianTables {
    pub n_s: usize,
    pub n_squeezed: usize,
    pub n_c: usize,
    per_nk: Vec<KanTable>,
}

impl HafnianTables {
    pub fn table(&self, n_k: usize) -> Option<&KanTable> {
        self.per_nk.get(n_k)
    }

    pub fn tables(&self) -> &[KanTable] {
        &self.per_nk
    }

    /// The pattern over the squeezed bins heralding `n_k` photons in the center.
    pub fn pattern(&self, n_k: usize) -> PhotonPattern {
        herald_pattern(self.n_s, self.n_squeezed, n_k)
    }

    pub fn total_rows(&self) -> usize {
        self.per_nk.iter().map(KanTable::kappa).sum()
    }
}

pub(crate) fn herald_pattern(n_s: usize, n_squeezed: usize, n_k: usize) -> PhotonPattern {
    let mut counts = vec![n_s; n_squeezed];
    counts[n_squeezed / 2] = n_k;
    PhotonPattern::new(counts)
}

/// `κ = (n_s + 1)^{N_s − 1}(n_K + 1)`.
pub fn kappa(n_s: usize, n_squeezed: usize, n_k: usize) -> usize {
    (n_s + 1).pow(n_squeezed.saturating_sub(1) as u32) * (n_k + 1)
}

pub fn precompute_tables(n_s: usize, n_squeezed: usize, n_c: usize) -> Result<HafnianTables> {
    precompute_tables_capped(n_s, n_squeezed, n_c, DEFAULT_TABLE_CAP)
}

pub fn precompute_tables_capped(
    n_s: usize,
    n_squeezed: usize,
    n_c: usize,
    cap: usize,
) -> Result<HafnianTables> {
    if n_squeezed == 0 || n_squeezed % 2 == 0 {
        return Err(Error::InvalidArguments(format!(
            "number of squeezed bins must be odd, got {n_squeezed}"
        )));
    }
    let largest = (n_s + 1)
        .checked_pow(n_squeezed as u32 - 1)
        .and_then(|k| k.checked_mul(n_c + 1))
        .unwrap_or(usize::MAX);
    if largest > cap {
        return Err(Error::TableTooLarge { rows: largest, cap });
    }
    let per_nk = (0..=n_c)
        .map(|n_k| KanTable::with_cap(herald_pattern(n_s, n_squeezed, n_k).counts(), cap))
        .collect::<Result<Vec<_>>>()?;
    Ok(HafnianTables {
        n_s,
        n_squeezed,
        n_c,
        per_nk,
    })
}

fn check_square(sigma: &DMatrix<C64>, len: usize) -> Result<()> {
    if sigma.nrows() != len || sigma.ncols() != len {
        return Err(Error::InvalidArguments(format!(
            "σ is {}×{} but the pattern has {len} modes",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    Ok(())
}

/// Loop hafnian by Kan's formula using a table built for `pattern`.
pub fn loop_hafnian(
    sigma: &DMatrix<C64>,
    pattern: &PhotonPattern,
    table: &KanTable,
) -> Result<C64> {
    check_square(sigma, pattern.len())?;
    if table.counts() != pattern.counts() {
        return Err(Error::InvalidArguments(format!(
            "table built for {:?} used with pattern {:?}",
            table.counts(),
            pattern.counts()
        )));
    }
    if pattern.is_odd() {
        return Ok(C64::new(0.0, 0.0));
    }
    Ok(table.evaluate(sigma))
}

/// Loop hafnian by explicit enumeration of perfect matchings of the
/// expanded factor list, refusing totals above `cap`.
pub fn loop_hafnian_wick(sigma: &DMatrix<C64>, pattern: &PhotonPattern, cap: usize) -> Result<C64> {
    check_square(sigma, pattern.len())?;
    let total = pattern.total();
    if total > cap {
        return Err(Error::TooManyPhotons { total, cap });
    }
    if total % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    let labels: Vec<usize> = pattern
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(mode, &n)| std::iter::repeat_n(mode, n))
        .collect();
    let mut used = vec![false; labels.len()];
    Ok(match_rest(sigma, &labels, &mut used))
}

fn match_rest(sigma: &DMatrix<C64>, labels: &[usize], used: &mut [bool]) -> C64 {
    let Some(first) = used.iter().position(|u| !u) else {
        return C64::new(1.0, 0.0);
    };
    used[first] = true;
    let mut sum = C64::new(0.0, 0.0);
    for partner in first + 1..labels.len() {
        if used[partner] {
            continue;
        }
        used[partner] = true;
        sum += sigma[(labels[first], labels[partner])] * match_rest(sigma, labels, used);
        used[partner] = false;
    }
    used[first] = false;
    sum
}

/// `⟨s₁^{n₁}⋯⟩`: zero for odd totals, the loop hafnian otherwise.
pub fn moment_integral(
    sigma: &DMatrix<C64>,
    pattern: &PhotonPattern,
    table: &KanTable,
) -> Result<C64> {
    loop_hafnian(sigma, pattern, table)
}
