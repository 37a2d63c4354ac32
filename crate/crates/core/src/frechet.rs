//! Matrix entries of `F` and its action on Zernike coefficient tables.
//!
//! `a^{j,k}_{m,n} = ⟨(Fψ_{j,k}) f_m, f_n⟩` is nonzero only on `n = m + j`
//! with `mn > 0` and `k < min{|m|,|n|}`. For a fixed `j` the nonzero values
//! on the positive quadrant are the entries of the lower-triangular matrix
//! `F^{|j|}_{m,k} = a^{|j|,k−1}_{m,m+|j|}`; the negative quadrant mirrors it.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::special::ln_gamma_ratio;
use crate::zernike::SpectralPerturbation;
use crate::{Error, Result, FRAC_1_SQRT_PI};

/// Nonzero boundary Fourier mode `m` of `f_m = e^{imθ}/√(2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FourierIndex(i64);

impl FourierIndex {
    pub fn new(m: i64) -> Result<Self> {
        if m == 0 {
            Err(Error::invalid("Fourier index 0 is excluded (mean-free boundary space)"))
        } else {
            Ok(FourierIndex(m))
        }
    }

    pub fn get(self) -> i64 {
        self.0
    }
}

/// `a^{j,k}_{m,n}` in closed form. Total: returns exactly `0.0` off the
/// support (including `m = 0` or `n = 0`).
pub fn entry(j: i64, k: usize, m: i64, n: i64) -> f64 {
    if n != m + j || m == 0 || n == 0 || (m > 0) != (n > 0) {
        return 0.0;
    }
    let p = m.unsigned_abs().min(n.unsigned_abs());
    let k64 = k as u64;
    if k64 >= p {
        return 0.0;
    }
    let ja = j.unsigned_abs();
    let mut prod = 1.0;
    for i in 1..=k64 {
        prod *= (p - i) as f64 / (ja + p + k64 - i) as f64;
    }
    -FRAC_1_SQRT_PI * ((ja + 2 * k64 + 1) as f64).sqrt() / (p + ja + k64) as f64 * prod
}

/// Shared prefactor `(1/√π)·√(2k+|j|−1)/(m+|j|)` of the gamma form and the
/// majorant. Both must use this exact expression so that they agree
/// bitwise at `k = 1`.
pub(crate) fn prefactor(j_abs: u64, m: u64, k: f64) -> f64 {
    FRAC_1_SQRT_PI * (2.0 * k + j_abs as f64 - 1.0).sqrt() / (m + j_abs) as f64
}

/// `ln ρ(x) = lnΓ(m) + lnΓ(m+|j|+1) − lnΓ(m−x+1) − lnΓ(m+|j|+x)`.
pub(crate) fn ln_gamma_quotient(j_abs: u64, m: u64, x: f64) -> f64 {
    let m = m as f64;
    let j = j_abs as f64;
    ln_gamma_ratio(m, m - x + 1.0) + ln_gamma_ratio(m + j + 1.0, m + j + x)
}

/// `|F^{|j|}_{m,k}|` through the gamma-function form, for `1 ≤ k ≤ m`.
pub fn entry_gamma(j: i64, k: usize, m: usize) -> Result<f64> {
    if k < 1 || k > m {
        return Err(Error::invalid(format!("entry_gamma needs 1 <= k <= m, got k={k}, m={m}")));
    }
    let ja = j.unsigned_abs();
    let m = m as u64;
    Ok(prefactor(ja, m, k as f64) * ln_gamma_quotient(ja, m, k as f64).exp())
}

/// Magnitudes `|F^{|j|}_{m,k}|` along row `m` for `k = 1, 2, …, m`, by the
/// ratio `ρ(k+1)/ρ(k) = (m−k)/(m+|j|+k)`.
pub fn row_magnitudes(j_abs: u64, m: u64) -> impl Iterator<Item = f64> {
    let mut rho = 1.0;
    (1..=m).map(move |k| {
        let value = prefactor(j_abs, m, k as f64) * rho;
        rho *= (m - k) as f64 / (m + j_abs + k) as f64;
        value
    })
}

/// `ln|F^{|j|}_{m,k}|` down column `k` for `m = k, k+1, …`, accumulated in
/// log space so that entries do not underflow before they grow back.
pub fn column_log_magnitudes(j_abs: u64, k: u64) -> impl Iterator<Item = f64> {
    assert!(k >= 1, "columns are 1-based");
    let mut log = entry_gamma(j_abs as i64, k as usize, k as usize)
        .expect("1 <= k = m")
        .ln();
    (k..).map(move |m| {
        let value = log;
        // |F_{m+1,k}| / |F_{m,k}| = m(m+|j|) / ((m−k+1)(m+|j|+k))
        let (mf, jf, kf) = (m as f64, j_abs as f64, k as f64);
        log += (mf / (mf - kf + 1.0)).ln() + ((mf + jf) / (mf + jf + kf)).ln();
        value
    })
}

/// Finite section of `F^{|j|}`: `rows × cols`, row-major, 1-based accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularBlock {
    j_abs: usize,
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

/// Section `M × K` of `F^{|j|}` with `entries[m,k] = a^{|j|,k−1}_{m,m+|j|}`.
pub fn assemble_block(j_abs: usize, rows: usize, cols: usize) -> Result<TriangularBlock> {
    if cols < 1 || cols > rows {
        return Err(Error::invalid(format!(
            "block needs 1 <= K <= M, got M={rows}, K={cols}"
        )));
    }
    let mut entries = vec![0.0; rows * cols];
    entries
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| {
            let m = i as u64 + 1;
            for (slot, mag) in row.iter_mut().zip(row_magnitudes(j_abs as u64, m)) {
                *slot = -mag;
            }
        });
    Ok(TriangularBlock {
        j_abs,
        rows,
        cols,
        entries,
    })
}

impl TriangularBlock {
    /// Build from raw row-major entries; checks shape, triangularity, sign.
    pub fn from_entries(j_abs: usize, rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if cols > rows || entries.len() != rows * cols {
            return Err(Error::invalid("block shape mismatch"));
        }
        for m in 0..rows {
            for k in 0..cols {
                let v = entries[m * cols + k];
                if !v.is_finite() || v > 0.0 || (k > m && v != 0.0) {
                    return Err(Error::invalid(format!(
                        "entry ({}, {}) = {v} violates the triangular nonpositive structure",
                        m + 1,
                        k + 1
                    )));
                }
            }
        }
        Ok(TriangularBlock {
            j_abs,
            rows,
            cols,
            entries,
        })
    }

    pub fn j_abs(&self) -> usize {
        self.j_abs
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `F^{|j|}_{m,k}` with 1-based `m`, `k`.
    pub fn value(&self, m: usize, k: usize) -> f64 {
        self.entries[(m - 1) * self.cols + (k - 1)]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.entries[(m - 1) * self.cols..m * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `block · x` for complex `x` of length `cols`.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (1..=self.rows)
            .map(|m| {
                self.row(m)
                    .iter()
                    .zip(x)
                    .take(m)
                    .fold(Complex64::new(0.0, 0.0), |acc, (&a, &c)| acc + c * a)
            })
            .collect()
    }

    pub(crate) fn mul_real(&self, x: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            let row = &self.entries[m * self.cols..(m + 1) * self.cols];
            let len = (m + 1).min(self.cols);
            *o = row[..len].iter().zip(&x[..len]).map(|(a, b)| a * b).sum();
        }
    }

    pub(crate) fn mul_transpose_real(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (m, &ym) in y.iter().enumerate() {
            let row = &self.entries[m * self.cols..(m + 1) * self.cols];
            let len = (m + 1).min(self.cols);
            for (o, a) in out[..len].iter_mut().zip(&row[..len]) {
                *o += a * ym;
            }
        }
    }
}

/// Matrix of `Fη` on the Fourier modes `0 < |m|, |n| ≤ mmax`, stored as one
/// vector per diagonal `j = n − m ∈ [−2·mmax, 2·mmax]`, entries by
/// ascending `m`. Positions between the two quadrants hold explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct NDPerturbation {
    mmax: usize,
    diagonals: Vec<Vec<Complex64>>,
}

/// Rows `m` (ascending) of diagonal `j` inside the window `0 < |m|,|m+j| ≤ mmax`.
pub fn diagonal_rows(j: i64, mmax: usize) -> impl Iterator<Item = i64> {
    let mm = mmax as i64;
    (-mm..=mm).filter(move |&m| m != 0 && m + j != 0 && (m + j).abs() <= mm)
}

/// True on the strip `min{−j,0} < m < max{−j,0}` between the quadrants.
pub fn in_empty_strip(j: i64, m: i64) -> bool {
    (-j).min(0) < m && m < (-j).max(0)
}

impl NDPerturbation {
    pub fn zeros(mmax: usize) -> Self {
        let mm = mmax as i64;
        let diagonals = (-2 * mm..=2 * mm)
            .map(|j| vec![Complex64::new(0.0, 0.0); diagonal_rows(j, mmax).count()])
            .collect();
        NDPerturbation { mmax, diagonals }
    }

    pub fn mmax(&self) -> usize {
        self.mmax
    }

    /// Diagonal keys `−2·mmax..=2·mmax`.
    pub fn offsets(&self) -> impl Iterator<Item = i64> {
        let mm = self.mmax as i64;
        -2 * mm..=2 * mm
    }

    fn slot(&self, m: i64, n: i64) -> Option<(usize, usize)> {
        let mm = self.mmax as i64;
        if m == 0 || n == 0 || m.abs() > mm || n.abs() > mm {
            return None;
        }
        let j = n - m;
        // rows strictly below m on this diagonal
        let pos = diagonal_rows(j, self.mmax).take_while(|&r| r < m).count();
        Some(((j + 2 * mm) as usize, pos))
    }

    /// `a^j_{m,n}(η)`; zero outside the window.
    pub fn get(&self, m: i64, n: i64) -> Complex64 {
        self.slot(m, n)
            .map(|(d, p)| self.diagonals[d][p])
            .unwrap_or_default()
    }

    pub fn set(&mut self, m: i64, n: i64, value: Complex64) -> Result<()> {
        let (d, p) = self.slot(m, n).ok_or_else(|| {
            Error::invalid(format!("position (m={m}, n={n}) outside window mmax={}", self.mmax))
        })?;
        self.diagonals[d][p] = value;
        Ok(())
    }

    /// Stored values of diagonal `j`, by ascending `m`.
    pub fn diagonal(&self, j: i64) -> &[Complex64] {
        let mm = self.mmax as i64;
        if j.abs() > 2 * mm {
            return &[];
        }
        &self.diagonals[(j + 2 * mm) as usize]
    }

    /// Number of rows of `F^{|j|}` visible in the window: `mmax − |j|`.
    pub fn quadrant_len(&self, j: i64) -> usize {
        self.mmax.saturating_sub(j.unsigned_abs() as usize)
    }

    /// Positive-quadrant values indexed by `p = min{m, m+j} = 1, 2, …`.
    pub fn positive_quadrant(&self, j: i64) -> Vec<Complex64> {
        (1..=self.quadrant_len(j) as i64)
            .map(|p| {
                let m = if j >= 0 { p } else { p - j };
                self.get(m, m + j)
            })
            .collect()
    }

    /// Negative-quadrant values, indexed by the row `p` of their mirror image.
    pub fn negative_quadrant(&self, j: i64) -> Vec<Complex64> {
        (1..=self.quadrant_len(j) as i64)
            .map(|p| {
                let m = if j >= 0 { p } else { p - j };
                self.get(-(m + j), -m)
            })
            .collect()
    }

    /// `(j, m, n, value)` ordered by `j`, then `m`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, i64, Complex64)> + '_ {
        self.offsets().zip(&self.diagonals).flat_map(move |(j, diag)| {
            diagonal_rows(j, self.mmax)
                .zip(diag)
                .map(move |(m, &v)| (j, m, m + j, v))
        })
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|(.., v)| v == Complex64::new(0.0, 0.0))
    }

    /// Apply `f` to every stored value.
    pub fn map_values<F: FnMut(i64, i64, Complex64) -> Complex64>(&self, mut f: F) -> Self {
        let mut out = self.clone();
        for (d, j) in self.offsets().enumerate() {
            for (slot, m) in out.diagonals[d].iter_mut().zip(diagonal_rows(j, self.mmax)) {
                *slot = f(m, m + j, *slot);
            }
        }
        out
    }
}

/// Diagonals of `coeffs` that lie entirely outside the Fourier window.
pub fn dropped_diagonals(coeffs: &SpectralPerturbation, mmax: usize) -> Vec<i64> {
    coeffs
        .frequencies()
        .filter(|j| j.unsigned_abs() as usize > 2 * mmax)
        .collect()
}

/// `Fη` on the window `0 < |m|, |n| ≤ mmax`.
pub fn apply(coeffs: &SpectralPerturbation, mmax: usize) -> Result<NDPerturbation> {
    if mmax < 1 {
        return Err(Error::invalid("mmax must be at least 1"));
    }
    let mut nd = NDPerturbation::zeros(mmax);
    let freqs: Vec<i64> = coeffs
        .frequencies()
        .filter(|j| (j.unsigned_abs() as usize) < mmax)
        .collect();
    let images: Vec<(i64, Vec<Complex64>)> = freqs
        .par_iter()
        .map(|&j| {
            let c = coeffs.block(j).expect("frequency inside table");
            let rows = mmax - j.unsigned_abs() as usize;
            let cols = c.len().min(rows);
            let block = assemble_block(j.unsigned_abs() as usize, rows, cols)?;
            Ok((j, block.mul_vec(&c[..cols])))
        })
        .collect::<Result<_>>()?;
    let mm = mmax as i64;
    for (j, image) in images {
        let d = (j + 2 * mm) as usize;
        for (slot, m) in nd.diagonals[d].iter_mut().zip(diagonal_rows(j, mmax)) {
            *slot = if m > (-j).max(0) {
                image[(m.min(m + j) - 1) as usize]
            } else if m < (-j).min(0) {
                // mirror (−m−j, −m) lies in the positive quadrant
                let (mp, np) = (-m - j, -m);
                image[(mp.min(np) - 1) as usize]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
    Ok(nd)
}

/// Hilbert–Schmidt (Frobenius) norm of the stored matrix.
pub fn hs_norm(nd: &NDPerturbation) -> f64 {
    nd.iter().map(|(.., v)| v.norm_sqr()).sum::<f64>().sqrt()
}
