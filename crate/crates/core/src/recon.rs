//! One-step linearized reconstruction.
//!
//! Each diagonal `j` of the measured matrix only sees the coefficients
//! `c^j = (c_{j,0}, c_{j,1}, …)` through `F^{|j|}`, so the inverse problem
//! splits into independent ridge problems
//! `min ‖F^{|j|}c − d^j‖² + α‖c‖²`, one per diagonal.

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frechet::{assemble_block, NDPerturbation, TriangularBlock};
use crate::zernike::SpectralPerturbation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub mmax: usize,
    pub jmax: usize,
    pub kmax: usize,
    pub alpha: f64,
    #[serde(default)]
    pub noise_sigma: f64,
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mmax == 0 {
            return Err(Error::invalid("mmax must be positive"));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

fn split(d: &[Complex64]) -> DMatrix<f64> {
    DMatrix::from_fn(d.len(), 2, |i, c| if c == 0 { d[i].re } else { d[i].im })
}

fn join(x: &DMatrix<f64>) -> Vec<Complex64> {
    (0..x.nrows()).map(|i| Complex64::new(x[(i, 0)], x[(i, 1)])).collect()
}

fn forward_substitution(block: &TriangularBlock, d: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = block.cols();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..n {
        let row = block.row(m + 1);
        let diag = row[m];
        if diag == 0.0 {
            return Err(Error::Singular(format!("zero diagonal at row {}", m + 1)));
        }
        let partial: Complex64 = row[..m].iter().zip(&c).map(|(a, x)| x * *a).sum();
        c[m] = (d[m] - partial) / diag;
    }
    Ok(c)
}

/// `argmin ‖B c − d‖² + α‖c‖²` by a QR factorization of `[B; √α I]`.
///
/// With `α = 0` a square block is solved by forward substitution and a
/// rank-deficient system is reported as [`Error::Singular`].
pub fn solve_block(block: &TriangularBlock, d: &[Complex64], alpha: f64) -> Result<Vec<Complex64>> {
    let (rows, cols) = (block.rows(), block.cols());
    if d.len() != rows {
        return Err(Error::invalid(format!("data has length {}, block has {rows} rows", d.len())));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if alpha == 0.0 && rows == cols {
        return forward_substitution(block, d);
    }
    let sa = alpha.sqrt();
    let a = DMatrix::from_fn(rows + cols, cols, |i, k| {
        if i < rows {
            block.row(i + 1)[k]
        } else if i - rows == k {
            sa
        } else {
            0.0
        }
    });
    let mut rhs = DMatrix::zeros(rows + cols, 2);
    rhs.view_mut((0, 0), (rows, 2)).copy_from(&split(d));
    let qr = a.qr();
    let r = qr.r();
    if alpha == 0.0 && r.diagonal().iter().any(|&x| x == 0.0) {
        return Err(Error::Singular("normal equations are singular at alpha = 0".into()));
    }
    let qtb = qr.q().transpose() * rhs;
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    Ok(join(&x))
}

/// 2-norm condition number of a block (ratio of extreme singular values).
pub fn block_condition(block: &TriangularBlock) -> f64 {
    let a = DMatrix::from_row_slice(block.rows(), block.cols(), block.entries());
    let s = a.singular_values();
    let (max, min) = (s.max(), s.min());
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Number of rows of `F^{|j|}` observed in a window of size `mmax`.
fn observed_rows(j: i64, mmax: usize) -> usize {
    mmax.saturating_sub(j.unsigned_abs() as usize)
}

/// Recover a coefficient table from the positive quadrant of `nd`.
pub fn reconstruct(nd: &NDPerturbation, cfg: &ReconConfig) -> Result<SpectralPerturbation> {
    cfg.validate()?;
    if nd.mmax() < cfg.mmax {
        return Err(Error::invalid(format!(
            "data window mmax={} is smaller than requested mmax={}",
            nd.mmax(),
            cfg.mmax
        )));
    }
    let mut table = SpectralPerturbation::zeros(cfg.jmax, cfg.kmax);
    if nd.is_zero() {
        warn!("no nonzero data; returning a zero coefficient table");
        return Ok(table);
    }
    let ji = cfg.jmax as i64;
    let solved: Vec<(i64, Vec<Complex64>)> = (-ji..=ji)
        .into_par_iter()
        .filter(|&j| observed_rows(j, cfg.mmax) > 0)
        .map(|j| {
            let rows = observed_rows(j, cfg.mmax);
            let cols = (cfg.kmax + 1).min(rows);
            let block = assemble_block(j.unsigned_abs() as usize, rows, cols)?;
            let mut d = nd.positive_quadrant(j);
            d.truncate(rows);
            Ok((j, solve_block(&block, &d, cfg.alpha)?))
        })
        .collect::<Result<_>>()?;
    for (j, c) in solved {
        for (k, v) in c.into_iter().enumerate() {
            table.set(j, k, v)?;
        }
    }
    Ok(table)
}

/// Condition numbers of the blocks used by [`reconstruct`], keyed by `j`.
pub fn block_conditions(cfg: &ReconConfig) -> Result<Vec<(i64, f64)>> {
    let ji = cfg.jmax as i64;
    (-ji..=ji)
        .filter(|&j| observed_rows(j, cfg.mmax) > 0)
        .map(|j| {
            let rows = observed_rows(j, cfg.mmax);
            let block = assemble_block(j.unsigned_abs() as usize, rows, (cfg.kmax + 1).min(rows))?;
            Ok((j, block_condition(&block)))
        })
        .collect()
}

/// Add i.i.d. complex Gaussian noise with `E|z|² = σ²` to every stored entry.
pub fn add_noise(nd: &NDPerturbation, sigma: f64, seed: u64) -> Result<NDPerturbation> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
    Ok(nd.map_values(|_, _, v| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        v + Complex64::new(s * re, s * im)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::apply;
    use crate::zernike::ZernikeIndex;
    use crate::FRAC_1_SQRT_PI;
    use rand::Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn one_by_one() {
        let b = TriangularBlock::from_entries(0, 1, 1, vec![-FRAC_1_SQRT_PI]).unwrap();
        let x = solve_block(&b, &[c(-FRAC_1_SQRT_PI)], 0.0).unwrap();
        assert_eq!(x, vec![c(1.0)]);
    }

    #[test]
    fn square_round_trip() {
        let b = assemble_block(2, 8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let d = b.mul_vec(&truth);
        let x = solve_block(&b, &d, 0.0).unwrap();
        for (x, t) in x.iter().zip(&truth) {
            assert!((x - t).norm() <= 1e-8 * t.norm());
        }
    }

    #[test]
    fn tall_round_trip_without_regularization() {
        let b = assemble_block(1, 20, 4).unwrap();
        let truth = vec![c(1.0), Complex64::new(0.0, -2.0), c(0.5), c(-0.25)];
        let x = solve_block(&b, &b.mul_vec(&truth), 0.0).unwrap();
        for (x, t) in x.iter().zip(&truth) {
            assert!((x - t).norm() < 1e-9);
        }
    }

    #[test]
    fn large_alpha_shrinks_to_zero() {
        let b = assemble_block(0, 10, 3).unwrap();
        let d = b.mul_vec(&[c(1.0), c(1.0), c(1.0)]);
        let x = solve_block(&b, &d, 1e12).unwrap();
        assert!(x.iter().all(|x| x.norm() < 1e-10));
    }

    #[test]
    fn singular_square_block_reported() {
        let b = TriangularBlock::from_entries(0, 2, 2, vec![-1.0, 0.0, -1.0, 0.0]).unwrap();
        assert!(matches!(solve_block(&b, &[c(1.0), c(1.0)], 0.0), Err(Error::Singular(_))));
        let tall = TriangularBlock::from_entries(0, 3, 2, vec![-1.0, 0.0, -1.0, 0.0, -1.0, 0.0]).unwrap();
        assert!(matches!(solve_block(&tall, &[c(1.0); 3], 0.0), Err(Error::Singular(_))));
        assert!(solve_block(&tall, &[c(1.0); 3], 1e-6).is_ok());
    }

    #[test]
    fn argument_checks() {
        let b = assemble_block(0, 3, 2).unwrap();
        assert!(solve_block(&b, &[c(1.0)], 0.0).is_err());
        assert!(solve_block(&b, &[c(1.0); 3], -1.0).is_err());
        assert!(solve_block(&b, &[c(1.0); 3], f64::NAN).is_err());
    }

    #[test]
    fn constant_perturbation_recovered() {
        let eta = SpectralPerturbation::unit(0, 0, ZernikeIndex::new(0, 0)).unwrap();
        let nd = apply(&eta, 30).unwrap();
        let cfg = ReconConfig { mmax: 30, jmax: 0, kmax: 0, alpha: 1e-10, noise_sigma: 0.0 };
        let rec = reconstruct(&nd, &cfg).unwrap();
        assert!((rec.get(0, 0) - c(1.0)).norm() < 1e-6);
    }

    #[test]
    fn zero_data_gives_zero_table() {
        let nd = NDPerturbation::zeros(5);
        let cfg = ReconConfig { mmax: 5, jmax: 2, kmax: 2, alpha: 1e-8, noise_sigma: 0.0 };
        assert!(reconstruct(&nd, &cfg).unwrap().is_zero());
    }

    #[test]
    fn window_too_small_rejected() {
        let nd = NDPerturbation::zeros(5);
        let cfg = ReconConfig { mmax: 6, jmax: 1, kmax: 1, alpha: 0.0, noise_sigma: 0.0 };
        assert!(reconstruct(&nd, &cfg).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let nd = NDPerturbation::zeros(4);
        let a = add_noise(&nd, 1e-3, 9).unwrap();
        let b = add_noise(&nd, 1e-3, 9).unwrap();
        let d = add_noise(&nd, 1e-3, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
        assert!(add_noise(&nd, -1.0, 0).is_err());
    }

    #[test]
    fn condition_numbers_finite() {
        let cfg = ReconConfig { mmax: 30, jmax: 3, kmax: 3, alpha: 0.0, noise_sigma: 0.0 };
        let conds = block_conditions(&cfg).unwrap();
        assert_eq!(conds.len(), 7);
        assert!(conds.iter().all(|&(_, k)| k.is_finite() && k >= 1.0));
    }
}
