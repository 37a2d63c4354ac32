//! Eigen-scale of `Λ(1)` on the disk and the finite-rank embedding check.
//!
//! On the unit disk `Λ(1) f_m = f_m/|m|`, so the eigenvalues are `1/|m|`,
//! each twice. They are listed in the order `m = 1, −1, 2, −2, …`. With
//! `φ_i^ε = λ_i^ε φ_i`, the weighted inner product
//! `⟨g, h⟩_ε = Σ λ_i^{−2ε} g_i conj(h_i)` makes `{φ_i^ε}` orthonormal.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// The first `N` eigenpairs of `Λ(1)`, ordered by decreasing eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenScale {
    labels: Vec<i64>,
    values: Vec<f64>,
}

/// Fourier label of the `i`-th eigenfunction (0-based): `1, −1, 2, −2, …`.
pub fn mode_label(i: usize) -> i64 {
    let m = (i / 2 + 1) as i64;
    if i.is_multiple_of(2) {
        m
    } else {
        -m
    }
}

pub fn nd_eigenvalues(n: usize) -> Result<EigenScale> {
    if n == 0 {
        return Err(Error::invalid("eigen-scale needs N >= 1"));
    }
    let labels: Vec<i64> = (0..n).map(mode_label).collect();
    let values = labels.iter().map(|m| 1.0 / m.unsigned_abs() as f64).collect();
    Ok(EigenScale { labels, values })
}

impl EigenScale {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// `λ_i^{2ε}` for every slot.
    pub fn powers(&self, two_eps: f64) -> Vec<f64> {
        self.values.iter().map(|l| l.powf(two_eps)).collect()
    }
}

fn check_eps(eps: f64, lo: f64) -> Result<()> {
    if (lo..=0.5).contains(&eps) {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon {eps} outside [{lo}, 1/2]")))
    }
}

/// `⟨g, h⟩_ε = Σ λ_i^{−2ε} g_i conj(h_i)`.
pub fn h_eps_inner(scale: &EigenScale, g: &[Complex64], h: &[Complex64], eps: f64) -> Result<Complex64> {
    check_eps(eps, -0.5)?;
    if g.len() != h.len() || g.len() > scale.len() {
        return Err(Error::invalid(format!(
            "coefficient lengths {} and {} do not match (scale has {})",
            g.len(),
            h.len(),
            scale.len()
        )));
    }
    Ok(g.iter()
        .zip(h)
        .zip(scale.values())
        .map(|((g, h), l)| g * h.conj() * l.powf(-2.0 * eps))
        .sum())
}

/// Coefficients of `φ_i^ε`: `λ_i^ε` in slot `i`, zero elsewhere.
pub fn scaled_basis(scale: &EigenScale, i: usize, eps: f64) -> Result<Vec<Complex64>> {
    if i >= scale.len() {
        return Err(Error::invalid(format!("slot {i} outside scale of length {}", scale.len())));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); scale.len()];
    v[i] = Complex64::new(scale.values()[i].powf(eps), 0.0);
    Ok(v)
}

/// `error` against `bound = (λ_1λ_{M+1})^ε‖T‖_HS`. `strict_bound` is
/// `(λ_1λ_{M+1})^{2ε}‖T‖_HS`, which is smaller and not implied by the
/// estimate; it is reported for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbeddingCheck {
    pub error: f64,
    pub bound: f64,
    pub strict_bound: f64,
}

impl EmbeddingCheck {
    fn new(error: f64, w_first: f64, w_next: f64, hs: f64) -> Self {
        let scale = w_first * w_next;
        EmbeddingCheck {
            error,
            bound: scale.sqrt() * hs,
            strict_bound: scale * hs,
        }
    }

    pub fn holds(&self) -> bool {
        self.error <= self.bound
    }
}

/// Weights `λ_i^{2ε}` for a fixed size and `ε`, shared across many checks.
#[derive(Debug, Clone)]
pub struct EmbeddingWeights {
    eps: f64,
    weights: Vec<f64>,
}

impl EmbeddingWeights {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        check_eps(eps, 0.0)?;
        let scale = nd_eigenvalues(n)?;
        Ok(EmbeddingWeights {
            eps,
            weights: scale.powers(2.0 * eps),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn check_shape(&self, t: &DMatrix<Complex64>) -> Result<()> {
        let n = self.weights.len();
        if t.nrows() != n || t.ncols() != n {
            return Err(Error::invalid(format!(
                "matrix is {}x{}, weights expect {n}x{n}",
                t.nrows(),
                t.ncols()
            )));
        }
        Ok(())
    }

    /// Error and bound for every `M = 0, 1, …, N−1` (index `M`).
    ///
    /// The complement `{(i,j) : max(i,j) ≥ M}` is accumulated shell by shell
    /// from the outside in, so no subtraction is involved.
    pub fn sweep(&self, t: &DMatrix<Complex64>) -> Result<Vec<EmbeddingCheck>> {
        self.check_shape(t)?;
        let n = self.weights.len();
        let w = &self.weights;
        let total: f64 = t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut complement = vec![0.0; n + 1];
        for s in (0..n).rev() {
            // shell max(i, j) = s
            let mut shell = w[s] * w[s] * t[(s, s)].norm_sqr();
            for i in 0..s {
                shell += w[s] * w[i] * (t[(s, i)].norm_sqr() + t[(i, s)].norm_sqr());
            }
            complement[s] = complement[s + 1] + shell;
        }
        Ok((0..n)
            .map(|m| EmbeddingCheck::new(complement[m].sqrt(), w[0], w[m], total))
            .collect())
    }

    pub fn check(&self, t: &DMatrix<Complex64>, m: usize) -> Result<EmbeddingCheck> {
        self.check_shape(t)?;
        if m >= self.weights.len() {
            return Err(Error::invalid(format!(
                "truncation M={m} must be below N={}",
                self.weights.len()
            )));
        }
        let w = &self.weights;
        let mut err2 = 0.0;
        for j in 0..t.ncols() {
            for i in 0..t.nrows() {
                if i >= m || j >= m {
                    err2 += w[i] * w[j] * t[(i, j)].norm_sqr();
                }
            }
        }
        let hs: f64 = t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Ok(EmbeddingCheck::new(err2.sqrt(), w[0], w[m], hs))
    }
}

/// `error² = Σ_{(i,j) ∉ [1..M]²} (λ_iλ_j)^{2ε}|T_ij|²` against
/// `bound² = (λ_1λ_{M+1})^{2ε}‖T‖²_HS`. `M` counts retained eigenpairs.
pub fn embedding_error_check(t: &DMatrix<Complex64>, m: usize, eps: f64) -> Result<EmbeddingCheck> {
    if t.nrows() != t.ncols() {
        return Err(Error::invalid("embedding check needs a square matrix"));
    }
    EmbeddingWeights::new(t.nrows(), eps)?.check(t, m)
}

/// Square matrix with i.i.d. standard complex Gaussian entries
/// (`E|T_ij|² = 1`) from a seeded stream.
pub fn random_matrix(n: usize, seed: u64, stream: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(s * re, s * im)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingSweep {
    pub n: usize,
    pub m_values: Vec<usize>,
    pub eps_values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for EmbeddingSweep {
    fn default() -> Self {
        EmbeddingSweep {
            n: 50,
            m_values: (1..50).collect(),
            eps_values: vec![0.1, 0.25, 0.5],
            trials: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    #[serde(flatten)]
    pub sweep: EmbeddingSweep,
    pub checked: u64,
    pub worst_ratio: f64,
    pub worst_trial: usize,
    pub worst_m: usize,
    pub worst_eps: f64,
    /// Largest `error / strict_bound` seen (informational).
    pub worst_strict_ratio: f64,
    /// Every trial had error nonincreasing in `M`.
    pub monotone: bool,
    pub pass: bool,
}

/// Run `trials` random matrices; trial `t` uses stream `t` of `seed`.
pub fn run_embedding_sweep(sweep: &EmbeddingSweep) -> Result<EmbeddingReport> {
    if sweep.m_values.iter().any(|&m| m >= sweep.n) {
        return Err(Error::invalid(format!("every M must be below N={}", sweep.n)));
    }
    let weights = sweep
        .eps_values
        .iter()
        .map(|&e| EmbeddingWeights::new(sweep.n, e))
        .collect::<Result<Vec<_>>>()?;

    struct Worst {
        checked: u64,
        ratio: f64,
        trial: usize,
        m: usize,
        eps: f64,
        strict: f64,
        monotone: bool,
    }
    let parts: Vec<Worst> = (0..sweep.trials)
        .into_par_iter()
        .map(|trial| {
            let t = random_matrix(sweep.n, sweep.seed, trial as u64);
            let mut w = Worst { checked: 0, ratio: f64::NEG_INFINITY, trial, m: 0, eps: 0.0, strict: 0.0, monotone: true };
            for ew in &weights {
                let all = ew.sweep(&t).expect("shape matches");
                w.monotone &= all.windows(2).all(|p| p[1].error <= p[0].error);
                for &m in &sweep.m_values {
                    let c = all[m];
                    let ratio = if c.bound > 0.0 { c.error / c.bound } else { 0.0 };
                    w.checked += 1;
                    if c.strict_bound > 0.0 {
                        w.strict = w.strict.max(c.error / c.strict_bound);
                    }
                    if ratio > w.ratio || ratio.is_nan() {
                        w.ratio = ratio;
                        w.m = m;
                        w.eps = ew.eps();
                    }
                }
            }
            w
        })
        .collect();
    let mut checked = 0;
    let mut monotone = true;
    let mut strict: f64 = 0.0;
    let mut best: Option<&Worst> = None;
    for p in &parts {
        checked += p.checked;
        monotone &= p.monotone;
        strict = strict.max(p.strict);
        if best.is_none_or(|b| p.ratio > b.ratio || p.ratio.is_nan()) {
            best = Some(p);
        }
    }
    let (worst_ratio, worst_trial, worst_m, worst_eps) =
        best.map_or((0.0, 0, 0, 0.0), |b| (b.ratio, b.trial, b.m, b.eps));
    Ok(EmbeddingReport {
        sweep: sweep.clone(),
        checked,
        worst_ratio,
        worst_trial,
        worst_m,
        worst_eps,
        worst_strict_ratio: strict,
        monotone,
        pass: worst_ratio <= 1.0 && monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn eigenvalue_examples() {
        let s = nd_eigenvalues(4).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0, 0.5, 0.5]);
        assert_eq!(s.labels(), &[1, -1, 2, -2]);
        assert_eq!(nd_eigenvalues(1).unwrap().values(), &[1.0]);
        assert!(nd_eigenvalues(0).is_err());
        let big = nd_eigenvalues(101).unwrap();
        assert!(big.values().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eigenvalue_matches_harmonic_trace() {
        // u_m at r = 1 is f_m/|m|, and its normal derivative is f_m
        use crate::oracle::HarmonicMode;
        let s = nd_eigenvalues(8).unwrap();
        for (&m, &lambda) in s.labels().iter().zip(s.values()) {
            let mode = HarmonicMode::new(m).unwrap();
            let theta = 0.7;
            let trace = mode.value(1.0, theta);
            let flux = mode.gradient(1.0, theta)[0];
            assert!((trace - flux * lambda).norm() < 1e-15);
        }
    }

    #[test]
    fn inner_product_examples() {
        let s = nd_eigenvalues(5).unwrap();
        let e = |i: usize| {
            let mut v = vec![c(0.0); 5];
            v[i] = c(1.0);
            v
        };
        assert_eq!(h_eps_inner(&s, &e(0), &e(0), 0.0).unwrap(), c(1.0));
        assert!((h_eps_inner(&s, &e(2), &e(2), 0.5).unwrap() - c(2.0)).norm() < 1e-15);
        assert!(h_eps_inner(&s, &e(0), &[c(1.0)], 0.0).is_err());
        assert!(h_eps_inner(&s, &e(0), &e(0), 0.7).is_err());
    }

    #[test]
    fn scaled_basis_is_orthonormal() {
        let s = nd_eigenvalues(12).unwrap();
        for eps in [-0.5, -0.2, 0.0, 0.1, 0.25, 0.5] {
            for i in 0..12 {
                for j in 0..12 {
                    let g = scaled_basis(&s, i, eps).unwrap();
                    let h = scaled_basis(&s, j, eps).unwrap();
                    let ip = h_eps_inner(&s, &g, &h, eps).unwrap();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - c(expect)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn embedding_examples() {
        let z = DMatrix::from_element(6, 6, c(0.0));
        assert_eq!(
            embedding_error_check(&z, 2, 0.25).unwrap(),
            EmbeddingCheck { error: 0.0, bound: 0.0, strict_bound: 0.0 }
        );
        let mut e11 = z.clone();
        e11[(0, 0)] = c(1.0);
        assert_eq!(embedding_error_check(&e11, 1, 0.5).unwrap().error, 0.0);
        assert!(embedding_error_check(&z, 6, 0.25).is_err());
        assert!(embedding_error_check(&z, 2, 0.6).is_err());
        let t = random_matrix(50, 7, 0);
        let chk = embedding_error_check(&t, 10, 0.25).unwrap();
        let hs = t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // λ_11 = 1/6
        assert!((chk.bound - (1.0f64 / 6.0).powf(0.25) * hs).abs() < 1e-12 * hs);
        assert!((chk.strict_bound - (1.0f64 / 6.0).sqrt() * hs).abs() < 1e-12 * hs);
        assert!(chk.holds());
        assert!(chk.error <= chk.strict_bound);
    }

    #[test]
    fn strict_scale_is_not_a_bound() {
        // all mass on (1, M+1): error = (λ_1λ_{M+1})^ε |T| exactly
        let (n, m, eps) = (8, 3, 0.25);
        let mut t = DMatrix::from_element(n, n, c(0.0));
        t[(0, m)] = c(1.0);
        let chk = embedding_error_check(&t, m, eps).unwrap();
        assert!((chk.error - chk.bound).abs() < 1e-15);
        assert!(chk.error > chk.strict_bound);
    }

    #[test]
    fn zero_eps_is_raw_complement_mass() {
        let t = random_matrix(9, 3, 1);
        let m = 4;
        let raw: f64 = (0..9)
            .flat_map(|i| (0..9).map(move |j| (i, j)))
            .filter(|&(i, j)| i >= m || j >= m)
            .map(|(i, j)| t[(i, j)].norm_sqr())
            .sum();
        let chk = embedding_error_check(&t, m, 0.0).unwrap();
        assert!((chk.error * chk.error - raw).abs() < 1e-12 * raw);
    }

    #[test]
    fn shell_sweep_matches_direct() {
        let t = random_matrix(20, 11, 5);
        let w = EmbeddingWeights::new(20, 0.3).unwrap();
        let all = w.sweep(&t).unwrap();
        for (m, s) in all.iter().enumerate() {
            let d = w.check(&t, m).unwrap();
            assert!((s.error - d.error).abs() <= 1e-12 * d.error.max(1e-300));
            assert_eq!(s.bound, d.bound);
        }
    }

    #[test]
    fn small_sweep_passes_and_is_deterministic() {
        let sw = EmbeddingSweep { trials: 20, ..EmbeddingSweep::default() };
        let a = run_embedding_sweep(&sw).unwrap();
        let b = run_embedding_sweep(&sw).unwrap();
        assert!(a.pass);
        assert_eq!(a.checked, 20 * 3 * 49);
        assert_eq!(a.worst_ratio, b.worst_ratio);
        assert!(a.worst_ratio > 0.0 && a.worst_ratio <= 1.0);
    }
}
