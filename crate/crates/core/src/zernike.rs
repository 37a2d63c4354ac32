//! Orthonormal Zernike basis on the unit disk.
//!
//! `ψ_{j,k}(r,θ) = √((|j|+2k+1)/π) · R^{|j|}_{|j|+2k}(r) · e^{ijθ}` with the
//! radial polynomial
//! `R^{|j|}_{|j|+2k}(r) = Σ_{i=0}^{k} (−1)^i C(|j|+2k−i, i) C(|j|+2k−2i, k−i) r^{|j|+2k−2i}`.
//!
//! The alternating sum loses roughly `log10(max term)` digits near `r = 1`
//! (about nine digits at degree 24), so [`radial_eval`] uses the equivalent
//! Jacobi form `r^{|j|} P_k^{(0,|j|)}(2r² − 1)` and its stable three-term
//! recurrence. The explicit sum is kept in [`radial_eval_explicit`] and
//! [`radial_coefficients`] as an independent reference.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quadrature::DiskGrid;
use crate::special::ln_gamma;
use crate::{Error, Result};

/// Degree up to which [`radial_eval_explicit`] uses exact integer binomials.
/// Above it the binomials are taken from log-gamma.
pub const EXACT_BINOMIAL_MAX_DEGREE: usize = 60;

/// Angular frequency `j` and radial order `k` of `ψ_{j,k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZernikeIndex {
    pub j: i64,
    pub k: usize,
}

impl ZernikeIndex {
    pub fn new(j: i64, k: usize) -> Self {
        ZernikeIndex { j, k }
    }

    /// Polynomial degree `|j| + 2k`.
    pub fn degree(&self) -> usize {
        self.j.unsigned_abs() as usize + 2 * self.k
    }

    pub fn normalization(&self) -> f64 {
        ((self.degree() + 1) as f64 / std::f64::consts::PI).sqrt()
    }
}

fn check_radius(r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::invalid(format!("radius {r} outside [0, 1]")))
    }
}

/// `R^{|j|}_{|j|+2k}(r)` for `r ∈ [0, 1]`.
pub fn radial_eval(j: i64, k: usize, r: f64) -> Result<f64> {
    check_radius(r)?;
    let b = j.unsigned_abs() as f64;
    let x = 2.0 * r * r - 1.0;
    let rb = r.powi(j.unsigned_abs() as i32);
    if k == 0 {
        return Ok(rb);
    }
    let mut p_prev = 1.0;
    let mut p = 1.0 + (b + 2.0) * (x - 1.0) / 2.0;
    for n in 2..=k {
        let n = n as f64;
        let s = 2.0 * n + b;
        let a1 = 2.0 * n * (n + b) * (s - 2.0);
        let a2 = (s - 1.0) * (-b * b);
        let a3 = (s - 2.0) * (s - 1.0) * s;
        let a4 = 2.0 * (n - 1.0) * (n + b - 1.0) * s;
        let next = ((a2 + a3 * x) * p - a4 * p_prev) / a1;
        p_prev = p;
        p = next;
    }
    Ok(rb * p)
}

/// Exact integer coefficients of the explicit radial sum as
/// `(coefficient, power of r)`, `i = 0..=k` ascending.
///
/// Only available up to [`EXACT_BINOMIAL_MAX_DEGREE`].
pub fn radial_coefficients(j: i64, k: usize) -> Result<Vec<(i128, usize)>> {
    let n = j.unsigned_abs() as usize + 2 * k;
    if n > EXACT_BINOMIAL_MAX_DEGREE {
        return Err(Error::invalid(format!(
            "exact coefficients limited to degree {EXACT_BINOMIAL_MAX_DEGREE}, got {n}"
        )));
    }
    Ok((0..=k)
        .map(|i| {
            let c = binomial(n - i, i) * binomial(n - 2 * i, k - i);
            let sign = if i % 2 == 0 { 1 } else { -1 };
            (sign * c, n - 2 * i)
        })
        .collect())
}

fn binomial(n: usize, k: usize) -> i128 {
    let k = k.min(n - k);
    let mut c: i128 = 1;
    for i in 0..k {
        c = c * (n - i) as i128 / (i + 1) as i128;
    }
    c
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// The explicit alternating binomial sum, accumulated in ascending `i`.
///
/// Exact integer binomials up to degree 60, log-binomials above. Accurate
/// only where the terms do not cancel heavily; see the module docs.
pub fn radial_eval_explicit(j: i64, k: usize, r: f64) -> Result<f64> {
    check_radius(r)?;
    let n = j.unsigned_abs() as usize + 2 * k;
    if n <= EXACT_BINOMIAL_MAX_DEGREE {
        return Ok(radial_coefficients(j, k)?
            .into_iter()
            .map(|(c, p)| c as f64 * r.powi(p as i32))
            .sum());
    }
    let mut sum = 0.0;
    for i in 0..=k {
        let p = n - 2 * i;
        let term = if p == 0 {
            (ln_binomial(n - i, i) + ln_binomial(n - 2 * i, k - i)).exp()
        } else if r == 0.0 {
            0.0
        } else {
            (ln_binomial(n - i, i) + ln_binomial(n - 2 * i, k - i) + p as f64 * r.ln()).exp()
        };
        sum += if i % 2 == 0 { term } else { -term };
    }
    Ok(sum)
}

/// `ψ_{j,k}(r, θ)`.
pub fn basis_eval(idx: ZernikeIndex, r: f64, theta: f64) -> Result<Complex64> {
    let radial = idx.normalization() * radial_eval(idx.j, idx.k, r)?;
    Ok(radial * angular(idx.j, theta))
}

/// `e^{ijθ}`, with negative `j` formed as an exact conjugate.
pub(crate) fn angular(j: i64, theta: f64) -> Complex64 {
    let phase = j.unsigned_abs() as f64 * theta;
    let z = Complex64::new(phase.cos(), phase.sin());
    if j < 0 {
        z.conj()
    } else {
        z
    }
}

/// Truncated Zernike coefficient table `{c_{j,k}}` for `|j| ≤ jmax`,
/// `k ≤ kmax`, stored j-major ascending with `k` ascending inside a block.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPerturbation {
    jmax: usize,
    kmax: usize,
    blocks: Vec<Vec<Complex64>>,
}

impl SpectralPerturbation {
    pub fn zeros(jmax: usize, kmax: usize) -> Self {
        SpectralPerturbation {
            jmax,
            kmax,
            blocks: vec![vec![Complex64::new(0.0, 0.0); kmax + 1]; 2 * jmax + 1],
        }
    }

    pub fn from_fn<F>(jmax: usize, kmax: usize, mut f: F) -> Self
    where
        F: FnMut(i64, usize) -> Complex64,
    {
        let mut table = Self::zeros(jmax, kmax);
        for j in table.frequencies() {
            for k in 0..=kmax {
                table.blocks[(j + jmax as i64) as usize][k] = f(j, k);
            }
        }
        table
    }

    /// Table with a single unit coefficient at `idx`.
    pub fn unit(jmax: usize, kmax: usize, idx: ZernikeIndex) -> Result<Self> {
        let mut table = Self::zeros(jmax, kmax);
        table.set(idx.j, idx.k, Complex64::new(1.0, 0.0))?;
        Ok(table)
    }

    /// Build from explicit blocks keyed by `j`; validates shape and finiteness.
    pub fn from_blocks(
        jmax: usize,
        kmax: usize,
        blocks: BTreeMap<i64, Vec<Complex64>>,
    ) -> Result<Self> {
        let mut table = Self::zeros(jmax, kmax);
        for (j, block) in blocks {
            if j.unsigned_abs() as usize > jmax {
                return Err(Error::invalid(format!("block j={j} outside |j| <= {jmax}")));
            }
            if block.len() != kmax + 1 {
                return Err(Error::invalid(format!(
                    "block j={j} has {} entries, expected {}",
                    block.len(),
                    kmax + 1
                )));
            }
            if block.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::invalid(format!("block j={j} has non-finite entries")));
            }
            table.blocks[(j + jmax as i64) as usize] = block;
        }
        Ok(table)
    }

    pub fn jmax(&self) -> usize {
        self.jmax
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// `−jmax..=jmax`
    pub fn frequencies(&self) -> impl Iterator<Item = i64> {
        let jmax = self.jmax as i64;
        -jmax..=jmax
    }

    /// The vector `c⃗^j = [c_{j,0}, …, c_{j,kmax}]`; all zeros outside the table.
    pub fn block(&self, j: i64) -> Option<&[Complex64]> {
        if j.unsigned_abs() as usize > self.jmax {
            return None;
        }
        Some(&self.blocks[(j + self.jmax as i64) as usize])
    }

    pub fn get(&self, j: i64, k: usize) -> Complex64 {
        self.block(j)
            .and_then(|b| b.get(k).copied())
            .unwrap_or_default()
    }

    pub fn set(&mut self, j: i64, k: usize, value: Complex64) -> Result<()> {
        if j.unsigned_abs() as usize > self.jmax || k > self.kmax {
            return Err(Error::invalid(format!(
                "index (j={j}, k={k}) outside table jmax={}, kmax={}",
                self.jmax, self.kmax
            )));
        }
        self.blocks[(j + self.jmax as i64) as usize][k] = value;
        Ok(())
    }

    /// All `(index, coefficient)` pairs in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (ZernikeIndex, Complex64)> + '_ {
        self.frequencies().zip(&self.blocks).flat_map(|(j, block)| {
            block
                .iter()
                .enumerate()
                .map(move |(k, &c)| (ZernikeIndex::new(j, k), c))
        })
    }

    /// `ℓ²` norm of the coefficients, equal to `‖η‖_{L²(D)}` of the truncation.
    pub fn norm(&self) -> f64 {
        self.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let jmax = self.jmax.max(other.jmax) as i64;
        let kmax = self.kmax.max(other.kmax);
        let mut worst: f64 = 0.0;
        for j in -jmax..=jmax {
            for k in 0..=kmax {
                worst = worst.max((self.get(j, k) - other.get(j, k)).norm());
            }
        }
        worst
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|(_, c)| c == Complex64::new(0.0, 0.0))
    }
}

#[derive(Serialize, Deserialize)]
struct BlockRepr {
    j: i64,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    jmax: usize,
    kmax: usize,
    blocks: Vec<BlockRepr>,
}

impl Serialize for SpectralPerturbation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableRepr {
            jmax: self.jmax,
            kmax: self.kmax,
            blocks: self
                .frequencies()
                .zip(&self.blocks)
                .map(|(j, b)| BlockRepr {
                    j,
                    re: b.iter().map(|c| c.re).collect(),
                    im: b.iter().map(|c| c.im).collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralPerturbation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = TableRepr::deserialize(d)?;
        let mut blocks = BTreeMap::new();
        for b in repr.blocks {
            if b.re.len() != b.im.len() {
                return Err(D::Error::custom(format!(
                    "block j={}: re and im lengths differ",
                    b.j
                )));
            }
            let block = b.re.iter().zip(&b.im).map(|(&re, &im)| Complex64::new(re, im));
            if blocks.insert(b.j, block.collect()).is_some() {
                return Err(D::Error::custom(format!("duplicate block j={}", b.j)));
            }
        }
        SpectralPerturbation::from_blocks(repr.jmax, repr.kmax, blocks).map_err(D::Error::custom)
    }
}

/// `c_{j,k} = ⟨η, ψ_{j,k}⟩_{L²(D)}` by tensor quadrature of samples taken at
/// `grid.points()`.
pub fn analyze(
    grid: &DiskGrid,
    samples: &[Complex64],
    jmax: usize,
    kmax: usize,
) -> Result<SpectralPerturbation> {
    if samples.len() != grid.len() {
        return Err(Error::invalid(format!(
            "expected {} samples, got {}",
            grid.len(),
            samples.len()
        )));
    }
    let degree = jmax + 2 * kmax;
    if grid.n_radial() < degree + 1 || grid.n_theta() < 2 * jmax + 2 {
        return Err(Error::UnderResolved(format!(
            "degree {degree} / frequency {jmax} needs >= {} radial and >= {} angular nodes, grid has {} x {}",
            degree + 1,
            2 * jmax + 2,
            grid.n_radial(),
            grid.n_theta()
        )));
    }
    let nt = grid.n_theta();
    let wt = grid.angular_weight();
    let mut table = SpectralPerturbation::zeros(jmax, kmax);
    let jmax_i = jmax as i64;
    for (q, (&r, &w)) in grid.radii().iter().zip(grid.radial_weights()).enumerate() {
        let ring = &samples[q * nt..(q + 1) * nt];
        for j in -jmax_i..=jmax_i {
            // angular Fourier coefficient of the ring
            let mut fj = Complex64::new(0.0, 0.0);
            for (t, &v) in ring.iter().enumerate() {
                fj += v * angular(j, grid.theta(t)).conj();
            }
            fj *= wt * w;
            for k in 0..=kmax {
                let idx = ZernikeIndex::new(j, k);
                let radial = idx.normalization() * radial_eval(j, k, r)?;
                table.blocks[(j + jmax_i) as usize][k] += fj * radial;
            }
        }
    }
    Ok(table)
}

/// `η(r, θ) = Σ c_{j,k} ψ_{j,k}(r, θ)` at each point.
pub fn synthesize(coeffs: &SpectralPerturbation, points: &[(f64, f64)]) -> Result<Vec<Complex64>> {
    points
        .iter()
        .map(|&(r, theta)| {
            let mut sum = Complex64::new(0.0, 0.0);
            for (idx, c) in coeffs.iter() {
                if c != Complex64::new(0.0, 0.0) {
                    sum += c * basis_eval(idx, r, theta)?;
                }
            }
            Ok(sum)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn radial_examples() {
        assert_eq!(radial_eval(0, 0, 0.7).unwrap(), 1.0);
        assert!((radial_eval(1, 0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((radial_eval(0, 1, 0.5).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn radial_rejects_outside_unit_interval() {
        assert!(radial_eval(0, 1, 1.0 + 1e-12).is_err());
        assert!(radial_eval(0, 1, -0.1).is_err());
        assert!(radial_eval(0, 1, f64::NAN).is_err());
        assert!(radial_eval_explicit(2, 1, 1.5).is_err());
    }

    #[test]
    fn recurrence_matches_exact_rational_values() {
        // R(i/20) = Σ c_p i^p 20^{n-p} / 20^n, evaluated in exact integers
        for j in -8..=8i64 {
            for k in 0..=6 {
                let coeffs = radial_coefficients(j, k).unwrap();
                let n = j.unsigned_abs() as u32 + 2 * k as u32;
                for i in 0..=20i128 {
                    let num: i128 = coeffs
                        .iter()
                        .map(|&(c, p)| c * i.pow(p as u32) * 20i128.pow(n - p as u32))
                        .sum();
                    let exact = num as f64 / 20f64.powi(n as i32);
                    let r = i as f64 / 20.0;
                    let a = radial_eval(j, k, r).unwrap();
                    assert!((a - exact).abs() < 1e-14, "j={j} k={k} r={r}: {a} vs {exact}");
                    // the monomial sum loses accuracy to cancellation
                    let scale: f64 = coeffs.iter().map(|&(c, p)| (c as f64).abs() * r.powi(p as i32)).sum();
                    let b = radial_eval_explicit(j, k, r).unwrap();
                    assert!((b - exact).abs() <= 8.0 * f64::EPSILON * scale.max(1.0));
                }
            }
        }
    }

    #[test]
    fn log_binomial_path_agrees_away_from_cancellation() {
        // degree 62: log-binomial branch; small r keeps the sum dominated by
        // its last terms so both routes are accurate.
        let (j, k) = (60, 1);
        for &r in &[0.05, 0.2] {
            let a = radial_eval(j, k, r).unwrap();
            let b = radial_eval_explicit(j, k, r).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs(), "r={r}");
        }
    }

    #[test]
    fn endpoint_normalization() {
        for j in -20..=20i64 {
            for k in 0..=20 {
                assert!((radial_eval(j, k, 1.0).unwrap() - 1.0).abs() < 1e-9, "j={j} k={k}");
                let exact: i128 = radial_coefficients(j, k).unwrap().iter().map(|c| c.0).sum();
                assert_eq!(exact, 1, "j={j} k={k}");
            }
        }
    }

    #[test]
    fn basis_examples() {
        let v = basis_eval(ZernikeIndex::new(0, 0), 0.3, 1.2).unwrap();
        assert!((v.re - 1.0 / PI.sqrt()).abs() < 1e-15 && v.im == 0.0);
        let v = basis_eval(ZernikeIndex::new(1, 0), 1.0, 0.0).unwrap();
        assert!((v.re - (2.0 / PI).sqrt()).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn conjugation_symmetry_is_exact() {
        for j in 1..=9i64 {
            for k in 0..=4 {
                for &(r, t) in &[(0.1, 0.3), (0.77, 2.9), (1.0, -4.0)] {
                    let p = basis_eval(ZernikeIndex::new(j, k), r, t).unwrap();
                    let m = basis_eval(ZernikeIndex::new(-j, k), r, t).unwrap();
                    assert_eq!(m, p.conj());
                }
            }
        }
    }

    #[test]
    fn orthonormality() {
        let grid = DiskGrid::for_degree(24, 8);
        let idx: Vec<_> = (-8..=8i64)
            .flat_map(|j| (0..=8).map(move |k| ZernikeIndex::new(j, k)))
            .collect();
        let values: Vec<Vec<Complex64>> = idx
            .iter()
            .map(|&i| grid.points().map(|(r, t)| basis_eval(i, r, t).unwrap()).collect())
            .collect();
        let (radial_w, nt, wt) = (grid.radial_weights(), grid.n_theta(), grid.angular_weight());
        let mut worst: f64 = 0.0;
        for a in 0..idx.len() {
            for b in a..idx.len() {
                let mut s = Complex64::new(0.0, 0.0);
                for (p, (x, y)) in values[a].iter().zip(&values[b]).enumerate() {
                    s += x * y.conj() * (radial_w[p / nt] * wt);
                }
                let expected = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - expected).norm());
            }
        }
        assert!(worst <= 1e-10, "worst orthonormality defect {worst}");
    }

    fn sample(grid: &DiskGrid, f: impl Fn(f64, f64) -> Complex64) -> Vec<Complex64> {
        grid.points().map(|(r, t)| f(r, t)).collect()
    }

    #[test]
    fn analyze_single_basis_function() {
        let (jmax, kmax) = (4, 3);
        let grid = DiskGrid::for_degree(jmax + 2 * kmax, jmax);
        let target = ZernikeIndex::new(2, 1);
        let s = sample(&grid, |r, t| basis_eval(target, r, t).unwrap());
        let table = analyze(&grid, &s, jmax, kmax).unwrap();
        for (idx, c) in table.iter() {
            let expected = if idx == target { 1.0 } else { 0.0 };
            assert!((c - expected).norm() <= 1e-10, "{idx:?}: {c}");
        }
    }

    #[test]
    fn analyze_zero() {
        let grid = DiskGrid::for_degree(6, 2);
        let s = vec![Complex64::new(0.0, 0.0); grid.len()];
        assert!(analyze(&grid, &s, 2, 2).unwrap().is_zero());
    }

    #[test]
    fn analyze_r_cos_theta() {
        let grid = DiskGrid::for_degree(5, 3);
        let s = sample(&grid, |r, t| Complex64::new(r * t.cos(), 0.0));
        let table = analyze(&grid, &s, 3, 1).unwrap();
        let expected = 0.5 * (PI / 2.0).sqrt();
        for (idx, c) in table.iter() {
            let e = if idx.k == 0 && idx.j.abs() == 1 { expected } else { 0.0 };
            assert!((c - e).norm() <= 1e-12, "{idx:?}: {c}");
        }
    }

    #[test]
    fn analyze_rejects_underresolved_grid() {
        let grid = DiskGrid::new(3, 20).unwrap();
        let s = vec![Complex64::new(0.0, 0.0); grid.len()];
        assert!(matches!(analyze(&grid, &s, 2, 2), Err(Error::UnderResolved(_))));
        let grid = DiskGrid::new(20, 5).unwrap();
        let s = vec![Complex64::new(0.0, 0.0); grid.len()];
        assert!(matches!(analyze(&grid, &s, 2, 2), Err(Error::UnderResolved(_))));
    }

    #[test]
    fn synthesize_examples() {
        let unit = SpectralPerturbation::unit(2, 2, ZernikeIndex::new(0, 0)).unwrap();
        let v = synthesize(&unit, &[(0.0, 0.0)]).unwrap();
        assert!((v[0].re - 1.0 / PI.sqrt()).abs() < 1e-15);
        let zero = SpectralPerturbation::zeros(3, 3);
        let v = synthesize(&zero, &[(0.2, 0.1), (1.0, 3.0)]).unwrap();
        assert!(v.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn table_json_roundtrip_and_validation() {
        let t = SpectralPerturbation::from_fn(1, 2, |j, k| Complex64::new(j as f64, k as f64 + 0.25));
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.starts_with(r#"{"jmax":1,"kmax":2,"blocks":[{"j":-1,"re":[-1.0,-1.0,-1.0]"#));
        let back: SpectralPerturbation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"jmax":1,"kmax":1,"blocks":[{"j":0,"re":[1.0],"im":[0.0]}]}"#;
        assert!(serde_json::from_str::<SpectralPerturbation>(bad).is_err());
        let bad = r#"{"jmax":1,"kmax":0,"blocks":[{"j":2,"re":[1.0],"im":[0.0]}]}"#;
        assert!(serde_json::from_str::<SpectralPerturbation>(bad).is_err());
    }

    #[test]
    fn set_outside_table_rejected() {
        let mut t = SpectralPerturbation::zeros(1, 1);
        assert!(t.set(2, 0, Complex64::new(1.0, 0.0)).is_err());
        assert!(t.set(0, 2, Complex64::new(1.0, 0.0)).is_err());
        assert_eq!(t.get(5, 5), Complex64::new(0.0, 0.0));
    }
}
