//! Brute-force check of the closed-form entries.
//!
//! At unit conductivity the Neumann problem with data `f_m` has the harmonic
//! solution `u_m = r^{|m|}e^{imθ}/(|m|√(2π))`, so
//! `a^{j,k}_{m,n} = −∫_D ψ_{j,k} ∇u_m·conj(∇u_n) dV` can be evaluated by
//! quadrature without any of the algebra behind [`crate::frechet::entry`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::frechet::entry;
use crate::quadrature::DiskGrid;
use crate::zernike::{basis_eval, ZernikeIndex};
use crate::{Error, Result};

/// Harmonic extension of the boundary mode `f_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarmonicMode {
    m: i64,
}

impl HarmonicMode {
    pub fn new(m: i64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("mode m = 0 has no mean-free Neumann data"));
        }
        Ok(HarmonicMode { m })
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    /// `u_m(r, θ)`.
    pub fn value(&self, r: f64, theta: f64) -> Complex64 {
        let ma = self.m.unsigned_abs() as f64;
        Complex64::from_polar(r.powi(ma as i32) / (ma * (2.0 * PI).sqrt()), self.m as f64 * theta)
    }

    /// `(∂_r u_m, r^{−1}∂_θ u_m)`.
    pub fn gradient(&self, r: f64, theta: f64) -> [Complex64; 2] {
        let ma = self.m.unsigned_abs() as i32;
        let radial = Complex64::from_polar(r.powi(ma - 1) / (2.0 * PI).sqrt(), self.m as f64 * theta);
        let sign = self.m.signum() as f64;
        [radial, Complex64::new(0.0, sign) * radial]
    }
}

/// Polar gradient components of `u_m` at `(r, θ)`.
pub fn harmonic_gradient(m: i64, r: f64, theta: f64) -> Result<[Complex64; 2]> {
    let mode = HarmonicMode::new(m)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("radius {r} outside [0, 1]")));
    }
    Ok(mode.gradient(r, theta))
}

fn integrand_degree(j: i64, k: usize, m: i64, n: i64) -> usize {
    j.unsigned_abs() as usize + 2 * k + m.unsigned_abs() as usize + n.unsigned_abs() as usize
}

fn max_frequency(j: i64, m: i64, n: i64) -> usize {
    (j.unsigned_abs() + m.unsigned_abs() + n.unsigned_abs()) as usize
}

/// Grid with `⌈(degree+2)/2⌉ + 4` radial nodes and enough angles for the
/// frequency `|j|+|m|+|n|`.
pub fn oracle_grid(degree: usize, max_freq: usize) -> DiskGrid {
    DiskGrid::new((degree + 2).div_ceil(2) + 4, max_freq + 1).expect("nonzero node counts")
}

fn check_resolution(grid: &DiskGrid, degree: usize, max_freq: usize) -> Result<()> {
    // the radial integrand is a polynomial of degree ≤ degree/2 in s = r²
    if 2 * grid.n_radial() - 1 < degree.div_ceil(2) || grid.n_theta() <= max_freq {
        return Err(Error::UnderResolved(format!(
            "integrand degree {degree}, frequency {max_freq} on a {} x {} grid",
            grid.n_radial(),
            grid.n_theta()
        )));
    }
    Ok(())
}

/// `−∫_D ψ_{j,k} (∂_r u_m·conj ∂_r u_n + r^{−2}∂_θ u_m·conj ∂_θ u_n) dV`.
pub fn entry_quadrature(j: i64, k: usize, m: i64, n: i64, grid: &DiskGrid) -> Result<Complex64> {
    let (um, un) = (HarmonicMode::new(m)?, HarmonicMode::new(n)?);
    check_resolution(grid, integrand_degree(j, k, m, n), max_frequency(j, m, n))?;
    let idx = ZernikeIndex::new(j, k);
    let mut err = None;
    let total = grid.integrate(|r, theta| {
        let psi = basis_eval(idx, r, theta).unwrap_or_else(|e| {
            err.get_or_insert(e);
            Complex64::new(0.0, 0.0)
        });
        let [gr_m, gt_m] = um.gradient(r, theta);
        let [gr_n, gt_n] = un.gradient(r, theta);
        psi * (gr_m * gr_n.conj() + gt_m * gt_n.conj())
    });
    match err {
        Some(e) => Err(e),
        None => Ok(-total),
    }
}

/// Index box `|j| ≤ j_max`, `k ≤ k_max`, `0 < |m|, |n| ≤ m_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleBox {
    pub j_max: usize,
    pub k_max: usize,
    pub m_max: usize,
}

impl Default for OracleBox {
    fn default() -> Self {
        OracleBox {
            j_max: 6,
            k_max: 6,
            m_max: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    #[serde(rename = "box")]
    pub index_box: OracleBox,
    pub checked: u64,
    pub tol: f64,
    pub zero_tol: f64,
    /// Largest `|entry − quadrature|` over the box.
    pub max_discrepancy: f64,
    pub worst_at: [i64; 4],
    /// Largest `|quadrature|` where the closed form vanishes.
    pub max_structural_zero: f64,
    /// Largest `|q(j,k,m,n) − conj q(−j,k,n,m)|`.
    pub max_hermitian_defect: f64,
    pub pass: bool,
}

/// Compare closed form and quadrature over the whole box on one shared grid.
pub fn max_discrepancy(index_box: OracleBox, tol: f64, zero_tol: f64) -> Result<OracleReport> {
    let OracleBox { j_max, k_max, m_max } = index_box;
    if m_max == 0 {
        return Err(Error::invalid("oracle box needs m_max >= 1"));
    }
    let degree = j_max + 2 * k_max + 2 * m_max;
    let grid = oracle_grid(degree, j_max + 2 * m_max);
    check_resolution(&grid, degree, j_max + 2 * m_max)?;

    // precompute ψ and the gradients on the grid
    let points: Vec<(f64, f64)> = grid.points().collect();
    let weights: Vec<f64> = grid
        .radial_weights()
        .iter()
        .flat_map(|&w| std::iter::repeat_n(w * grid.angular_weight(), grid.n_theta()))
        .collect();
    let (ji, mi) = (j_max as i64, m_max as i64);
    let modes: Vec<i64> = (-mi..=mi).filter(|&m| m != 0).collect();
    let grads: Vec<Vec<[Complex64; 2]>> = modes
        .iter()
        .map(|&m| {
            let mode = HarmonicMode::new(m).expect("nonzero");
            points.iter().map(|&(r, t)| mode.gradient(r, t)).collect()
        })
        .collect();
    let mode_pos = |m: i64| if m < 0 { (m + mi) as usize } else { (m + mi - 1) as usize };

    let basis: Vec<((i64, usize), Vec<Complex64>)> = (-ji..=ji)
        .flat_map(|j| (0..=k_max).map(move |k| (j, k)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(j, k)| {
            let idx = ZernikeIndex::new(j, k);
            let vals = points
                .iter()
                .map(|&(r, t)| basis_eval(idx, r, t))
                .collect::<Result<Vec<_>>>()?;
            Ok(((j, k), vals))
        })
        .collect::<Result<_>>()?;

    let quad = |psi: &[Complex64], m: i64, n: i64| -> Complex64 {
        let (gm, gn) = (&grads[mode_pos(m)], &grads[mode_pos(n)]);
        let mut total = Complex64::new(0.0, 0.0);
        for q in 0..points.len() {
            let dot = gm[q][0] * gn[q][0].conj() + gm[q][1] * gn[q][1].conj();
            total += psi[q] * dot * weights[q];
        }
        -total
    };
    let find = |j: i64, k: usize| &basis[((j + ji) as usize) * (k_max + 1) + k].1;

    #[derive(Clone, Copy)]
    struct Acc {
        checked: u64,
        max: f64,
        at: [i64; 4],
        zero: f64,
        herm: f64,
    }
    let acc = basis
        .par_iter()
        .map(|&((j, k), ref psi)| {
            let mut a = Acc { checked: 0, max: 0.0, at: [j, k as i64, 0, 0], zero: 0.0, herm: 0.0 };
            let mirror = find(-j, k);
            for &m in &modes {
                for &n in &modes {
                    let q = quad(psi, m, n);
                    let exact = entry(j, k, m, n);
                    let d = (q - exact).norm();
                    a.checked += 1;
                    if d > a.max {
                        a.max = d;
                        a.at = [j, k as i64, m, n];
                    }
                    if exact == 0.0 {
                        a.zero = a.zero.max(q.norm());
                    }
                    a.herm = a.herm.max((q - quad(mirror, n, m).conj()).norm());
                }
            }
            a
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|a, b| Acc {
            checked: a.checked + b.checked,
            max: a.max.max(b.max),
            at: if b.max > a.max { b.at } else { a.at },
            zero: a.zero.max(b.zero),
            herm: a.herm.max(b.herm),
        })
        .expect("box is nonempty");

    Ok(OracleReport {
        index_box,
        checked: acc.checked,
        tol,
        zero_tol,
        max_discrepancy: acc.max,
        worst_at: acc.at,
        max_structural_zero: acc.zero,
        max_hermitian_defect: acc.herm,
        pass: acc.max <= tol && acc.zero <= zero_tol && acc.herm <= zero_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FRAC_1_SQRT_PI;

    fn grid_for(j: i64, k: usize, m: i64, n: i64) -> DiskGrid {
        oracle_grid(integrand_degree(j, k, m, n), max_frequency(j, m, n))
    }

    #[test]
    fn gradient_examples() {
        let s = 1.0 / (2.0 * PI).sqrt();
        let g = harmonic_gradient(1, 1.0, 0.0).unwrap();
        assert!((g[0] - Complex64::new(s, 0.0)).norm() < 1e-16);
        assert!((g[1] - Complex64::new(0.0, s)).norm() < 1e-16);
        let g = harmonic_gradient(2, 0.0, 0.3).unwrap();
        assert_eq!(g, [Complex64::new(0.0, 0.0); 2]);
        assert!(harmonic_gradient(0, 0.5, 0.0).is_err());
        assert!(harmonic_gradient(1, 1.5, 0.0).is_err());
    }

    #[test]
    fn neumann_trace_is_boundary_mode() {
        for m in [-4, -1, 1, 3, 7] {
            for t in 0..16 {
                let theta = 0.4 * t as f64;
                let g = harmonic_gradient(m, 1.0, theta).unwrap();
                let f = Complex64::from_polar(1.0 / (2.0 * PI).sqrt(), m as f64 * theta);
                assert!((g[0] - f).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mode = HarmonicMode::new(-3).unwrap();
        let (r, t, h) = (0.6, 1.1, 1e-6);
        let dr = (mode.value(r + h, t) - mode.value(r - h, t)) / (2.0 * h);
        let dt = (mode.value(r, t + h) - mode.value(r, t - h)) / (2.0 * h * r);
        let g = mode.gradient(r, t);
        assert!((g[0] - dr).norm() < 1e-8);
        assert!((g[1] - dt).norm() < 1e-8);
    }

    #[test]
    fn quadrature_examples() {
        let q = entry_quadrature(0, 0, 1, 1, &grid_for(0, 0, 1, 1)).unwrap();
        assert!((q - Complex64::new(-FRAC_1_SQRT_PI, 0.0)).norm() < 1e-10);
        let q = entry_quadrature(1, 0, 1, 3, &grid_for(1, 0, 1, 3)).unwrap();
        assert!(q.norm() < 1e-12);
        let q = entry_quadrature(2, 1, 3, 5, &grid_for(2, 1, 3, 5)).unwrap();
        assert!((q.re + 0.084_104_417_400_672).abs() < 1e-12 && q.im.abs() < 1e-12, "{q}");
        assert!((q.re - entry(2, 1, 3, 5)).abs() < 1e-9);
    }

    #[test]
    fn under_resolved_grid_rejected() {
        let g = DiskGrid::new(2, 4).unwrap();
        assert!(matches!(entry_quadrature(3, 4, 5, 8, &g), Err(Error::UnderResolved(_))));
        assert!(entry_quadrature(0, 0, 0, 1, &grid_for(0, 0, 1, 1)).is_err());
    }

    #[test]
    fn small_box_agrees() {
        let b = OracleBox { j_max: 3, k_max: 3, m_max: 5 };
        let rep = max_discrepancy(b, 1e-9, 1e-12).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.checked, 7 * 4 * 100);
    }

    #[test]
    fn hermitian_pairing() {
        let g = oracle_grid(30, 20);
        for &(j, k, m, n) in &[(2i64, 1usize, 3i64, 5i64), (-1, 0, 4, 3), (3, 2, -7, -4)] {
            let a = entry_quadrature(j, k, m, n, &g).unwrap();
            let b = entry_quadrature(-j, k, n, m, &g).unwrap();
            assert!((a - b.conj()).norm() < 1e-12);
        }
    }
}
