//! Gauss–Legendre rules and the tensor quadrature on the unit disk.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
///
/// Newton iteration on the three-term Legendre recurrence; exact for
/// polynomials of degree `2n − 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                dp = legendre_with_derivative(n, x).1;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for l in 2..=n {
        let lf = l as f64;
        let p2 = ((2.0 * lf - 1.0) * x * p1 - (lf - 1.0) * p0) / lf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product rule on the unit disk: Gauss–Legendre in `s = r²` times the
/// trapezoid rule in `θ`.
///
/// Radial weights carry the `r dr` Jacobian, so `Σ_q w_q · 2π = π`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskGrid {
    radii: Vec<f64>,
    weights: Vec<f64>,
    n_theta: usize,
}

impl DiskGrid {
    pub fn new(n_radial: usize, n_theta: usize) -> Result<Self> {
        if n_radial == 0 || n_theta == 0 {
            return Err(Error::invalid("disk grid needs at least one node in each direction"));
        }
        let (x, w) = gauss_legendre(n_radial);
        // s = (x+1)/2, ds = dx/2, r dr = ds/2
        let radii = x.iter().map(|&x| ((x + 1.0) / 2.0).sqrt()).collect();
        let weights = w.iter().map(|&w| w / 4.0).collect();
        Ok(DiskGrid {
            radii,
            weights,
            n_theta,
        })
    }

    /// Smallest grid for which analysis up to total degree `degree` and
    /// angular frequency `max_freq` is exact.
    pub fn for_degree(degree: usize, max_freq: usize) -> Self {
        DiskGrid::new(degree + 1, 2 * max_freq + 2).expect("nonzero node counts")
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn radial_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_radial(&self) -> usize {
        self.radii.len()
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn theta(&self, t: usize) -> f64 {
        2.0 * PI * t as f64 / self.n_theta as f64
    }

    pub fn angular_weight(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points `(r, θ)` in storage order: radial-major, θ ascending.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.radii
            .iter()
            .flat_map(move |&r| (0..self.n_theta).map(move |t| (r, self.theta(t))))
    }

    /// `∫_D f dV`, summed in ascending node order.
    pub fn integrate<F>(&self, mut f: F) -> Complex64
    where
        F: FnMut(f64, f64) -> Complex64,
    {
        let wt = self.angular_weight();
        let mut total = Complex64::new(0.0, 0.0);
        for (&r, &w) in self.radii.iter().zip(&self.weights) {
            let mut ring = Complex64::new(0.0, 0.0);
            for t in 0..self.n_theta {
                ring += f(r, self.theta(t));
            }
            total += ring * (w * wt);
        }
        total
    }

    /// Rebuild the grid from scattered samples, returning the grid and the
    /// values in storage order. Every grid node must appear exactly once.
    pub fn from_samples(samples: &[(f64, f64, Complex64)]) -> Result<(Self, Vec<Complex64>)> {
        let mut radii: Vec<f64> = samples.iter().map(|s| s.0).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        let n_radial = radii.len();
        if n_radial == 0 || !samples.len().is_multiple_of(n_radial) {
            return Err(Error::invalid("samples do not form a tensor disk grid"));
        }
        let grid = DiskGrid::new(n_radial, samples.len() / n_radial)?;
        let mut values = vec![None; grid.len()];
        for &(r, theta, v) in samples {
            let q = grid
                .radii
                .iter()
                .position(|&g| (g - r).abs() <= 1e-12)
                .ok_or_else(|| Error::invalid(format!("radius {r} is not a Gauss node")))?;
            let t_real = theta.rem_euclid(2.0 * PI) / grid.angular_weight();
            let t = t_real.round();
            if (t_real - t).abs() > 1e-9 {
                return Err(Error::invalid(format!("angle {theta} is not an equispaced node")));
            }
            let t = (t as usize) % grid.n_theta;
            let slot = &mut values[q * grid.n_theta + t];
            if slot.is_some() {
                return Err(Error::invalid(format!("duplicate sample at r={r}, theta={theta}")));
            }
            *slot = Some(v);
        }
        let values = values
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::invalid("samples do not cover the grid"))?;
        Ok((grid, values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_to_degree_2n_minus_1() {
        for n in 1..40 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} p={p} q={q}");
            }
        }
    }

    #[test]
    fn nodes_ascending_and_interior() {
        let (x, w) = gauss_legendre(17);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(x.iter().all(|x| x.abs() < 1.0));
        assert!(w.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn disk_area() {
        for n in [1, 2, 7, 30, 61] {
            let g = DiskGrid::new(n, 5).unwrap();
            let sum: f64 = g.radial_weights().iter().sum();
            assert!((sum * 2.0 * PI - PI).abs() <= 1e-12 * PI);
            let area = g.integrate(|_, _| Complex64::new(1.0, 0.0));
            assert!((area.re - PI).abs() <= 1e-12 * PI);
        }
    }

    #[test]
    fn radial_moments_are_exact() {
        // ∫_D r^{2p} dV = 2π/(2p+2)
        let g = DiskGrid::new(6, 1).unwrap();
        for p in 0..12 {
            let q = g.integrate(|r, _| Complex64::new(r.powi(2 * p), 0.0)).re;
            assert!((q - 2.0 * PI / (2.0 * p as f64 + 2.0)).abs() < 1e-13, "p={p}");
        }
    }

    #[test]
    fn sample_grid_roundtrip() {
        let g = DiskGrid::new(4, 6).unwrap();
        let mut samples: Vec<_> = g
            .points()
            .enumerate()
            .map(|(i, (r, t))| (r, t, Complex64::new(i as f64, 0.0)))
            .collect();
        samples.reverse();
        let (h, vals) = DiskGrid::from_samples(&samples).unwrap();
        assert_eq!(h, g);
        assert!(vals.iter().enumerate().all(|(i, v)| v.re == i as f64));
        samples.pop();
        assert!(DiskGrid::from_samples(&samples).is_err());
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(DiskGrid::new(0, 3).is_err());
        assert!(DiskGrid::new(3, 0).is_err());
    }
}
