//! Entry majorant, Schur-test sums and norm estimates for `F^{|j|}`.
//!
//! The majorant is
//! `ξ^{|j|}_m(k) = (1/√π)·√(2k+|j|−1)/(m+|j|) · exp(−2(k+|j|)(k−1)/(2m+|j|+1))`,
//! obtained from the gamma ratio `ρ(x)` and its exponential bound. The Schur
//! weights `u_l = l^{−1/2}`, `v_l = (l+|j|)^{−1/2}` with constants `C₁ = 4`,
//! `C₂ = 32` give `‖F^{|j|}‖ ≤ √(C₁C₂) = 2^{7/2}` for every `j`.
//!
//! Every check here is numerical certification on a finite sweep; each sweep
//! returns an [`InequalityReport`] with the smallest relative margin seen.

use std::f64::consts::{E, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::frechet::{
    column_log_magnitudes, entry_gamma, ln_gamma_quotient, prefactor, row_magnitudes,
    TriangularBlock,
};
use crate::{Error, Result};

/// Row-sum constant `C₁`.
pub const SCHUR_ROW_CONSTANT: f64 = 4.0;
/// Column-sum constant `C₂`.
pub const SCHUR_COL_CONSTANT: f64 = 32.0;
/// `2^{7/2} = √(C₁C₂)`.
pub const UNIFORM_NORM_BOUND: f64 = 11.313_708_498_984_761;

pub const DEFAULT_POWER_ITERATIONS: usize = 200;

/// Schur test weights for a fixed `|j|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchurVectors {
    pub j_abs: usize,
}

impl SchurVectors {
    pub fn new(j_abs: usize) -> Self {
        SchurVectors { j_abs }
    }

    /// `u_l = l^{−1/2}`, `l ≥ 1`.
    pub fn u(&self, l: usize) -> f64 {
        1.0 / (l as f64).sqrt()
    }

    /// `v_l = (l+|j|)^{−1/2}`, `l ≥ 1`.
    pub fn v(&self, l: usize) -> f64 {
        1.0 / ((l + self.j_abs) as f64).sqrt()
    }

    pub fn u_prefix(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|l| self.u(l)).collect()
    }

    pub fn v_prefix(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|l| self.v(l)).collect()
    }
}

fn check_k_range(k: f64, m: usize) -> Result<()> {
    if (1.0..=m as f64).contains(&k) {
        Ok(())
    } else {
        Err(Error::invalid(format!("need 1 <= k <= m, got k={k}, m={m}")))
    }
}

/// `exp(−2(x+|j|)(x−1)/(2m+|j|+1))`, the exponential bound on `ρ(x)`.
pub fn rho_majorant(j_abs: usize, m: usize, x: f64) -> f64 {
    let j = j_abs as f64;
    (-2.0 * (x + j) * (x - 1.0) / (2.0 * m as f64 + j + 1.0)).exp()
}

/// `ξ^{|j|}_m(x)` for real `x ∈ [1, m]`.
pub fn xi_at(j_abs: usize, m: usize, x: f64) -> Result<f64> {
    check_k_range(x, m)?;
    Ok(prefactor(j_abs as u64, m as u64, x) * rho_majorant(j_abs, m, x))
}

/// `ξ^{|j|}_m(k)`, the majorant of `|F^{|j|}_{m,k}|`.
pub fn xi(j_abs: usize, m: usize, k: usize) -> Result<f64> {
    xi_at(j_abs, m, k as f64)
}

/// `ρ(x) = Γ(m)Γ(m+|j|+1) / (Γ(m−x+1)Γ(m+|j|+x))`, `1 ≤ x ≤ m`.
pub fn rho(j_abs: usize, m: usize, x: f64) -> Result<f64> {
    check_k_range(x, m)?;
    Ok(ln_gamma_quotient(j_abs as u64, m as u64, x).exp())
}

/// `Σ_{k=1}^{K} |F^{|j|}_{m,k}| u_k`, which must not exceed `4 v_m`.
pub fn schur_row_check(j_abs: usize, m: usize, cols: usize) -> f64 {
    let u = SchurVectors::new(j_abs);
    row_magnitudes(j_abs as u64, m as u64)
        .take(cols)
        .enumerate()
        .map(|(i, a)| a * u.u(i + 1))
        .sum()
}

/// Rigorous bound on `Σ_{m ≥ start} |F^{|j|}_{m,k}| v_m`, `start ≥ k`.
///
/// The summand is dominated by `C·√(2k+|j|−1)·g(m)` with
/// `g(x) = (2x+|j|+1)^{−3/2} exp(−b/(2x+|j|+1))`, `b = 2k(k+|j|)`,
/// `C = 3^{3/2}e²/√π`. `g` is unimodal, so the tail is at most
/// `∫_start^∞ g + max_{x ≥ start} g`, and the integral is
/// `(1/√b)·(√π/2)·erf(√(b/(2·start+|j|+1)))`.
pub fn schur_column_tail(j_abs: usize, k: usize, start: usize) -> f64 {
    let (j, kf) = (j_abs as f64, k as f64);
    let start = start.max(k) as f64;
    let b = 2.0 * kf * (kf + j);
    let y = 2.0 * start + j + 1.0;
    let integral = (0.5 * PI.sqrt() / b.sqrt()) * libm::erf((b / y).sqrt());
    // g increases while 2x+|j|+1 < 2b/3
    let peak = if 1.5 * y >= b {
        y.powf(-1.5) * (-b / y).exp()
    } else {
        (3.0 / (2.0 * E * b)).powf(1.5)
    };
    let c = 3f64.powf(1.5) * E * E / PI.sqrt();
    c * (2.0 * kf + j - 1.0).sqrt() * (integral + peak)
}

/// Certified column sum: `Σ_{m=k}^{M} |F^{|j|}_{m,k}| v_m` plus
/// [`schur_column_tail`] from `max(M+1, k)`. Must not exceed `32 u_k`.
pub fn schur_col_check(j_abs: usize, k: usize, rows: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::invalid("column index k is 1-based"));
    }
    let v = SchurVectors::new(j_abs);
    let partial: f64 = if rows >= k {
        column_log_magnitudes(j_abs as u64, k as u64)
            .take(rows - k + 1)
            .enumerate()
            .map(|(i, log)| log.exp() * v.v(k + i))
            .sum()
    } else {
        0.0
    };
    Ok(partial + schur_column_tail(j_abs, k, (rows + 1).max(k)))
}

/// Power iteration on `BᵀB` from the all-ones vector. The returned
/// `√‖BᵀB x‖` (unit `x`) is a lower bound on `‖B‖₂`, nondecreasing in
/// `iters`.
pub fn op_norm_estimate(block: &TriangularBlock, iters: usize) -> Result<f64> {
    if iters < 1 {
        return Err(Error::invalid("power iteration needs at least one step"));
    }
    let (rows, cols) = (block.rows(), block.cols());
    let mut x = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut y = vec![0.0; rows];
    let mut z = vec![0.0; cols];
    let mut estimate = 0.0;
    for _ in 0..iters {
        block.mul_real(&x, &mut y);
        block.mul_transpose_real(&y, &mut z);
        let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nz == 0.0 {
            return Ok(0.0);
        }
        estimate = nz.sqrt();
        x.iter_mut().zip(&z).for_each(|(x, z)| *x = z / nz);
    }
    Ok(estimate)
}

pub const FIGURE1_M: [usize; 3] = [15, 30, 100];
pub const FIGURE1_J: [usize; 2] = [0, 3];
pub const FIGURE1_K_MAX: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure1Row {
    pub j: usize,
    pub m: usize,
    pub k: usize,
    pub abs_f: f64,
    pub xi: f64,
}

/// `|F^{|j|}_{m,k}|` next to `ξ^{|j|}_m(k)` for every `j` in `js`, `m` in
/// `ms` and `k ∈ [1, k_max]`; ordered by `j`, `m`, `k`.
///
/// Positions above the diagonal (`k > m`) are structural zeros of the
/// lower-triangular matrix; their `xi` column is the closed-form majorant
/// continued past `m`.
pub fn figure1_data(ms: &[usize], js: &[usize], k_max: usize) -> Result<Vec<Figure1Row>> {
    let mut rows = Vec::with_capacity(ms.len() * js.len() * k_max);
    for &j in js {
        for &m in ms {
            if m == 0 {
                return Err(Error::invalid("figure rows need m >= 1"));
            }
            for k in 1..=k_max {
                let (abs_f, xi) = if k <= m {
                    (entry_gamma(j as i64, k, m)?, xi(j, m, k)?)
                } else {
                    let x = k as f64;
                    (0.0, prefactor(j as u64, m as u64, x) * rho_majorant(j, m, x))
                };
                rows.push(Figure1Row { j, m, k, abs_f, xi });
            }
        }
    }
    Ok(rows)
}

/// The default table: `m ∈ {15, 30, 100}`, `j ∈ {0, 3}`, `k ∈ [1, 16]`.
pub fn figure1_default() -> Vec<Figure1Row> {
    figure1_data(&FIGURE1_M, &FIGURE1_J, FIGURE1_K_MAX).expect("static ranges are valid")
}

/// Where a worst margin was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Location {
    pub j: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

/// Result of one inequality over a sweep. `margin` is relative to the bound
/// (`(bound − value)/bound`), or `tol − discrepancy` for equality checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub checked: u64,
    pub worst_margin: f64,
    pub worst_at: Option<Location>,
    /// Largest checked value (e.g. the observed norm); informational.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_max: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
struct Worst {
    checked: u64,
    margin: f64,
    at: Option<Location>,
    max_value: f64,
}

impl Worst {
    fn empty() -> Self {
        Worst {
            checked: 0,
            margin: f64::INFINITY,
            at: None,
            max_value: f64::NEG_INFINITY,
        }
    }

    fn record(&mut self, margin: f64, value: f64, at: Location) {
        self.checked += 1;
        self.max_value = self.max_value.max(value);
        // NaN margins count as failures
        if margin < self.margin || margin.is_nan() && !self.margin.is_nan() {
            self.margin = margin;
            self.at = Some(at);
        }
    }

    fn merge(self, other: Worst) -> Worst {
        let (first, second) = (self, other);
        let take_second = second.margin < first.margin || second.margin.is_nan() && !first.margin.is_nan();
        let (margin, at) = if take_second {
            (second.margin, second.at)
        } else {
            (first.margin, first.at)
        };
        Worst {
            checked: first.checked + second.checked,
            margin,
            at,
            max_value: first.max_value.max(second.max_value),
        }
    }

    fn report(self, name: &str, with_max: bool) -> InequalityReport {
        let worst_margin = if self.checked == 0 { 0.0 } else { self.margin };
        InequalityReport {
            name: name.to_string(),
            checked: self.checked,
            worst_margin,
            worst_at: self.at,
            observed_max: with_max.then_some(self.max_value),
            pass: worst_margin >= 0.0,
        }
    }
}

fn sweep<F>(js: std::ops::RangeInclusive<usize>, per_j: F) -> Worst
where
    F: Fn(usize, &mut Worst) + Sync,
{
    // Sequential j-order merge keeps the reported location deterministic.
    let parts: Vec<Worst> = js
        .into_par_iter()
        .map(|j| {
            let mut w = Worst::empty();
            per_j(j, &mut w);
            w
        })
        .collect();
    parts.into_iter().fold(Worst::empty(), Worst::merge)
}

/// `|F^{|j|}_{m,k}| ≤ ξ^{|j|}_m(k)` for `m ≤ m_max`, `1 ≤ k ≤ m`,
/// `|j| ≤ j_max`, plus exact agreement (within `k1_tol` relative) at `k = 1`.
pub fn check_domination(m_max: usize, j_max: usize, k1_tol: f64) -> [InequalityReport; 2] {
    let dom = sweep(0..=j_max, |j, w| {
        for m in 1..=m_max {
            for k in 1..=m {
                let a = entry_gamma(j as i64, k, m).expect("k in range");
                let b = xi(j, m, k).expect("k in range");
                let at = Location { j, m: Some(m), k: Some(k as f64) };
                w.record((b - a) / b, a, at);
            }
        }
    });
    let eq = sweep(0..=j_max, |j, w| {
        for m in 1..=m_max {
            let a = entry_gamma(j as i64, 1, m).expect("k in range");
            let b = xi(j, m, 1).expect("k in range");
            let at = Location { j, m: Some(m), k: Some(1.0) };
            w.record(k1_tol - (a - b).abs() / b, (a - b).abs() / b, at);
        }
    });
    [
        dom.report("entry_domination", false),
        eq.report("k1_equality", true),
    ]
}

/// `ρ(x) ≤ exp(−2(x+|j|)(x−1)/(2m+|j|+1))` on `x = 1, 1+step, …` (and
/// `x = m`), `m ≤ m_max`, `|j| ≤ j_max`.
pub fn check_gronwall(m_max: usize, j_max: usize, step: f64) -> InequalityReport {
    sweep(0..=j_max, |j, w| {
        for m in 1..=m_max {
            let n = ((m as f64 - 1.0) / step).floor() as usize;
            let xs = (0..=n).map(|i| 1.0 + i as f64 * step).chain(std::iter::once(m as f64));
            for x in xs.filter(|&x| x <= m as f64) {
                let r = rho(j, m, x).expect("x in range");
                let bound = rho_majorant(j, m, x);
                let at = Location { j, m: Some(m), k: Some(x) };
                w.record((bound - r) / bound, r, at);
            }
        }
    })
    .report("gronwall_majorant", false)
}

/// Row sums `≤ 4 v_m` for `m ≤ n_max` and tail-certified column sums
/// `≤ 32 u_k` for `k ≤ n_max` (partial sums up to `M = n_max`).
pub fn check_schur(n_max: usize, j_max: usize) -> [InequalityReport; 2] {
    let rows = sweep(0..=j_max, |j, w| {
        let sv = SchurVectors::new(j);
        for m in 1..=n_max {
            let s = schur_row_check(j, m, m);
            let bound = SCHUR_ROW_CONSTANT * sv.v(m);
            w.record((bound - s) / bound, s / sv.v(m), Location { j, m: Some(m), k: None });
        }
    });
    let cols = sweep(0..=j_max, |j, w| {
        let sv = SchurVectors::new(j);
        for k in 1..=n_max {
            let s = schur_col_check(j, k, n_max).expect("k >= 1");
            let bound = SCHUR_COL_CONSTANT * sv.u(k);
            w.record((bound - s) / bound, s / sv.u(k), Location { j, m: None, k: Some(k as f64) });
        }
    });
    [
        rows.report("schur_rows", true),
        cols.report("schur_columns", true),
    ]
}

/// Power-iteration norm estimates of square sections `n × n` of `F^{|j|}`
/// for each `n` in `sizes`, `|j| ≤ j_max`, against `2^{7/2}`.
pub fn check_uniform_norm(sizes: &[usize], j_max: usize, iters: usize) -> InequalityReport {
    let mut total = Worst::empty();
    for &n in sizes {
        let part = sweep(0..=j_max, |j, w| {
            let block = crate::frechet::assemble_block(j, n, n).expect("square section");
            let est = op_norm_estimate(&block, iters).expect("iters >= 1");
            let margin = (UNIFORM_NORM_BOUND - est) / UNIFORM_NORM_BOUND;
            w.record(margin, est, Location { j, m: Some(n), k: None });
        });
        total = total.merge(part);
    }
    total.report("uniform_norm", true)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub m_max: usize,
    pub j_max: usize,
    pub schur_n_max: usize,
    pub schur_j_max: usize,
    pub norm_sizes: Vec<usize>,
    pub norm_j_max: usize,
    pub inequalities: Vec<InequalityReport>,
    pub pass: bool,
}

/// Sweep ranges for [`run_bound_suite`].
#[derive(Debug, Clone)]
pub struct BoundSweep {
    pub m_max: usize,
    pub j_max: usize,
    pub gronwall_m_max: usize,
    pub gronwall_j_max: usize,
    pub gronwall_step: f64,
    pub schur_n_max: usize,
    pub schur_j_max: usize,
    pub norm_sizes: Vec<usize>,
    pub norm_j_max: usize,
    pub iters: usize,
    pub k1_tol: f64,
}

impl Default for BoundSweep {
    fn default() -> Self {
        BoundSweep {
            m_max: 200,
            j_max: 20,
            gronwall_m_max: 100,
            gronwall_j_max: 10,
            gronwall_step: 0.01,
            schur_n_max: 500,
            schur_j_max: 20,
            norm_sizes: vec![100],
            norm_j_max: 10,
            iters: DEFAULT_POWER_ITERATIONS,
            k1_tol: 1e-14,
        }
    }
}

pub fn run_bound_suite(s: &BoundSweep) -> BoundReport {
    let mut inequalities = Vec::new();
    inequalities.extend(check_domination(s.m_max, s.j_max, s.k1_tol));
    inequalities.push(check_gronwall(s.gronwall_m_max, s.gronwall_j_max, s.gronwall_step));
    inequalities.extend(check_schur(s.schur_n_max, s.schur_j_max));
    inequalities.push(check_uniform_norm(&s.norm_sizes, s.norm_j_max, s.iters));
    let pass = inequalities.iter().all(|r| r.pass);
    BoundReport {
        m_max: s.m_max,
        j_max: s.j_max,
        schur_n_max: s.schur_n_max,
        schur_j_max: s.schur_j_max,
        norm_sizes: s.norm_sizes.clone(),
        norm_j_max: s.norm_j_max,
        inequalities,
        pass,
    }
}
