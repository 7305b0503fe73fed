//! Chebyshev-type bases on `[-2, 2]` and linear eigenvalue statistics.
//!
//! * `Φ_0 = 1`, `Φ_k(x) = 2T_k(x/2)`
//! * `Γ_k = Φ_k`, plus `(2d-2)/(2d-1)^{k/2}` when `k >= 2` is even
//! * `p_0 = 1`, `p_k(x) = U_k(x/2) - U_{k-2}(x/2)/(2d-1)`
//!
//! `Σ_i Γ_k(λ_i) = (2d-1)^{-k/2} CNBW_k` for the eigenvalues `λ_i` of
//! `(2d-1)^{-1/2} A`, which is what lets a linear statistic be computed
//! either from the spectrum or from walk counts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::Spectrum;
use crate::walks::{branch_power, CountVector};
use crate::words::{mean_cnbw_infty, to_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyKind {
    /// First kind on `[-1, 1]`.
    T,
    /// Second kind on `[-1, 1]`.
    U,
    Phi,
    Gamma(usize),
    P(usize),
}

fn chebyshev_t(k: usize, y: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, y);
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        (prev, cur) = (cur, 2.0 * y * cur - prev);
    }
    cur
}

fn chebyshev_u(k: usize, y: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * y);
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        (prev, cur) = (cur, 2.0 * y * cur - prev);
    }
    cur
}

/// `(2d-2)/(2d-1)^{k/2}` for even `k >= 2`, zero otherwise.
pub fn gamma_shift(d: usize, k: usize) -> f64 {
    if k >= 2 && k % 2 == 0 {
        (2 * d - 2) as f64 / branch_power(d, k)
    } else {
        0.0
    }
}

pub fn eval_basis(kind: PolyKind, k: usize, x: f64) -> f64 {
    match kind {
        PolyKind::T => chebyshev_t(k, x),
        PolyKind::U => chebyshev_u(k, x),
        PolyKind::Phi if k == 0 => 1.0,
        PolyKind::Phi => 2.0 * chebyshev_t(k, x / 2.0),
        PolyKind::Gamma(d) => eval_basis(PolyKind::Phi, k, x) + gamma_shift(d, k),
        PolyKind::P(_) if k == 0 => 1.0,
        PolyKind::P(_) if k == 1 => chebyshev_u(1, x / 2.0),
        PolyKind::P(d) => chebyshev_u(k, x / 2.0) - chebyshev_u(k - 2, x / 2.0) / (2 * d - 1) as f64,
    }
}

/// `Φ_0(x), …, Φ_K(x)` in one recurrence pass.
pub fn phi_values(x: f64, degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(1.0);
    if degree == 0 {
        return out;
    }
    // 2T_k(x/2) obeys the same recurrence as T with y = x/2, scaled by 2
    let (mut prev, mut cur) = (2.0, x);
    out.push(cur);
    for _ in 2..=degree {
        (prev, cur) = (cur, x * cur - prev);
        out.push(cur);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Phi,
    Gamma { d: usize },
}

/// `f(x) ≈ Σ_{k=0}^{K} c_k b_k(x)` on `[-2, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebSeries {
    pub basis: Basis,
    pub coeffs: Vec<f64>,
}

impl ChebSeries {
    pub fn new(basis: Basis, coeffs: Vec<f64>) -> Self {
        ChebSeries { basis, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Basis functions `b_0(x), …, b_K(x)`.
    pub fn basis_values(&self, x: f64) -> Vec<f64> {
        let mut values = phi_values(x, self.degree());
        if let Basis::Gamma { d } = self.basis {
            for (k, v) in values.iter_mut().enumerate() {
                *v += gamma_shift(d, k);
            }
        }
        values
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.basis_values(x).iter().zip(&self.coeffs).map(|(b, c)| b * c).sum()
    }

    /// Same function in the `Φ` basis; only `c_0` moves.
    pub fn to_phi(&self) -> ChebSeries {
        match self.basis {
            Basis::Phi => self.clone(),
            Basis::Gamma { d } => {
                let mut coeffs = self.coeffs.clone();
                coeffs[0] += shift_total(d, &self.coeffs);
                ChebSeries::new(Basis::Phi, coeffs)
            }
        }
    }

    /// Same function in the `Γ` basis for degree parameter `d`.
    pub fn to_gamma(&self, d: usize) -> ChebSeries {
        let phi = self.to_phi();
        let mut coeffs = phi.coeffs.clone();
        coeffs[0] -= shift_total(d, &phi.coeffs);
        ChebSeries::new(Basis::Gamma { d }, coeffs)
    }

    /// First `k + 1` coefficients.
    pub fn truncated(&self, k: usize) -> ChebSeries {
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(k + 1);
        ChebSeries::new(self.basis, coeffs)
    }
}

fn shift_total(d: usize, coeffs: &[f64]) -> f64 {
    coeffs.iter().enumerate().map(|(k, c)| c * gamma_shift(d, k)).sum()
}

/// Coefficients `c_0..c_K` of `f` in `basis`, from Chebyshev–Gauss
/// quadrature with `4K` nodes on `x = 2cos θ`:
/// `c_k = (1/π)∫_0^π f(2cos θ) cos(kθ) dθ` in the `Φ` basis.
pub fn expand(f: impl Fn(f64) -> f64, k_max: usize, basis: Basis) -> Result<ChebSeries> {
    if k_max == 0 {
        return Err(Error::Domain("expansion needs K >= 1".into()));
    }
    let nodes = 4 * k_max;
    let samples: Vec<(f64, f64)> = (0..nodes)
        .map(|j| {
            let theta = PI * (j as f64 + 0.5) / nodes as f64;
            (theta, f(2.0 * theta.cos()))
        })
        .collect();
    if samples.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::Domain("function is not finite on [-2, 2]".into()));
    }
    let coeffs = (0..=k_max)
        .map(|k| samples.iter().map(|(t, y)| y * (k as f64 * t).cos()).sum::<f64>() / nodes as f64)
        .collect();
    let phi = ChebSeries::new(Basis::Phi, coeffs);
    Ok(match basis {
        Basis::Phi => phi,
        Basis::Gamma { d } => phi.to_gamma(d),
    })
}

/// Points of the uniform grid on `[-a, a]` used by [`truncation_error`].
pub const ERROR_GRID_POINTS: usize = 10_001;

/// `sup |f - f_K|` over a uniform grid of `[-a, a]`, where `f_K` keeps the
/// first `K + 1` terms of `series`.
pub fn truncation_error(f: impl Fn(f64) -> f64, series: &ChebSeries, k: usize, a: f64) -> Result<f64> {
    if a < 2.0 {
        return Err(Error::Domain(format!("interval bound {a} must be at least 2")));
    }
    let truncated = series.truncated(k);
    let steps = ERROR_GRID_POINTS - 1;
    Ok((0..=steps)
        .map(|i| {
            let x = -a + 2.0 * a * i as f64 / steps as f64;
            (f(x) - truncated.eval(x)).abs()
        })
        .fold(0.0, f64::max))
}

/// Test functions for linear statistics, written `square`, `exp` or `cheb:k`
/// (the latter is `Φ_k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionSpec {
    Square,
    Exp,
    Cheb(usize),
}

impl FunctionSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FunctionSpec::Square => x * x,
            FunctionSpec::Exp => x.exp(),
            FunctionSpec::Cheb(k) => eval_basis(PolyKind::Phi, k, x),
        }
    }

    /// Polynomial degree, if `f` is a polynomial.
    pub fn degree(&self) -> Option<usize> {
        match *self {
            FunctionSpec::Square => Some(2),
            FunctionSpec::Exp => None,
            FunctionSpec::Cheb(k) => Some(k),
        }
    }

    pub fn series(&self, k_max: usize, basis: Basis) -> Result<ChebSeries> {
        expand(|x| self.eval(x), k_max, basis)
    }
}

impl std::fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FunctionSpec::Square => write!(f, "square"),
            FunctionSpec::Exp => write!(f, "exp"),
            FunctionSpec::Cheb(k) => write!(f, "cheb:{k}"),
        }
    }
}

impl std::str::FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(FunctionSpec::Square),
            "exp" => Ok(FunctionSpec::Exp),
            _ => s
                .strip_prefix("cheb:")
                .and_then(|k| k.parse().ok())
                .map(FunctionSpec::Cheb)
                .ok_or_else(|| Error::Config(format!("unknown function `{s}`; expected square, exp or cheb:k"))),
        }
    }
}

impl Serialize for FunctionSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FunctionSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `r_n = ⌊β ln n / ln(2d-1)⌋`, at least 1.
pub fn rn_rule(n: usize, d: usize, beta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::Domain(format!("beta = {beta} must lie in (0, 1/2)")));
    }
    if d < 2 {
        return Err(Error::Domain("the r_n rule needs d >= 2".into()));
    }
    let r = (beta * (n as f64).ln() / ((2 * d - 1) as f64).ln()).floor();
    Ok((r as usize).max(1))
}

/// Kesten–McKay density of a `2d`-regular graph, rescaled to `[-2, 2]`.
pub fn kesten_mckay_density(d: usize, x: f64) -> Result<f64> {
    if x.abs() > 2.0 {
        return Err(Error::Domain(format!("|x| = {} exceeds 2", x.abs())));
    }
    let d = d as f64;
    let q = 2.0 * d - 1.0;
    Ok(2.0 * d * q * (4.0 - x * x).sqrt() / (2.0 * PI * (4.0 * d * d - q * x * x)))
}

/// `∫ g ρ_{2d}` over `[-2, 2]` by the midpoint rule in `θ` with `x = 2cos θ`.
pub fn kesten_mckay_expectation(d: usize, g: impl Fn(f64) -> f64, nodes: usize) -> f64 {
    (0..nodes)
        .map(|j| {
            let theta = PI * (j as f64 + 0.5) / nodes as f64;
            let x = 2.0 * theta.cos();
            g(x) * kesten_mckay_density(d, x).unwrap_or(0.0) * 2.0 * theta.sin()
        })
        .sum::<f64>()
        * PI
        / nodes as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LinStatMode {
    /// Fixed degree: `Σ f(λ_i) - n c_0` with `Γ` coefficients.
    Fixed,
    /// Growing degree: additionally subtract `m^f_r(n)`, with `Φ` coefficients.
    Growing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinStatResult {
    pub raw: f64,
    pub centered: f64,
    /// `k`-th entry is the centered contribution of `c_k b_k`; entry 0 is 0.
    pub per_k_contributions: Vec<f64>,
    pub mode: LinStatMode,
    pub n: usize,
    pub d: usize,
    pub r: usize,
}

fn check_mode(series: &ChebSeries, mode: LinStatMode, d: usize) -> Result<()> {
    match (mode, series.basis) {
        (LinStatMode::Fixed, Basis::Gamma { d: sd }) if sd == d => Ok(()),
        (LinStatMode::Growing, Basis::Phi) => Ok(()),
        (m, b) => Err(Error::BasisMismatch(format!("{m:?} mode with {b:?} series at d = {d}"))),
    }
}

/// `m^f_r(n) = Σ_{i=1}^{r} c_i (2d-1)^{-i/2} (μ_i(d) - 1{i even}(2d-2)n)`.
pub fn growing_centering(series: &ChebSeries, n: usize, d: usize, r: usize) -> f64 {
    (1..=r).map(|i| series.coeff(i) * growing_mean_term(n, d, i)).sum()
}

fn growing_mean_term(n: usize, d: usize, i: usize) -> f64 {
    let mut mean = to_f64(&mean_cnbw_infty(d, i));
    if i % 2 == 0 {
        mean -= ((2 * d - 2) * n) as f64;
    }
    mean / branch_power(d, i)
}

/// Linear statistic from the spectrum: `Σ_i f_K(λ_i)` and its centering.
pub fn linear_statistic(spec: &Spectrum, series: &ChebSeries, mode: LinStatMode, r: usize) -> Result<LinStatResult> {
    let (n, d) = (spec.n, spec.d);
    check_mode(series, mode, d)?;
    let mut sums = vec![0.0; series.degree() + 1];
    for &lambda in spec.values() {
        for (s, b) in sums.iter_mut().zip(series.basis_values(lambda)) {
            *s += b;
        }
    }
    let mut per_k: Vec<f64> = sums.iter().enumerate().map(|(k, s)| series.coeff(k) * s).collect();
    let raw: f64 = per_k.iter().sum();
    per_k[0] = 0.0;
    if mode == LinStatMode::Growing {
        for (k, value) in per_k.iter_mut().enumerate().skip(1).take(r) {
            *value -= series.coeff(k) * growing_mean_term(n, d, k);
        }
    }
    finish(raw, per_k, series, mode, n, d, r)
}

/// The same statistic reconstructed from walk counts:
/// `Σ_i Γ_k(λ_i) = (2d-1)^{-k/2} CNBW_k`.
pub fn linear_statistic_from_walks(cnbw: &CountVector, series: &ChebSeries, mode: LinStatMode, r: usize) -> Result<LinStatResult> {
    let (n, d) = (cnbw.n, cnbw.d);
    check_mode(series, mode, d)?;
    if cnbw.r() < series.degree() {
        return Err(Error::Domain(format!("series of degree {} needs CNBW up to that length, have {}", series.degree(), cnbw.r())));
    }
    let mut per_k = vec![0.0; series.degree() + 1];
    for k in 1..=series.degree() {
        let mut scaled = cnbw.get(k) as f64;
        if mode == LinStatMode::Growing && k % 2 == 0 {
            scaled -= ((2 * d - 2) * n) as f64;
        }
        per_k[k] = series.coeff(k) * scaled / branch_power(d, k);
    }
    let raw = n as f64 * series.coeff(0) + per_k.iter().sum::<f64>();
    if mode == LinStatMode::Growing {
        for (k, value) in per_k.iter_mut().enumerate().skip(1).take(r) {
            *value -= series.coeff(k) * growing_mean_term(n, d, k);
        }
    }
    finish(raw, per_k, series, mode, n, d, r)
}

fn finish(raw: f64, per_k: Vec<f64>, series: &ChebSeries, mode: LinStatMode, n: usize, d: usize, r: usize) -> Result<LinStatResult> {
    let mut centered = raw - n as f64 * series.coeff(0);
    if mode == LinStatMode::Growing {
        centered -= growing_centering(series, n, d, r);
    }
    Ok(LinStatResult { raw, centered, per_k_contributions: per_k, mode, n, d, r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_spec_parsing() {
        for s in ["square", "exp", "cheb:4"] {
            assert_eq!(s.parse::<FunctionSpec>().unwrap().to_string(), s);
        }
        assert!("cheb:".parse::<FunctionSpec>().is_err());
        assert!("sin".parse::<FunctionSpec>().is_err());
        let c = FunctionSpec::Cheb(3).series(5, Basis::Phi).unwrap();
        for (k, v) in c.coeffs.iter().enumerate() {
            assert!((v - if k == 3 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn recurrences_match_trigonometric_forms() {
        for i in 0..=200 {
            let theta = PI * i as f64 / 200.0;
            for k in 0..=20 {
                let t = eval_basis(PolyKind::T, k, theta.cos());
                assert!((t - (k as f64 * theta).cos()).abs() < 1e-12);
                if theta.sin().abs() > 1e-3 {
                    let u = eval_basis(PolyKind::U, k, theta.cos());
                    let expected = ((k + 1) as f64 * theta).sin() / theta.sin();
                    assert!((u - expected).abs() < 1e-9 * (1.0 + expected.abs()));
                }
            }
        }
    }

    #[test]
    fn low_degree_bases() {
        for &x in &[-1.7, -0.3, 0.0, 0.9, 2.0] {
            assert!((eval_basis(PolyKind::Gamma(2), 1, x) - x).abs() < 1e-14);
            assert!((eval_basis(PolyKind::Gamma(2), 2, x) - (x * x - 2.0 + 2.0 / 3.0)).abs() < 1e-14);
            assert!((eval_basis(PolyKind::P(3), 1, x) - x).abs() < 1e-14);
            assert!((eval_basis(PolyKind::Phi, 3, x) - (x * x * x - 3.0 * x)).abs() < 1e-13);
            assert_eq!(eval_basis(PolyKind::Gamma(4), 0, x), 1.0);
        }
    }

    #[test]
    fn gamma_is_combination_of_p() {
        // Γ_{k} = p_k - (2d-2) Σ_{j>=1} p_{k-2j}/(2d-1)^j, stopping at p_1 or p_2
        for d in 2..=4 {
            let q = (2 * d - 1) as f64;
            for k in 1..=10 {
                for &x in &[-1.9, -0.4, 0.7, 1.5] {
                    let mut rhs = eval_basis(PolyKind::P(d), k, x);
                    let mut j = 1;
                    while 2 * j < k {
                        rhs -= (2 * d - 2) as f64 * eval_basis(PolyKind::P(d), k - 2 * j, x) / q.powi(j as i32);
                        j += 1;
                    }
                    let lhs = eval_basis(PolyKind::Gamma(d), k, x);
                    assert!((lhs - rhs).abs() < 1e-9, "d={d} k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn phi_values_agree_with_eval_basis() {
        let vals = phi_values(1.3, 12);
        for (k, v) in vals.iter().enumerate() {
            assert!((v - eval_basis(PolyKind::Phi, k, 1.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn expand_square() {
        let s = expand(|x| x * x, 6, Basis::Phi).unwrap();
        for (k, c) in s.coeffs.iter().enumerate() {
            let expected = match k {
                0 => 2.0,
                2 => 1.0,
                _ => 0.0,
            };
            assert!((c - expected).abs() < 1e-12, "k={k} c={c}");
        }
    }

    #[test]
    fn expand_reproduces_gamma_basis_element() {
        let s = expand(|x| eval_basis(PolyKind::Gamma(2), 3, x), 5, Basis::Gamma { d: 2 }).unwrap();
        for (k, c) in s.coeffs.iter().enumerate() {
            let expected = if k == 3 { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-12, "k={k} c={c}");
        }
    }

    #[test]
    fn expand_exp_converges() {
        let s = expand(f64::exp, 30, Basis::Phi).unwrap();
        assert!(truncation_error(f64::exp, &s, 30, 2.0).unwrap() <= 1e-10);
        // geometric decay over the resolved range
        for k in 2..=12 {
            assert!(s.coeffs[k].abs() < s.coeffs[k - 1].abs());
        }
    }

    #[test]
    fn truncation_of_polynomials_is_exact() {
        let f = |x: f64| 3.0 * x * x * x - x + 0.5;
        let s = expand(f, 4, Basis::Phi).unwrap();
        assert!(truncation_error(f, &s, 3, 2.0).unwrap() < 1e-12);
        assert!(truncation_error(f, &s, 3, 3.0).unwrap() < 1e-11);
        assert!(truncation_error(f, &s, 3, 1.0).is_err());
    }

    #[test]
    fn exp_truncation_decays_and_grows_with_interval() {
        let s = expand(f64::exp, 30, Basis::Phi).unwrap();
        let errs: Vec<f64> = (2..=12).map(|k| truncation_error(f64::exp, &s, k, 2.0).unwrap()).collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0]);
        }
        for k in [3, 6, 9] {
            assert!(truncation_error(f64::exp, &s, k, 2.2).unwrap() >= truncation_error(f64::exp, &s, k, 2.0).unwrap());
        }
    }

    #[test]
    fn basis_conversion_round_trips() {
        let s = ChebSeries::new(Basis::Phi, vec![0.5, -1.0, 2.0, 0.25, -0.75]);
        for d in 2..=5 {
            let g = s.to_gamma(d);
            let back = g.to_phi();
            for x in [-2.0, -0.5, 0.3, 1.99] {
                assert!((s.eval(x) - g.eval(x)).abs() < 1e-12);
            }
            for (a, b) in s.coeffs.iter().zip(&back.coeffs) {
                assert!((a - b).abs() < 1e-14);
            }
            assert_eq!(&g.coeffs[1..], &s.coeffs[1..]);
        }
    }

    #[test]
    fn rn_rule_values() {
        assert_eq!(rn_rule(10_000, 2, 0.4).unwrap(), 3);
        assert_eq!(rn_rule(3, 2, 0.4).unwrap(), 1);
        assert!(rn_rule(100, 2, 0.6).is_err());
        assert!(rn_rule(100, 2, 0.0).is_err());
        let mut last = 0;
        for n in (2..100_000).step_by(997) {
            let r = rn_rule(n, 3, 0.45).unwrap();
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn kesten_mckay_basics() {
        assert!(kesten_mckay_density(2, 2.1).is_err());
        for &x in &[0.0, 0.5, 1.3, 1.99] {
            assert_eq!(kesten_mckay_density(3, x).unwrap(), kesten_mckay_density(3, -x).unwrap());
        }
        let total = kesten_mckay_expectation(2, |_| 1.0, 4000);
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kesten_mckay_second_moment() {
        // second moment of the rescaled Kesten–McKay law is 2d/(2d-1)
        for d in 2..=4 {
            let m2 = kesten_mckay_expectation(d, |x| x * x, 4000);
            assert!((m2 - 2.0 * d as f64 / (2 * d - 1) as f64).abs() < 1e-10);
        }
    }
}
