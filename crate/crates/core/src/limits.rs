//! Reference laws for the limits of cycle and walk counts, and the
//! distances used to compare Monte Carlo samples against them.

use std::collections::BTreeMap;

use num_integer::Integer;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::chebyshev::{Basis, ChebSeries};
use crate::error::{Error, Result};
use crate::parallel::{map_trials, Execution};
use crate::rng;
use crate::walks::branch_power;
use crate::words::{a_closed_form, divisors, mean_cnbw_infty, to_f64};

pub const DEFAULT_EPS: f64 = 1e-12;

/// Largest lattice support built by exact convolution.
pub const MAX_SUPPORT: usize = 1_000_000;

/// Probability mass on the lattice `offset + step·i`, `i = 0..len`.
/// At most `eps` of the mass was dropped by truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub offset: i64,
    pub step: i64,
    pub probs: Vec<f64>,
    pub eps: f64,
}

impl Pmf {
    pub fn point_mass(value: i64) -> Self {
        Pmf { offset: value, step: 1, probs: vec![1.0], eps: 0.0 }
    }

    pub fn value(&self, i: usize) -> i64 {
        self.offset + self.step * i as i64
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (self.value(i), p))
    }

    pub fn prob(&self, value: i64) -> f64 {
        let rel = value - self.offset;
        if rel < 0 || rel % self.step != 0 {
            return 0.0;
        }
        self.probs.get((rel / self.step) as usize).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(v, p)| v as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.iter().map(|(v, p)| (v as f64).powi(2) * p).sum()
    }

    pub fn variance(&self) -> f64 {
        self.second_moment() - self.mean().powi(2)
    }

    /// Law of `factor·X`.
    pub fn scaled(&self, factor: i64) -> Pmf {
        assert!(factor > 0, "scale factor must be positive");
        Pmf { offset: self.offset * factor, step: self.step * factor, probs: self.probs.clone(), eps: self.eps }
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`, on the
    /// lattice with step `gcd` of the two steps.
    pub fn convolve(&self, other: &Pmf) -> Result<Pmf> {
        let step = self.step.gcd(&other.step);
        let stretch = |p: &Pmf| -> Vec<f64> {
            let ratio = (p.step / step) as usize;
            let mut out = vec![0.0; (p.probs.len() - 1) * ratio + 1];
            for (i, &x) in p.probs.iter().enumerate() {
                out[i * ratio] = x;
            }
            out
        };
        let (a, b) = (stretch(self), stretch(other));
        let len = a.len() + b.len() - 1;
        if len > MAX_SUPPORT {
            return Err(Error::SupportTooLarge(len));
        }
        let mut probs = vec![0.0; len];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                probs[i + j] += x * y;
            }
        }
        Ok(Pmf { offset: self.offset + other.offset, step, probs, eps: self.eps + other.eps })
    }
}

/// Poisson(λ) truncated where each tail bound drops below `eps/2`.
pub fn poisson_pmf(lambda: f64, eps: f64) -> Result<Pmf> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("Poisson mean {lambda} must be finite and nonnegative")));
    }
    if lambda == 0.0 {
        return Ok(Pmf::point_mass(0));
    }
    let mode = lambda.floor() as i64;
    let at_mode = (-lambda + mode as f64 * lambda.ln() - ln_gamma(mode as f64 + 1.0)).exp();
    // walk down: p(k-1) = p(k)·k/λ; the remaining tail is at most p·ρ/(1-ρ) with ρ = k/λ
    let mut below = Vec::new();
    let (mut k, mut p) = (mode, at_mode);
    while k > 0 {
        let ratio = k as f64 / lambda;
        if ratio < 1.0 && p * ratio / (1.0 - ratio) < eps / 2.0 {
            break;
        }
        p *= ratio;
        k -= 1;
        below.push(p);
    }
    let low = k;
    below.reverse();
    let mut probs = below;
    probs.push(at_mode);
    let (mut k, mut p) = (mode, at_mode);
    loop {
        let ratio = lambda / (k + 1) as f64;
        if ratio < 1.0 && p * ratio / (1.0 - ratio) < eps / 2.0 {
            break;
        }
        p *= ratio;
        k += 1;
        probs.push(p);
    }
    Ok(Pmf { offset: low, step: 1, probs, eps })
}

/// Law of `CNBW_k^∞ = Σ_{j|k} 2j·C_j` with independent
/// `C_j ~ Poisson(a(d,j)/2j)`.
pub fn cnbw_infty_pmf(d: usize, k: usize, eps: f64) -> Result<Pmf> {
    let divs = divisors(k);
    let share = eps / divs.len() as f64;
    let mut law = Pmf::point_mass(0);
    for j in divs {
        let lambda = to_f64(&a_closed_form(d, j)) / (2 * j) as f64;
        law = law.convolve(&poisson_pmf(lambda, share)?.scaled(2 * j as i64))?;
    }
    Ok(law)
}

/// Monte Carlo sample, either an integer tally or sorted reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmpiricalDist {
    Counts { table: BTreeMap<i64, u64>, trials: usize },
    Samples { sorted: Vec<f64> },
}

impl EmpiricalDist {
    pub fn from_integers(values: impl IntoIterator<Item = i64>) -> Self {
        let mut table = BTreeMap::new();
        let mut trials = 0;
        for v in values {
            *table.entry(v).or_insert(0) += 1;
            trials += 1;
        }
        EmpiricalDist::Counts { table, trials }
    }

    pub fn from_reals(values: impl IntoIterator<Item = f64>) -> Self {
        let mut sorted: Vec<f64> = values.into_iter().collect();
        sorted.sort_by(f64::total_cmp);
        EmpiricalDist::Samples { sorted }
    }

    pub fn trials(&self) -> usize {
        match self {
            EmpiricalDist::Counts { trials, .. } => *trials,
            EmpiricalDist::Samples { sorted } => sorted.len(),
        }
    }

    /// Samples as floats, ascending.
    pub fn sorted_values(&self) -> Vec<f64> {
        match self {
            EmpiricalDist::Counts { table, .. } => table
                .iter()
                .flat_map(|(&v, &c)| std::iter::repeat_n(v as f64, c as usize))
                .collect(),
            EmpiricalDist::Samples { sorted } => sorted.clone(),
        }
    }

    pub fn summary(&self) -> Summary {
        Summary::of(&self.sorted_values())
    }

    /// Relative frequencies on the coarsest lattice containing the sample.
    pub fn to_pmf(&self) -> Result<Pmf> {
        let EmpiricalDist::Counts { table, trials } = self else {
            return Err(Error::LatticeMismatch("real-valued samples have no lattice".into()));
        };
        let (&lo, _) = table.iter().next().ok_or(Error::InsufficientSamples { needed: 1, got: 0 })?;
        let step = table.keys().fold(0i64, |g, &v| g.gcd(&(v - lo))).max(1);
        let hi = *table.keys().next_back().expect("nonempty");
        let mut probs = vec![0.0; ((hi - lo) / step) as usize + 1];
        for (&v, &c) in table {
            probs[((v - lo) / step) as usize] = c as f64 / *trials as f64;
        }
        Ok(Pmf { offset: lo, step, probs, eps: 0.0 })
    }
}

/// `½Σ|p - q|` over the union of supports, plus half of any mass that one
/// side lost to truncation and the other did not.
pub fn tv_distance(p: &Pmf, q: &Pmf) -> Result<f64> {
    let g = p.step.gcd(&q.step);
    if (p.offset - q.offset).rem_euclid(g) != 0 {
        return Err(Error::LatticeMismatch(format!(
            "{} + {}ℤ and {} + {}ℤ are disjoint",
            p.offset, p.step, q.offset, q.step
        )));
    }
    let mut union: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for (v, x) in p.iter() {
        union.entry(v).or_default().0 += x;
    }
    for (v, x) in q.iter() {
        union.entry(v).or_default().1 += x;
    }
    let l1: f64 = union.values().map(|(a, b)| (a - b).abs()).sum();
    let unmatched = (p.total_mass() - q.total_mass()).abs();
    Ok((0.5 * (l1 + unmatched)).min(1.0))
}

pub fn tv_distance_empirical(e: &EmpiricalDist, q: &Pmf) -> Result<f64> {
    tv_distance(&e.to_pmf()?, q)
}

/// Sampling-noise scale of an empirical TV: `½ Σ_x √(p̂(x)(1-p̂(x))/N)`.
pub fn tv_noise_scale(e: &EmpiricalDist) -> Result<f64> {
    let pmf = e.to_pmf()?;
    let n = e.trials() as f64;
    Ok(0.5 * pmf.probs.iter().map(|p| (p * (1.0 - p) / n).sqrt()).sum::<f64>())
}

/// TV between the empirical joint law of integer vectors and the product of
/// independent Poisson marginals with the given means. Exact: the mass of
/// the product law outside the observed set is added in closed form.
pub fn tv_joint_poisson(samples: &[Vec<u64>], lambdas: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut table: BTreeMap<&[u64], usize> = BTreeMap::new();
    for s in samples {
        if s.len() != lambdas.len() {
            return Err(Error::ShapeMismatch("sample length differs from number of means".into()));
        }
        *table.entry(s.as_slice()).or_insert(0) += 1;
    }
    let n = samples.len() as f64;
    let joint = |x: &[u64]| -> f64 {
        x.iter()
            .zip(lambdas)
            .map(|(&k, &l)| {
                if l == 0.0 {
                    (k == 0) as u8 as f64
                } else {
                    (-l + k as f64 * l.ln() - ln_gamma(k as f64 + 1.0)).exp()
                }
            })
            .product()
    };
    let mut observed_q = 0.0;
    let mut l1 = 0.0;
    for (x, &c) in &table {
        let q = joint(x);
        observed_q += q;
        l1 += (c as f64 / n - q).abs();
    }
    Ok(0.5 * (l1 + (1.0 - observed_q).max(0.0)))
}

pub const KS_MIN_SAMPLES: usize = 100;

/// `sup_x |F̂(x) - Φ((x - mean)/σ)|`.
pub fn ks_statistic(e: &EmpiricalDist, mean: f64, variance: f64) -> Result<f64> {
    let n = e.trials();
    if n < KS_MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: KS_MIN_SAMPLES, got: n });
    }
    let normal = Normal::new(mean, variance.sqrt()).map_err(|err| Error::Domain(err.to_string()))?;
    let sorted = e.sorted_values();
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (((i + 1) as f64 / n as f64) - f).max(f - i as f64 / n as f64)
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Standard error of the mean.
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Summary { count, mean: f64::NAN, variance: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let variance = if count > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        Summary { count, mean, variance, se: (variance / count as f64).sqrt() }
    }

    /// Standard error of the sample variance, `√((m4 - s⁴(N-3)/(N-1))/N)`.
    pub fn variance_se(values: &[f64]) -> f64 {
        let s = Summary::of(values);
        let n = s.count as f64;
        let m4 = values.iter().map(|v| (v - s.mean).powi(4)).sum::<f64>() / n;
        ((m4 - s.variance.powi(2) * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
    }
}

/// Monte Carlo draws of `Y_f = Σ_{k≤K} c_k(2d-1)^{-k/2} CNBW_k^∞` plus its
/// exact mean and variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YfReference {
    pub samples: EmpiricalDist,
    pub analytic_mean: f64,
    pub analytic_variance: f64,
}

/// Per-`k` weights `c_k (2d-1)^{-k/2}` for `k = 1..=K`.
fn yf_weights(d: usize, series: &ChebSeries, k_max: usize) -> Vec<f64> {
    (1..=k_max).map(|k| series.coeff(k) / branch_power(d, k)).collect()
}

/// Exact mean and variance of `Y_f`. Each `C_j` feeds every `CNBW_k` with
/// `j | k`, so the variance groups by `j`:
/// `Σ_j (a(d,j)/2j)·(2j Σ_{k: j|k} w_k)²`.
pub fn yf_moments(d: usize, series: &ChebSeries, k_max: usize) -> (f64, f64) {
    let w = yf_weights(d, series, k_max);
    let mean = (1..=k_max).map(|k| w[k - 1] * to_f64(&mean_cnbw_infty(d, k))).sum();
    let variance = (1..=k_max)
        .map(|j| {
            let lambda = to_f64(&a_closed_form(d, j)) / (2 * j) as f64;
            let load: f64 = (j..=k_max).step_by(j).map(|k| w[k - 1]).sum::<f64>() * (2 * j) as f64;
            lambda * load * load
        })
        .sum();
    (mean, variance)
}

/// One draw of `Y_f` from trial stream `trial`.
pub fn yf_draw(weights: &[f64], poissons: &[Poisson<f64>], seed: u64, trial: u64) -> f64 {
    let mut rng = rng::substream(seed, trial);
    let k_max = weights.len();
    let cycles: Vec<f64> = poissons.iter().map(|p| p.sample(&mut rng)).collect();
    (1..=k_max)
        .map(|k| {
            let walks: f64 = divisors(k).into_iter().map(|j| (2 * j) as f64 * cycles[j - 1]).sum();
            weights[k - 1] * walks
        })
        .sum()
}

pub fn yf_reference(d: usize, series: &ChebSeries, k_max: usize, trials: u64, seed: u64, exec: Execution) -> Result<YfReference> {
    if series.basis != (Basis::Gamma { d }) {
        return Err(Error::BasisMismatch(format!("Y_f needs a Γ-basis series for d = {d}")));
    }
    if k_max == 0 {
        return Err(Error::Domain("Y_f needs K >= 1".into()));
    }
    let weights = yf_weights(d, series, k_max);
    let poissons = (1..=k_max)
        .map(|j| {
            let lambda = to_f64(&a_closed_form(d, j)) / (2 * j) as f64;
            Poisson::new(lambda).map_err(|err| Error::Domain(format!("Poisson({lambda}): {err}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let draws = map_trials(trials, exec, |t| yf_draw(&weights, &poissons, seed, t));
    let (analytic_mean, analytic_variance) = yf_moments(d, series, k_max);
    Ok(YfReference { samples: EmpiricalDist::from_reals(draws), analytic_mean, analytic_variance })
}

/// `σ_f² = Σ_{k≥1} 2k c_k²` for a `Φ`-basis series.
pub fn sigma_f_squared(series: &ChebSeries) -> Result<f64> {
    if series.basis != Basis::Phi {
        return Err(Error::BasisMismatch("σ_f² is defined on Φ coefficients".into()));
    }
    Ok(series.coeffs.iter().enumerate().skip(1).map(|(k, c)| 2.0 * k as f64 * c * c).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::theta;

    /// Independent oracle: P(X = k) = e^{-λ} λ^k / k! summed directly.
    fn poisson_direct(lambda: f64, k: u64) -> f64 {
        let mut p = (-lambda).exp();
        for i in 1..=k {
            p *= lambda / i as f64;
        }
        p
    }

    #[test]
    fn poisson_values_and_moments() {
        let p = poisson_pmf(2.0, DEFAULT_EPS).unwrap();
        assert!((p.prob(0) - (-2.0f64).exp()).abs() < 1e-15);
        assert!((p.prob(0) - 0.135335).abs() < 1e-6);
        for lambda in [0.3, 2.0, 7.5, 40.0, 333.3] {
            let p = poisson_pmf(lambda, DEFAULT_EPS).unwrap();
            assert!(p.total_mass() <= 1.0 + 1e-12 && p.total_mass() >= 1.0 - DEFAULT_EPS - 1e-12);
            assert!((p.mean() - lambda).abs() < 1e-9 * lambda.max(1.0));
            assert!((p.variance() - lambda).abs() < 1e-9 * lambda.max(1.0));
            if lambda < 50.0 {
                for k in 0..20 {
                    let direct = poisson_direct(lambda, k as u64);
                    if direct < DEFAULT_EPS {
                        assert!(p.prob(k) <= direct * (1.0 + 1e-12));
                        continue;
                    }
                    assert!((p.prob(k) - direct).abs() <= 1e-12 * direct, "λ={lambda} k={k}");
                }
            }
        }
        let zero = poisson_pmf(0.0, DEFAULT_EPS).unwrap();
        assert_eq!(zero.probs, vec![1.0]);
        assert!(poisson_pmf(-1.0, DEFAULT_EPS).is_err());
    }

    #[test]
    fn cnbw_limit_laws() {
        let k1 = cnbw_infty_pmf(2, 1, DEFAULT_EPS).unwrap();
        assert!((k1.prob(0) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(k1.prob(1), 0.0);
        let k2 = cnbw_infty_pmf(2, 2, DEFAULT_EPS).unwrap();
        assert!((k2.prob(0) - (-5.0f64).exp()).abs() < 1e-15);
        // P(CNBW_2 = 4) = P(X=2, Y=0) + P(X=0, Y=1)
        let expected = poisson_direct(2.0, 2) * poisson_direct(3.0, 0) + poisson_direct(2.0, 0) * poisson_direct(3.0, 1);
        assert!((k2.prob(4) - expected).abs() < 1e-15);
        assert!((cnbw_infty_pmf(2, 4, DEFAULT_EPS).unwrap().mean() - 100.0).abs() < 1e-9 * 100.0);
    }

    #[test]
    fn cnbw_law_moments_match_divisor_sums() {
        for d in 1..=3 {
            for k in 1..=6 {
                let law = cnbw_infty_pmf(d, k, DEFAULT_EPS).unwrap();
                let mu = to_f64(&mean_cnbw_infty(d, k));
                let th = to_f64(&theta(d, k));
                assert!((law.mean() - mu).abs() <= 1e-9 * mu, "d={d} k={k}");
                assert!((law.second_moment() - th).abs() <= 1e-9 * th, "d={d} k={k}");
            }
        }
    }

    #[test]
    fn convolution_adds_moments() {
        let a = poisson_pmf(1.5, DEFAULT_EPS).unwrap().scaled(3);
        let b = poisson_pmf(4.0, DEFAULT_EPS).unwrap().scaled(2);
        let c = a.convolve(&b).unwrap();
        assert_eq!(c.step, 1);
        assert!((c.mean() - (a.mean() + b.mean())).abs() < 1e-9);
        assert!((c.variance() - (a.variance() + b.variance())).abs() < 1e-9);
    }

    #[test]
    fn tv_examples() {
        let p2 = poisson_pmf(2.0, DEFAULT_EPS).unwrap();
        let p3 = poisson_pmf(3.0, DEFAULT_EPS).unwrap();
        assert_eq!(tv_distance(&p2, &p2).unwrap(), 0.0);
        // brute-force oracle
        let brute: f64 = 0.5 * (0..200).map(|k| (poisson_direct(2.0, k) - poisson_direct(3.0, k)).abs()).sum::<f64>();
        let tv = tv_distance(&p2, &p3).unwrap();
        assert!((tv - brute).abs() < 1e-11);
        assert!((tv - 0.253486).abs() < 1e-6);
        assert!((tv_distance(&p3, &p2).unwrap() - tv).abs() < 1e-15);
        let p4 = poisson_pmf(4.0, DEFAULT_EPS).unwrap();
        assert!(tv_distance(&p2, &p4).unwrap() <= tv + tv_distance(&p3, &p4).unwrap() + 1e-12);
    }

    #[test]
    fn tv_rejects_disjoint_lattices() {
        let even = poisson_pmf(2.0, DEFAULT_EPS).unwrap().scaled(2);
        let mut odd = even.clone();
        odd.offset += 1;
        assert!(matches!(tv_distance(&even, &odd), Err(Error::LatticeMismatch(_))));
    }

    #[test]
    fn empirical_pmf_lattice() {
        let e = EmpiricalDist::from_integers([4, 8, 8, 12, 4]);
        let p = e.to_pmf().unwrap();
        assert_eq!((p.offset, p.step), (4, 4));
        assert!((p.prob(8) - 0.4).abs() < 1e-15);
        let same = EmpiricalDist::from_integers([3; 5]).to_pmf().unwrap();
        assert_eq!(same.probs, vec![1.0]);
    }

    #[test]
    fn joint_tv_of_exact_frequencies_is_small() {
        // every vector observed with its exact product probability (up to the tail)
        let lambdas = [0.5, 1.0];
        let p = |k: u64, l: f64| poisson_direct(l, k);
        let mut samples = Vec::new();
        for a in 0..8u64 {
            for b in 0..10u64 {
                let copies = (p(a, 0.5) * p(b, 1.0) * 1e6).round() as usize;
                samples.extend(std::iter::repeat_n(vec![a, b], copies));
            }
        }
        assert!(tv_joint_poisson(&samples, &lambdas).unwrap() < 1e-4);
        assert!(tv_joint_poisson(&[vec![9, 9]], &lambdas).unwrap() > 0.99);
    }

    #[test]
    fn ks_against_reference_normal() {
        let normal = Normal::new(0.0, 2f64.sqrt()).unwrap();
        let mut rng = rng::substream(4, 0);
        let draws: Vec<f64> = (0..10_000).map(|_| normal.inverse_cdf(rng::unit_f64(&mut rng).max(1e-300))).collect();
        let ks = ks_statistic(&EmpiricalDist::from_reals(draws), 0.0, 2.0).unwrap();
        assert!(ks <= 0.03, "ks {ks}");
        let constant = EmpiricalDist::from_reals(vec![0.0; 200]);
        assert!(ks_statistic(&constant, 0.0, 2.0).unwrap() >= 0.5);
        assert!(ks_statistic(&EmpiricalDist::from_reals(vec![0.0; 50]), 0.0, 1.0).is_err());
    }

    #[test]
    fn yf_moments_for_square() {
        // x² = Γ_2 + 4/3 at d = 2
        let series = ChebSeries::new(Basis::Gamma { d: 2 }, vec![4.0 / 3.0, 0.0, 1.0]);
        let (mean, var) = yf_moments(2, &series, 2);
        assert!((mean - 16.0 / 3.0).abs() < 1e-12);
        assert!((var - 56.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn yf_monte_carlo_matches_moments() {
        let series = ChebSeries::new(Basis::Gamma { d: 2 }, vec![0.0, 0.5, 1.0, -0.3, 0.2]);
        let reference = yf_reference(2, &series, 4, 100_000, 77, Execution::Parallel).unwrap();
        let values = reference.samples.sorted_values();
        let s = reference.samples.summary();
        assert!((s.mean - reference.analytic_mean).abs() <= 3.0 * s.se);
        let var_se = Summary::variance_se(&values);
        assert!((s.variance - reference.analytic_variance).abs() <= 3.0 * var_se);
        assert!(yf_reference(2, &series.to_phi(), 4, 10, 1, Execution::Serial).is_err());
    }

    #[test]
    fn sigma_squared() {
        assert_eq!(sigma_f_squared(&ChebSeries::new(Basis::Phi, vec![2.0, 0.0, 1.0])).unwrap(), 4.0);
        assert_eq!(sigma_f_squared(&ChebSeries::new(Basis::Phi, vec![5.0])).unwrap(), 0.0);
        assert_eq!(sigma_f_squared(&ChebSeries::new(Basis::Phi, vec![0.0, 1.0, 0.0, 1.0])).unwrap(), 8.0);
        assert!(sigma_f_squared(&ChebSeries::new(Basis::Gamma { d: 2 }, vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn bernoulli_stream_standard_error() {
        let mut rng = rng::substream(10, 0);
        let draws: Vec<f64> = (0..10_000).map(|_| (rng::bounded(&mut rng, 2)) as f64).collect();
        let s = Summary::of(&draws);
        assert!((s.se - 0.005).abs() < 1e-4);
        assert!((s.mean - 0.5).abs() <= 3.0 * s.se);
    }
}
