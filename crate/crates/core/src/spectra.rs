//! Spectrum of the scaled adjacency `(2d-1)^{-1/2} A`, the walk/eigenvalue
//! trace identity, the second eigenvalue, and the edge-discrepancy audit.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::chebyshev::phi_values;
use crate::chebyshev::gamma_shift;
use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, PermutationGraph};
use crate::rng;
use crate::walks::{branch_power, CountKind, CountVector};

/// Largest distance from an integer tolerated when rounding a spectral walk count.
pub const ROUNDING_ALARM: f64 = 1e-3;

/// Eigenvalues of `(2d-1)^{-1/2} A`, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub n: usize,
    pub d: usize,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(n: usize, d: usize, mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Spectrum { n, d, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `2d/√(2d-1)`, the eigenvalue of the constant vector.
    pub fn trivial_eigenvalue(&self) -> f64 {
        2.0 * self.d as f64 / ((2 * self.d - 1) as f64).sqrt()
    }
}

fn to_dense(a: &AdjacencyMatrix) -> Result<DMatrix<f64>> {
    if !a.is_symmetric() {
        let n = a.n();
        let worst = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (a.get(i, j) as f64 - a.get(j, i) as f64).abs())
            .fold(0.0, f64::max);
        return Err(Error::NotSymmetric(worst));
    }
    Ok(DMatrix::from_row_slice(a.n(), a.n(), &a.to_f64()))
}

/// Full spectrum of `(2d-1)^{-1/2} A` (eigenvalues only).
pub fn eigenvalues(a: &AdjacencyMatrix, d: usize) -> Result<Spectrum> {
    let dense = to_dense(a)?;
    let scale = ((2 * d - 1) as f64).sqrt();
    let values = dense.symmetric_eigenvalues().iter().map(|&x| x / scale).collect();
    Ok(Spectrum::new(a.n(), d, values))
}

/// Eigenpairs of the unscaled `A`, largest first, with the largest residual
/// `‖Av - θv‖` over all pairs.
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub max_residual: f64,
}

pub fn eigen_decomposition(a: &AdjacencyMatrix) -> Result<EigenDecomposition> {
    let dense = to_dense(a)?;
    let n = a.n();
    let eig = SymmetricEigen::try_new(dense.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::Domain("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let mut max_residual: f64 = 0.0;
    for (c, &theta) in values.iter().enumerate() {
        let v = vectors.column(c);
        let res = (&dense * v - v * theta).norm();
        max_residual = max_residual.max(res);
    }
    Ok(EigenDecomposition { values, vectors, max_residual })
}

/// `max(λ_2, |λ_n|)` of the unscaled adjacency.
pub fn second_eigenvalue(a: &AdjacencyMatrix) -> Result<f64> {
    if a.n() < 2 {
        return Err(Error::Domain("second eigenvalue needs n >= 2".into()));
    }
    let mut values: Vec<f64> = to_dense(a)?.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values[1].max(values[values.len() - 1].abs()))
}

/// Same quantity from an already computed scaled spectrum.
pub fn second_eigenvalue_of(spec: &Spectrum) -> f64 {
    let v = spec.values();
    let scale = ((2 * spec.d - 1) as f64).sqrt();
    v[1].max(v[v.len() - 1].abs()) * scale
}

/// `C(m) = 36000 + 2400 m`; the bound is `C(m)·√d`.
pub fn eigenvalue_bound_constant(m: f64) -> f64 {
    36000.0 + 2400.0 * m
}

/// `CNBW_k` reconstructed from the spectrum, plus the pre-rounding values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCounts {
    pub counts: CountVector,
    pub unrounded: Vec<f64>,
    pub max_rounding: f64,
}

/// `CNBW_k = (2d-1)^{k/2} Σ_i Γ_k(λ_i)`, rounded to the nearest integer.
/// Fails if any value sits more than [`ROUNDING_ALARM`] from an integer.
pub fn cnbw_from_spectrum(spec: &Spectrum, r: usize) -> Result<SpectralCounts> {
    let d = spec.d;
    let mut sums = vec![0.0; r + 1];
    for &lambda in spec.values() {
        for (s, phi) in sums.iter_mut().zip(phi_values(lambda, r)) {
            *s += phi;
        }
    }
    let mut unrounded = Vec::with_capacity(r);
    let mut values = Vec::with_capacity(r);
    let mut max_rounding: f64 = 0.0;
    for k in 1..=r {
        let gamma_sum = sums[k] + spec.n as f64 * gamma_shift(d, k);
        let value = branch_power(d, k) * gamma_sum;
        let rounded = value.round();
        let distance = (value - rounded).abs();
        if distance > ROUNDING_ALARM || rounded < 0.0 {
            return Err(Error::IdentityViolation { k, value, distance });
        }
        max_rounding = max_rounding.max(distance);
        unrounded.push(value);
        values.push(rounded as u64);
    }
    Ok(SpectralCounts {
        counts: CountVector::new(CountKind::Cnbw, spec.n, d, values),
        unrounded,
        max_rounding,
    })
}

/// `e(A,B) = #{(i, a) : a ∈ A, π_i(a) ∈ B}`.
pub fn edge_count(g: &PermutationGraph, set_a: &[usize], set_b: &[usize]) -> u64 {
    let mut in_b = vec![false; g.n()];
    for &b in set_b {
        in_b[b] = true;
    }
    g.perms()
        .iter()
        .map(|p| set_a.iter().filter(|&&a| in_b[p.apply(a)]).count() as u64)
        .sum()
}

/// `μ(A,B) = |A||B|d/n`.
pub fn expected_edge_count(n: usize, d: usize, size_a: usize, size_b: usize) -> f64 {
    size_a as f64 * size_b as f64 * d as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyConstants {
    pub m: f64,
    pub c1: f64,
    pub c2: f64,
}

impl DiscrepancyConstants {
    /// `c_1 = e^4`, `c_2 = 2e^2(6 + m)`.
    pub fn for_m(m: f64) -> Self {
        let e = std::f64::consts::E;
        DiscrepancyConstants { m, c1: e.powi(4), c2: 2.0 * e * e * (6.0 + m) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscrepancyOutcome {
    /// `e/μ <= c_1`.
    Ratio,
    /// `e log(e/μ) <= c_2 (|A|∨|B|) log(n/(|A|∨|B|))`.
    Logarithmic,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub size_a: usize,
    pub size_b: usize,
    pub edges: u64,
    pub mu: f64,
    pub outcome: DiscrepancyOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub n: usize,
    pub d: usize,
    pub constants: DiscrepancyConstants,
    pub records: Vec<PairRecord>,
}

impl DiscrepancyReport {
    pub fn violations(&self) -> usize {
        self.records.iter().filter(|r| r.outcome == DiscrepancyOutcome::Violation).count()
    }
}

pub fn classify_pair(n: usize, edges: u64, mu: f64, larger: usize, c: &DiscrepancyConstants) -> DiscrepancyOutcome {
    let e = edges as f64;
    if e / mu <= c.c1 {
        return DiscrepancyOutcome::Ratio;
    }
    // e > c_1 μ > 0 here, so the logarithm is finite
    let lhs = e * (e / mu).ln();
    let rhs = c.c2 * larger as f64 * (n as f64 / larger as f64).ln();
    if lhs <= rhs {
        DiscrepancyOutcome::Logarithmic
    } else {
        DiscrepancyOutcome::Violation
    }
}

pub type VertexPair = (Vec<usize>, Vec<usize>);

pub fn discrepancy_check(g: &PermutationGraph, pairs: &[VertexPair], m: f64) -> Result<DiscrepancyReport> {
    let constants = DiscrepancyConstants::for_m(m);
    let (n, d) = (g.n(), g.d());
    let mut records = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Domain("discrepancy sets must be nonempty".into()));
        }
        let edges = edge_count(g, a, b);
        let mu = expected_edge_count(n, d, a.len(), b.len());
        let outcome = classify_pair(n, edges, mu, a.len().max(b.len()), &constants);
        records.push(PairRecord { size_a: a.len(), size_b: b.len(), edges, mu, outcome });
    }
    Ok(DiscrepancyReport { n, d, constants, records })
}

/// `count` pairs of uniform random subsets whose sizes are drawn from a
/// log-spaced ladder `1, 2, 4, …, n`.
pub fn sample_pairs(n: usize, count: usize, rng: &mut impl RngCore) -> Vec<VertexPair> {
    let mut ladder = Vec::new();
    let mut s = 1usize;
    while s < n {
        ladder.push(s);
        s *= 2;
    }
    ladder.push(n);
    let subset = |rng: &mut dyn RngCore| {
        let size = ladder[rng::bounded(rng, ladder.len() as u64) as usize];
        let mut all: Vec<usize> = (0..n).collect();
        // partial Fisher–Yates: the first `size` slots are a uniform subset
        for i in 0..size {
            let j = i + rng::bounded(rng, (n - i) as u64) as usize;
            all.swap(i, j);
        }
        all.truncate(size);
        all.sort_unstable();
        all
    };
    (0..count).map(|_| (subset(rng), subset(rng))).collect()
}

/// Every pair of nonempty subsets; only for `n <= 12`.
pub fn exhaustive_pairs(n: usize) -> Result<Vec<VertexPair>> {
    if n > 12 {
        return Err(Error::BudgetExceeded { size: 4f64.powi(n as i32), budget: 4f64.powi(12) });
    }
    let subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
        .collect();
    Ok(subsets.iter().flat_map(|a| subsets.iter().map(move |b| (a.clone(), b.clone()))).collect())
}
