//! Cyclically reduced words over the letters `π_1, π_1⁻¹, …, π_d, π_d⁻¹`.
//!
//! Counts are exact: `a(d,k)` and the divisor sums derived from it are big
//! integers, and finite-`n` expectations are big rationals.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest `(2d)^k` that [`enumerate_cyclically_reduced`] will walk.
pub const ENUMERATION_BUDGET: f64 = 1e8;

/// One generator or its inverse. `generator` is zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub generator: usize,
    pub inverted: bool,
}

impl Letter {
    pub const fn new(generator: usize, inverted: bool) -> Self {
        Letter { generator, inverted }
    }

    pub const fn forward(generator: usize) -> Self {
        Letter::new(generator, false)
    }

    pub const fn backward(generator: usize) -> Self {
        Letter::new(generator, true)
    }

    pub const fn inverse(self) -> Self {
        Letter::new(self.generator, !self.inverted)
    }

    /// Position in the alphabet order `π_1 < π_1⁻¹ < π_2 < …`.
    /// The inverse of code `c` is `c ^ 1`.
    pub const fn code(self) -> usize {
        2 * self.generator + self.inverted as usize
    }

    pub const fn from_code(code: usize) -> Self {
        Letter::new(code / 2, code % 2 == 1)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverted {
            write!(f, "p{}'", self.generator + 1)
        } else {
            write!(f, "p{}", self.generator + 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Word { letters }
    }

    pub fn from_codes(codes: &[usize]) -> Self {
        Word::new(codes.iter().map(|&c| Letter::from_code(c)).collect())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Largest generator index used, plus one.
    pub fn generators_used(&self) -> usize {
        self.letters.iter().map(|l| l.generator + 1).max().unwrap_or(0)
    }

    /// No adjacent inverse pair, including the wrap-around pair (last, first).
    pub fn is_cyclically_reduced(&self) -> bool {
        is_cyclically_reduced(&self.letters)
    }

    /// No adjacent inverse pair, ignoring the wrap-around.
    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|p| p[0] != p[1].inverse())
    }

    /// The formal inverse: letters reversed and inverted.
    pub fn inverse(&self) -> Word {
        Word::new(self.letters.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn profile(&self, d: usize) -> WordProfile {
        let mut e = vec![0usize; d];
        for l in &self.letters {
            e[l.generator] += 1;
        }
        WordProfile { multiplicities: e }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Occurrences of each generator (either orientation) in a word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordProfile {
    pub multiplicities: Vec<usize>,
}

impl WordProfile {
    pub fn total(&self) -> usize {
        self.multiplicities.iter().sum()
    }
}

pub fn is_cyclically_reduced(letters: &[Letter]) -> bool {
    match (letters.first(), letters.last()) {
        (Some(&first), Some(&last)) => {
            first != last.inverse() && letters.windows(2).all(|p| p[0] != p[1].inverse())
        }
        _ => false,
    }
}

fn check_dk(d: usize, k: usize) -> Result<()> {
    if d == 0 || k == 0 {
        return Err(Error::Domain(format!("need d >= 1 and k >= 1, got d={d}, k={k}")));
    }
    Ok(())
}

/// `a(d,k)` from the parity closed form: `(2d-1)^k - 1 + 2d` for even `k`,
/// `(2d-1)^k + 1` for odd `k`.
pub fn a_closed_form(d: usize, k: usize) -> BigUint {
    assert!(d >= 1 && k >= 1, "a(d,k) needs d, k >= 1");
    let base = BigUint::from(2 * d - 1);
    let power = num_traits::pow(base, k);
    if k % 2 == 0 {
        power + BigUint::from(2 * d) - BigUint::one()
    } else {
        power + BigUint::one()
    }
}

/// `a(d,k)` by inclusion–exclusion over the set of positions forced to be
/// an inverse pair with their successor:
/// `Σ_{l=0}^{k-1} C(k,l)(-1)^l (2d)^{k-l}`, plus `2d` for even `k`
/// (all `k` positions forced: an alternating letter/inverse word).
pub fn a_inclusion_exclusion(d: usize, k: usize) -> BigUint {
    assert!(d >= 1 && k >= 1, "a(d,k) needs d, k >= 1");
    let two_d = BigInt::from(2 * d);
    let mut total = BigInt::zero();
    let mut binom = BigInt::one();
    for l in 0..k {
        let term = &binom * num_traits::pow(two_d.clone(), k - l);
        if l % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
        binom = binom * BigInt::from(k - l) / BigInt::from(l + 1);
    }
    if k % 2 == 0 {
        total += &two_d;
    }
    debug_assert!(!total.is_negative());
    total.to_biguint().expect("inclusion-exclusion count is nonnegative")
}

/// All cyclically reduced words of length `k` on `2d` letters, in
/// lexicographic order of [`Letter::code`].
pub fn enumerate_cyclically_reduced(d: usize, k: usize) -> Result<Vec<Word>> {
    check_dk(d, k)?;
    let size = (2.0 * d as f64).powi(k as i32);
    if size > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { size, budget: ENUMERATION_BUDGET });
    }
    let mut out = Vec::new();
    let mut codes = Vec::with_capacity(k);
    extend_reduced(2 * d, k, &mut codes, &mut out);
    Ok(out)
}

fn extend_reduced(alphabet: usize, k: usize, codes: &mut Vec<usize>, out: &mut Vec<Word>) {
    if codes.len() == k {
        if codes[0] != codes[k - 1] ^ 1 {
            out.push(Word::from_codes(codes));
        }
        return;
    }
    for c in 0..alphabet {
        if let Some(&prev) = codes.last() {
            if c == prev ^ 1 {
                continue;
            }
        }
        codes.push(c);
        extend_reduced(alphabet, k, codes, out);
        codes.pop();
    }
}

/// `[n]_j = n(n-1)…(n-j+1)`.
pub fn falling_factorial(n: u64, j: u64) -> Result<BigUint> {
    if j > n {
        return Err(Error::Domain(format!("falling factorial [{n}]_{j} needs j <= n")));
    }
    Ok((n - j + 1..=n).fold(BigUint::one(), |acc, x| acc * x))
}

/// Exact `E[C_k]` at finite `n`:
/// `(1/2k) Σ_w [n]_k ∏_i 1/[n]_{e_w^i}` over cyclically reduced `w`.
pub fn expected_cycle_count_exact(n: u64, d: usize, k: usize) -> Result<BigRational> {
    check_dk(d, k)?;
    if n < k as u64 {
        return Err(Error::Domain(format!("need n >= k, got n={n}, k={k}")));
    }
    let mut by_profile: BTreeMap<WordProfile, u64> = BTreeMap::new();
    for w in enumerate_cyclically_reduced(d, k)? {
        *by_profile.entry(w.profile(d)).or_insert(0) += 1;
    }
    let mut sum = BigRational::zero();
    for (profile, count) in by_profile {
        let term = expected_category_count(n, k as u64, &profile.multiplicities)?;
        sum += term * BigRational::from_integer(BigInt::from(count));
    }
    Ok(sum / BigRational::from_integer(BigInt::from(2 * k)))
}

/// Expected number of appearances of one category with `vertex_count`
/// vertices and `e[i]` edges labelled by generator `i`:
/// `[n]_v ∏_i 1/[n]_{e_i}`.
pub fn expected_category_count(n: u64, vertex_count: u64, edges: &[usize]) -> Result<BigRational> {
    if vertex_count > n {
        return Err(Error::Domain(format!("category has {vertex_count} vertices but n = {n}")));
    }
    let mut denom = BigUint::one();
    for &e in edges {
        denom *= falling_factorial(n, e as u64)?;
    }
    let numer = falling_factorial(n, vertex_count)?;
    Ok(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
}

/// Positive divisors of `k` in increasing order.
pub fn divisors(k: usize) -> Vec<usize> {
    (1..=k).filter(|j| k % j == 0).collect()
}

/// `μ_k(d) = Σ_{j|k} a(d,j)`, the limiting mean of `CNBW_k`.
pub fn mean_cnbw_infty(d: usize, k: usize) -> BigUint {
    divisors(k).into_iter().map(|j| a_closed_form(d, j)).sum()
}

/// `Θ_k = Σ_{j|k} 2j a(d,j) + μ_k(d)²`, the limiting second moment of `CNBW_k`.
pub fn theta(d: usize, k: usize) -> BigUint {
    let var: BigUint = divisors(k)
        .into_iter()
        .map(|j| BigUint::from(2 * j) * a_closed_form(d, j))
        .sum();
    let mean = mean_cnbw_infty(d, k);
    var + &mean * &mean
}

/// Lossy conversion used by floating-point consumers.
pub fn to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
