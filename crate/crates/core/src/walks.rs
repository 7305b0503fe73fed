//! Exact counts of cycles and (cyclically) non-backtracking closed walks.
//!
//! Letters are handled by alphabet code (`2·generator + inverted`), so the
//! inverse of code `c` is `c ^ 1` and "no immediate reversal" is `c != prev ^ 1`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PermutationGraph;
use crate::words::{self, divisors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountKind {
    Cycles,
    Nbw,
    Cnbw,
    Bad,
}

impl fmt::Display for CountKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountKind::Cycles => "C",
            CountKind::Nbw => "NBW",
            CountKind::Cnbw => "CNBW",
            CountKind::Bad => "B",
        })
    }
}

/// Integer counts indexed by length `1..=r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    pub kind: CountKind,
    pub n: usize,
    pub d: usize,
    values: Vec<u64>,
}

impl CountVector {
    pub fn new(kind: CountKind, n: usize, d: usize, values: Vec<u64>) -> Self {
        CountVector { kind, n, d, values }
    }

    pub fn r(&self) -> usize {
        self.values.len()
    }

    /// Count at length `k` (1-based).
    pub fn get(&self, k: usize) -> u64 {
        self.values[k - 1]
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// `(k, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (i + 1, v))
    }
}

/// `C_k` for `k = 1..=r`: closed trails with distinct vertices and a
/// cyclically reduced word, each cycle counted once per class of its `2k`
/// cyclic and inverted cyclic shifts.
pub fn count_cycles(g: &PermutationGraph, r: usize) -> Result<CountVector> {
    let n = g.n();
    let alphabet = 2 * g.d();
    let mut trails = vec![0u64; r];
    let mut on_path = vec![false; n];
    for start in 0..n {
        on_path[start] = true;
        for first in 0..alphabet {
            let next = g.step_code(start, first);
            extend_trail(g, alphabet, start, first, first, next, 1, r, &mut on_path, &mut trails);
        }
        on_path[start] = false;
    }
    let mut values = Vec::with_capacity(r);
    for (i, &t) in trails.iter().enumerate() {
        let shifts = 2 * (i as u64 + 1);
        if t % shifts != 0 {
            return Err(Error::Inconsistent(format!("{t} closed trails of length {} is not a multiple of {shifts}", i + 1)));
        }
        values.push(t / shifts);
    }
    Ok(CountVector::new(CountKind::Cycles, n, g.d(), values))
}

// `v` is reached after `len` letters, the last one `prev`.
#[allow(clippy::too_many_arguments)]
fn extend_trail(
    g: &PermutationGraph,
    alphabet: usize,
    start: usize,
    first: usize,
    prev: usize,
    v: usize,
    len: usize,
    r: usize,
    on_path: &mut [bool],
    trails: &mut [u64],
) {
    if v == start {
        if prev ^ 1 != first {
            trails[len - 1] += 1;
        }
        return;
    }
    if on_path[v] || len == r {
        return;
    }
    on_path[v] = true;
    for c in 0..alphabet {
        if c != prev ^ 1 {
            extend_trail(g, alphabet, start, first, c, g.step_code(v, c), len + 1, r, on_path, trails);
        }
    }
    on_path[v] = false;
}

/// `CNBW_k` by listing every cyclically reduced word `w` of length `k` and
/// counting the fixed points of `w` acting on the vertices.
pub fn count_cnbw_words(g: &PermutationGraph, r: usize) -> Result<CountVector> {
    let mut values = Vec::with_capacity(r);
    for k in 1..=r {
        let mut total = 0u64;
        for w in words::enumerate_cyclically_reduced(g.d(), k)? {
            total += (0..g.n()).filter(|&v| g.apply_word(&w, v) == v).count() as u64;
        }
        values.push(total);
    }
    Ok(CountVector::new(CountKind::Cnbw, g.n(), g.d(), values))
}

/// Largest state space (`2dn`) the transfer counters accept.
pub const TRANSFER_STATE_BUDGET: usize = 1 << 26;

/// Sparse vector over the `2dn` states `(vertex, arriving letter)`.
struct Frontier {
    counts: Vec<u64>,
    touched: Vec<usize>,
}

impl Frontier {
    fn new(states: usize) -> Self {
        Frontier { counts: vec![0; states], touched: Vec::new() }
    }

    fn add(&mut self, state: usize, amount: u64) -> Result<()> {
        let slot = &mut self.counts[state];
        if *slot == 0 {
            self.touched.push(state);
        }
        *slot = slot.checked_add(amount).ok_or(Error::Overflow("propagating walk counts"))?;
        Ok(())
    }

    fn clear(&mut self) {
        for &s in &self.touched {
            self.counts[s] = 0;
        }
        self.touched.clear();
    }
}

/// One application of the non-backtracking operator: state `(v, a)` moves
/// to `(b(v), b)` for every letter `b != a⁻¹`.
fn advance(g: &PermutationGraph, alphabet: usize, from: &Frontier, to: &mut Frontier) -> Result<()> {
    to.clear();
    for &state in &from.touched {
        let count = from.counts[state];
        let (v, a) = (state / alphabet, state % alphabet);
        for b in 0..alphabet {
            if b != a ^ 1 {
                to.add(g.step_code(v, b) * alphabet + b, count)?;
            }
        }
    }
    Ok(())
}

fn check_states(g: &PermutationGraph) -> Result<usize> {
    let states = 2 * g.d() * g.n();
    if states > TRANSFER_STATE_BUDGET {
        return Err(Error::BudgetExceeded { size: states as f64, budget: TRANSFER_STATE_BUDGET as f64 });
    }
    Ok(states)
}

/// `CNBW_k = trace(B^k)` for the non-backtracking operator `B` on
/// `(vertex, arriving letter)` states, by propagating each unit state.
pub fn count_cnbw_transfer(g: &PermutationGraph, r: usize) -> Result<CountVector> {
    let states = check_states(g)?;
    let alphabet = 2 * g.d();
    let mut values = vec![0u64; r];
    let mut cur = Frontier::new(states);
    let mut nxt = Frontier::new(states);
    for start in 0..states {
        cur.clear();
        cur.add(start, 1)?;
        for value in values.iter_mut() {
            advance(g, alphabet, &cur, &mut nxt)?;
            std::mem::swap(&mut cur, &mut nxt);
            *value += cur.counts[start];
        }
    }
    Ok(CountVector::new(CountKind::Cnbw, g.n(), g.d(), values))
}

/// `NBW_k` from `CNBW_k` by the tail recursion
/// `NBW_k = CNBW_k + (2d-1)·NBW_{k-2} - CNBW_{k-2}` (`k >= 3`),
/// with `NBW_k = CNBW_k` for `k = 1, 2`.
pub fn nbw_from_cnbw(cnbw: &CountVector) -> Result<CountVector> {
    let branch = 2 * cnbw.d as u64 - 1;
    let mut nbw: Vec<u64> = Vec::with_capacity(cnbw.r());
    for k in 1..=cnbw.r() {
        let value = if k <= 2 {
            cnbw.get(k)
        } else {
            let with_tail = branch
                .checked_mul(nbw[k - 3])
                .and_then(|x| x.checked_add(cnbw.get(k)))
                .ok_or(Error::Overflow("applying the tail recursion"))?;
            with_tail
                .checked_sub(cnbw.get(k - 2))
                .ok_or_else(|| Error::Inconsistent(format!("negative NBW_{k}")))?
        };
        nbw.push(value);
    }
    Ok(CountVector::new(CountKind::Nbw, cnbw.n, cnbw.d, nbw))
}

/// `NBW_k` via the tail recursion on top of [`count_cnbw_transfer`].
pub fn count_nbw(g: &PermutationGraph, r: usize) -> Result<CountVector> {
    nbw_from_cnbw(&count_cnbw_transfer(g, r)?)
}

/// Direct count of closed non-backtracking walks: from each vertex, take
/// every first letter, propagate, and collect walks that end at the start
/// (any final letter).
pub fn count_nbw_dp(g: &PermutationGraph, r: usize) -> Result<CountVector> {
    let states = check_states(g)?;
    let alphabet = 2 * g.d();
    let mut values = vec![0u64; r];
    let mut cur = Frontier::new(states);
    let mut nxt = Frontier::new(states);
    for start in 0..g.n() {
        cur.clear();
        for c in 0..alphabet {
            cur.add(g.step_code(start, c) * alphabet + c, 1)?;
        }
        for k in 1..=r {
            if k > 1 {
                advance(g, alphabet, &cur, &mut nxt)?;
                std::mem::swap(&mut cur, &mut nxt);
            }
            values[k - 1] += (0..alphabet).map(|c| cur.counts[start * alphabet + c]).sum::<u64>();
        }
    }
    Ok(CountVector::new(CountKind::Nbw, g.n(), g.d(), values))
}

/// `B_k = CNBW_k - Σ_{j|k} 2j·C_j`.
pub fn bad_walks_from(cycles: &CountVector, cnbw: &CountVector) -> Result<CountVector> {
    if cycles.r() != cnbw.r() || cycles.n != cnbw.n || cycles.d != cnbw.d {
        return Err(Error::ShapeMismatch("cycle and CNBW vectors differ in (n, d, r)".into()));
    }
    let mut values = Vec::with_capacity(cnbw.r());
    for k in 1..=cnbw.r() {
        let repeated: u64 = divisors(k).into_iter().map(|j| 2 * j as u64 * cycles.get(j)).sum();
        let bad = cnbw.get(k).checked_sub(repeated).ok_or_else(|| {
            Error::Inconsistent(format!("CNBW_{k} = {} is below its repeated-cycle part {repeated}", cnbw.get(k)))
        })?;
        values.push(bad);
    }
    Ok(CountVector::new(CountKind::Bad, cnbw.n, cnbw.d, values))
}

pub fn bad_walks(g: &PermutationGraph, r: usize) -> Result<CountVector> {
    bad_walks_from(&count_cycles(g, r)?, &count_cnbw_transfer(g, r)?)
}

/// `(2d-1)^{k/2}` in floating point.
pub fn branch_power(d: usize, k: usize) -> f64 {
    let b = (2 * d - 1) as f64;
    let half = b.powi((k / 2) as i32);
    if k % 2 == 0 {
        half
    } else {
        half * b.sqrt()
    }
}

/// `Ñ_k = (2d-1)^{-k/2}(CNBW_k - μ_k(d))`; the difference is taken exactly
/// before scaling.
pub fn centered_cnbw(cnbw: &CountVector) -> Vec<f64> {
    cnbw.iter()
        .map(|(k, value)| {
            let diff = BigInt::from(value) - BigInt::from(words::mean_cnbw_infty(cnbw.d, k));
            diff.to_f64().unwrap_or(f64::NAN) / branch_power(cnbw.d, k)
        })
        .collect()
}

/// Which counter produces `CNBW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CnbwMethod {
    /// The cheaper of `words` and `transfer` for the graph's size.
    Auto,
    Words,
    Transfer,
    Spectral,
}

/// The exact counter with the smaller operation estimate: word enumeration
/// costs about `n Σ_k k(2d-1)^k`, propagation about
/// `2dn Σ_k (2d-1)·min((2d-1)^k, 2dn)`.
pub fn cheaper_exact_method(n: usize, d: usize, r: usize) -> CnbwMethod {
    let branch = (2 * d - 1) as f64;
    let states = (2 * d * n) as f64;
    let words: f64 = (1..=r).map(|k| k as f64 * branch.powi(k as i32)).sum::<f64>() * n as f64;
    let transfer: f64 = (1..=r).map(|k| branch * branch.powi(k as i32).min(states)).sum::<f64>() * states;
    if words <= transfer && (2.0 * d as f64).powi(r as i32) <= words::ENUMERATION_BUDGET {
        CnbwMethod::Words
    } else {
        CnbwMethod::Transfer
    }
}

pub fn count_cnbw(g: &PermutationGraph, r: usize, method: CnbwMethod) -> Result<CountVector> {
    match method {
        CnbwMethod::Auto => count_cnbw(g, r, cheaper_exact_method(g.n(), g.d(), r)),
        CnbwMethod::Words => count_cnbw_words(g, r),
        CnbwMethod::Transfer => count_cnbw_transfer(g, r),
        CnbwMethod::Spectral => {
            let spectrum = crate::spectra::eigenvalues(&g.adjacency(), g.d())?;
            crate::spectra::cnbw_from_spectrum(&spectrum, r).map(|s| s.counts)
        }
    }
}
