//! The permutation model: `d` independent uniform permutations of `0..n`
//! define a `2d`-regular multigraph with an edge `{i, π_j(i)}` for every
//! vertex `i` and generator `j`. Fixed points are loops and count twice
//! toward the degree.

use std::collections::BTreeSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::words::{Letter, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    image: Vec<usize>,
    preimage: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let image: Vec<usize> = (0..n).collect();
        Permutation { preimage: image.clone(), image }
    }

    /// Builds a permutation from its image table, rejecting non-bijections.
    pub fn from_image(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut preimage = vec![usize::MAX; n];
        for (i, &j) in image.iter().enumerate() {
            if j >= n || preimage[j] != usize::MAX {
                return Err(Error::Domain(format!("image table is not a permutation of 0..{n}")));
            }
            preimage[j] = i;
        }
        Ok(Permutation { image, preimage })
    }

    /// Single cycle `0 → 1 → … → n-1 → 0`.
    pub fn cycle(n: usize) -> Self {
        Permutation::from_image((0..n).map(|i| (i + 1) % n).collect()).expect("rotation is a bijection")
    }

    pub fn random(n: usize, rng: &mut impl RngCore) -> Self {
        let mut image: Vec<usize> = (0..n).collect();
        rng::shuffle(rng, &mut image);
        Permutation::from_image(image).expect("shuffle preserves bijection")
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    #[inline]
    pub fn apply(&self, v: usize) -> usize {
        self.image[v]
    }

    #[inline]
    pub fn apply_inverse(&self, v: usize) -> usize {
        self.preimage[v]
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn fixed_points(&self) -> usize {
        self.image.iter().enumerate().filter(|&(i, &j)| i == j).count()
    }

    /// Exchanges the images of `a` and `b`, i.e. composes with the
    /// transposition of `π(a)` and `π(b)` on the left.
    fn swap_images(&mut self, a: usize, b: usize) {
        let (ia, ib) = (self.image[a], self.image[b]);
        self.image[a] = ib;
        self.image[b] = ia;
        self.preimage[ib] = a;
        self.preimage[ia] = b;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationGraph {
    n: usize,
    perms: Vec<Permutation>,
}

/// On-disk form: `{ "n": .., "d": .., "perms": [[..], ..] }`, zero-indexed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphFile {
    pub n: usize,
    pub d: usize,
    pub perms: Vec<Vec<usize>>,
}

impl PermutationGraph {
    pub fn new(perms: Vec<Permutation>) -> Result<Self> {
        let n = perms.first().map(Permutation::len).ok_or_else(|| Error::Domain("need d >= 1".into()))?;
        if n == 0 {
            return Err(Error::Domain("need n >= 1".into()));
        }
        if perms.iter().any(|p| p.len() != n) {
            return Err(Error::ShapeMismatch("permutations have different sizes".into()));
        }
        Ok(PermutationGraph { n, perms })
    }

    pub fn from_images(images: Vec<Vec<usize>>) -> Result<Self> {
        PermutationGraph::new(images.into_iter().map(Permutation::from_image).collect::<Result<_>>()?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.perms.len()
    }

    pub fn perms(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn perm(&self, generator: usize) -> &Permutation {
        &self.perms[generator]
    }

    /// Where `letter` sends `v`.
    #[inline]
    pub fn step(&self, v: usize, letter: Letter) -> usize {
        let p = &self.perms[letter.generator];
        if letter.inverted {
            p.apply_inverse(v)
        } else {
            p.apply(v)
        }
    }

    /// Where the letter with alphabet code `code` sends `v`.
    #[inline]
    pub fn step_code(&self, v: usize, code: usize) -> usize {
        let p = &self.perms[code >> 1];
        if code & 1 == 1 {
            p.apply_inverse(v)
        } else {
            p.apply(v)
        }
    }

    /// Applies `w_1` first, then `w_2`, and so on.
    pub fn apply_word(&self, w: &Word, v: usize) -> usize {
        w.letters().iter().fold(v, |x, &l| self.step(x, l))
    }

    /// Whether `π_generator(tail) = head`.
    pub fn has_edge(&self, tail: usize, head: usize, generator: usize) -> bool {
        self.perms[generator].apply(tail) == head
    }

    pub fn adjacency(&self) -> AdjacencyMatrix {
        let n = self.n;
        let mut counts = vec![0u32; n * n];
        for p in &self.perms {
            for i in 0..n {
                let j = p.apply(i);
                counts[i * n + j] += 1;
                counts[j * n + i] += 1;
            }
        }
        AdjacencyMatrix { n, counts }
    }

    /// Every directed labelled edge `tail →π_g head`.
    pub fn labeled_edges(&self) -> impl Iterator<Item = LabeledEdge> + '_ {
        self.perms.iter().enumerate().flat_map(|(g, p)| {
            (0..self.n).map(move |i| LabeledEdge { tail: i, head: p.apply(i), generator: g })
        })
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile { n: self.n, d: self.d(), perms: self.perms.iter().map(|p| p.image.clone()).collect() }
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        if file.perms.len() != file.d {
            return Err(Error::ShapeMismatch(format!("d = {} but {} permutations given", file.d, file.perms.len())));
        }
        let g = PermutationGraph::from_images(file.perms)?;
        if g.n != file.n {
            return Err(Error::ShapeMismatch(format!("n = {} but image tables have length {}", file.n, g.n)));
        }
        Ok(g)
    }
}

/// `d` independent uniform permutations of `0..n` drawn from `rng`.
pub fn sample_graph_with(n: usize, d: usize, rng: &mut impl RngCore) -> Result<PermutationGraph> {
    if n == 0 || d == 0 {
        return Err(Error::Domain(format!("need n >= 1 and d >= 1, got n={n}, d={d}")));
    }
    PermutationGraph::new((0..d).map(|_| Permutation::random(n, rng)).collect())
}

/// Deterministic sample: stream 0 under `seed`.
pub fn sample_graph(n: usize, d: usize, seed: u64) -> Result<PermutationGraph> {
    sample_graph_with(n, d, &mut rng::substream(seed, 0))
}

/// Symmetric count matrix; a loop adds 2 to its diagonal entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    counts: Vec<u32>,
}

impl AdjacencyMatrix {
    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch("adjacency rows must form a square matrix".into()));
        }
        Ok(AdjacencyMatrix { n, counts: rows.into_iter().flatten().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|i| self.get(i, i) as u64).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.n).map(|i| self.row(i).iter().map(|&x| x as u64).sum()).collect()
    }

    /// Row-major entries as floats.
    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&x| x as f64).collect()
    }
}

/// A directed edge `tail →π_generator head`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledEdge {
    pub tail: usize,
    pub head: usize,
    pub generator: usize,
}

/// A closed trail `s_0 →w_1 s_1 → … →w_k s_k = s_0`, stored as its
/// vertices `s_0..s_{k-1}` and its word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrailSpec {
    vertices: Vec<usize>,
    word: Word,
}

impl TrailSpec {
    /// A cycle: distinct vertices and a cyclically reduced word of the same
    /// length. Whether the trail appears in any particular graph is not
    /// checked here.
    pub fn cycle(vertices: Vec<usize>, word: Word) -> Result<Self> {
        if vertices.is_empty() || vertices.len() != word.len() {
            return Err(Error::InvalidTrail(format!(
                "{} vertices for a word of length {}",
                vertices.len(),
                word.len()
            )));
        }
        let distinct: BTreeSet<_> = vertices.iter().collect();
        if distinct.len() != vertices.len() {
            return Err(Error::InvalidTrail("vertices s_0..s_(k-1) repeat".into()));
        }
        if !word.is_cyclically_reduced() {
            return Err(Error::InvalidTrail(format!("word `{word}` is not cyclically reduced")));
        }
        let spec = TrailSpec { vertices, word };
        spec.constraints()?;
        Ok(spec)
    }

    /// Follows `w` from `start` inside `g`. The walk must close up and be a
    /// cycle.
    pub fn from_walk(g: &PermutationGraph, start: usize, word: Word) -> Result<Self> {
        let mut vertices = Vec::with_capacity(word.len());
        let mut v = start;
        for &l in word.letters() {
            vertices.push(v);
            v = g.step(v, l);
        }
        if v != start {
            return Err(Error::InvalidTrail(format!("walk from {start} ends at {v}")));
        }
        TrailSpec::cycle(vertices, word)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    /// The trail's edges oriented along their generator, in trail order:
    /// a step `u →π_l⁻¹ v` is the edge `v →π_l u`.
    pub fn edges(&self) -> Vec<LabeledEdge> {
        let k = self.len();
        self.word
            .letters()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let (from, to) = (self.vertices[i], self.vertices[(i + 1) % k]);
                if l.inverted {
                    LabeledEdge { tail: to, head: from, generator: l.generator }
                } else {
                    LabeledEdge { tail: from, head: to, generator: l.generator }
                }
            })
            .collect()
    }

    /// Distinct edges, failing if two of them demand different images for
    /// the same point or the same preimage for different points.
    fn constraints(&self) -> Result<Vec<LabeledEdge>> {
        let mut out: Vec<LabeledEdge> = Vec::new();
        for e in self.edges() {
            if out.contains(&e) {
                continue;
            }
            if out
                .iter()
                .any(|o| o.generator == e.generator && ((o.tail == e.tail) != (o.head == e.head)))
            {
                return Err(Error::InvalidTrail(format!(
                    "conflicting requirements on generator {}",
                    e.generator + 1
                )));
            }
            out.push(e);
        }
        Ok(out)
    }

    pub fn appears_in(&self, g: &PermutationGraph) -> bool {
        self.edges().iter().all(|e| e.generator < g.d() && g.has_edge(e.tail, e.head, e.generator))
    }
}

/// Builds `G'`, distributed as `G` conditioned to contain `s`, on the same
/// randomness as `g`. For each generator `π_l` with required edges
/// `(a_1,b_1), …, (a_M,b_M)` taken in trail order, the `m`-th step swaps
/// the current value of `π_l(a_m)` with `b_m`.
pub fn couple_conditioned(g: &PermutationGraph, s: &TrailSpec) -> Result<PermutationGraph> {
    if s.vertices.iter().any(|&v| v >= g.n()) || s.word.generators_used() > g.d() {
        return Err(Error::InvalidTrail("trail does not fit the graph's (n, d)".into()));
    }
    let constraints = s.constraints()?;
    let mut perms = g.perms.clone();
    for e in &constraints {
        let p = &mut perms[e.generator];
        let current = p.apply(e.tail);
        if current != e.head {
            // τ swaps the values `current` and `head`
            let other = p.apply_inverse(e.head);
            p.swap_images(e.tail, other);
        }
    }
    let coupled = PermutationGraph { n: g.n, perms };
    debug_assert!(s.appears_in(&coupled));
    debug_assert!(removed_edges(g, &coupled)
        .map(|r| r.iter().all(|e| satisfies_coupling_shape(e, s)))
        .unwrap_or(false));
    Ok(coupled)
}

/// Directed labelled edges of `g` that are absent from `g_prime`.
pub fn removed_edges(g: &PermutationGraph, g_prime: &PermutationGraph) -> Result<Vec<LabeledEdge>> {
    if g.n() != g_prime.n() || g.d() != g_prime.d() {
        return Err(Error::ShapeMismatch(format!(
            "(n, d) = ({}, {}) vs ({}, {})",
            g.n(),
            g.d(),
            g_prime.n(),
            g_prime.d()
        )));
    }
    Ok(g.labeled_edges().filter(|e| !g_prime.has_edge(e.tail, e.head, e.generator)).collect())
}

/// A removed edge `i →π_l j` must share its labelled tail or labelled head
/// with an edge of `s`: `s` contains `i →π_l v` or `v →π_l j`.
pub fn satisfies_coupling_shape(removed: &LabeledEdge, s: &TrailSpec) -> bool {
    s.edges().iter().any(|e| {
        e.generator == removed.generator && (e.tail == removed.tail || e.head == removed.head)
    })
}
