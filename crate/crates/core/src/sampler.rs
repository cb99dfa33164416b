//! Tree-indexed Markov chains on finite Cayley trees.
//!
//! Vertices are numbered breadth-first: the root is 0, its `k+1` children
//! are `1..=k+1`, and vertex `u ≥ 1` has children
//! `k+2 + (u−1)k .. k+2 + uk`. The root spin is drawn from the stationary
//! law and every other spin from the kernel row of its parent.
//!
//! Randomness is counter-based: each tree has a 64-bit seed keying a ChaCha8
//! generator, and vertex `v` reads from stream `v` of that key. A vertex's
//! stream is therefore fixed by its parent and child slot alone, so samples
//! do not depend on traversal order or thread count. Tree `t` of a batch
//! with seed `s` uses as its seed the first word of stream `t` under key `s`.

use std::collections::BTreeMap;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::chain::{stationary_closed_form, total_variation, transition_matrix, StationaryDistribution, TransitionMatrix};
use crate::error::{Error, Result};
use crate::model::{ActivitySpec, AdmissibilityGraph, BoundaryLawSolution, State};
use crate::scalar::Scalar;

/// `|V_n| = 1 + (k+1)(kⁿ − 1)/(k − 1)` (and `1 + 2n` for `k = 1`).
pub fn tree_size(k: u32, depth: u32) -> usize {
    let (k, n) = (k as usize, depth as usize);
    if k == 1 {
        return 1 + 2 * n;
    }
    1 + (k + 1) * (k.pow(depth) - 1) / (k - 1)
}

/// Index ranges of the levels `0..=depth`.
pub fn level_ranges(k: u32, depth: u32) -> Vec<std::ops::Range<usize>> {
    (0..=depth)
        .map(|l| {
            let start = if l == 0 { 0 } else { tree_size(k, l - 1) };
            start..tree_size(k, l)
        })
        .collect()
}

pub fn parent(k: u32, v: usize) -> Option<usize> {
    let k = k as usize;
    match v {
        0 => None,
        v if v <= k + 1 => Some(0),
        v => Some((v - (k + 2)) / k + 1),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSample {
    pub depth: u32,
    pub seed: u64,
    #[serde(default = "default_k", skip_serializing_if = "is_two")]
    pub k: u32,
    /// Breadth-first.
    pub spins: Vec<State>,
}

fn default_k() -> u32 {
    2
}

fn is_two(k: &u32) -> bool {
    *k == 2
}

impl TreeSample {
    /// Edges `{σ(x), σ(y)}` that are not edges of the admissibility graph.
    pub fn inadmissible_edges(&self, graph: &AdmissibilityGraph) -> usize {
        (1..self.spins.len())
            .filter(|&v| {
                let p = parent(self.k, v).expect("non-root vertex");
                graph.state_adjacency(self.spins[p], self.spins[v]) == 0
            })
            .count()
    }

    pub fn edge_count(&self) -> usize {
        self.spins.len().saturating_sub(1)
    }
}

fn weighted(probs: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(probs.iter().map(|p| p.max(0.0)))
        .map_err(|e| Error::NumericalFailure(format!("invalid probability row: {e}")))
}

/// Root law and kernel rows prepared for repeated sampling.
#[derive(Debug, Clone)]
pub struct TreeSampler {
    k: u32,
    states: Vec<State>,
    root: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
}

impl TreeSampler {
    pub fn new<T: Scalar>(p: &TransitionMatrix<T>, x: &StationaryDistribution<T>, k: u32) -> Result<Self> {
        if x.states != p.states {
            return Err(Error::ShapeMismatch("root law and kernel disagree on states".into()));
        }
        if k < 1 {
            return Err(Error::InvalidInput("branching order must be at least 1".into()));
        }
        let root = weighted(&x.probabilities.iter().map(|v| v.as_f64()).collect::<Vec<_>>())?;
        let rows = p
            .rows
            .iter()
            .map(|r| weighted(&r.iter().map(|v| v.as_f64()).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        Ok(TreeSampler {
            k,
            states: p.states.clone(),
            root,
            rows,
        })
    }

    /// Kernel on the smallest window holding every listed spin, rooted at
    /// the closed-form stationary law.
    pub fn from_solution<T: Scalar>(
        solution: &BoundaryLawSolution<T>,
        spec: &ActivitySpec<T>,
        graph: &AdmissibilityGraph,
    ) -> Result<Self> {
        let window = u32::try_from(spec.max_index())
            .map_err(|_| Error::InvalidInput("spin labels too large for a window".into()))?;
        let p = transition_matrix(solution, spec, graph, window)?;
        let x = stationary_closed_form(solution, spec, graph)?;
        Self::new(&p, &x, spec.k)
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn sample(&self, depth: u32, seed: u64) -> TreeSample {
        let n = tree_size(self.k, depth);
        let key = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = Vec::with_capacity(n);
        for v in 0..n {
            let mut rng = key.clone();
            rng.set_stream(v as u64);
            let s = match parent(self.k, v) {
                None => self.root.sample(&mut rng),
                Some(p) => self.rows[idx[p]].sample(&mut rng),
            };
            idx.push(s);
        }
        TreeSample {
            depth,
            seed,
            k: self.k,
            spins: idx.into_iter().map(|i| self.states[i]).collect(),
        }
    }

    /// `trees` independent trees, sampled in parallel.
    pub fn sample_many(&self, depth: u32, trees: usize, seed: u64) -> Vec<TreeSample> {
        (0..trees)
            .into_par_iter()
            .map(|t| self.sample(depth, tree_seed(seed, t as u64)))
            .collect()
    }
}

/// Seed of tree `t` in a batch with seed `seed`.
pub fn tree_seed(seed: u64, t: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng.random()
}

pub fn sample_tree<T: Scalar>(
    solution: &BoundaryLawSolution<T>,
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    depth: u32,
    seed: u64,
) -> Result<TreeSample> {
    Ok(TreeSampler::from_solution(solution, spec, graph)?.sample(depth, seed))
}

fn position(states: &[State], s: State) -> Result<usize> {
    states
        .iter()
        .position(|&t| t == s)
        .ok_or_else(|| Error::ShapeMismatch(format!("sampled state {s} is not among the states")))
}

fn normalise(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Spin counts over every vertex of every sample, ordered as `states`.
pub fn counts(samples: &[TreeSample], states: &[State]) -> Result<Vec<u64>> {
    let mut out = vec![0u64; states.len()];
    for s in samples {
        for &spin in &s.spins {
            out[position(states, spin)?] += 1;
        }
    }
    Ok(out)
}

/// Vertex-spin frequencies over every vertex of every sample.
pub fn empirical_marginal(samples: &[TreeSample], states: &[State]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    Ok(normalise(&counts(samples, states)?))
}

/// Spin counts per level; every sample must share depth and `k`.
pub fn level_counts(samples: &[TreeSample], states: &[State]) -> Result<Vec<Vec<u64>>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("no samples".into()))?;
    if samples.iter().any(|s| s.depth != first.depth || s.k != first.k) {
        return Err(Error::ShapeMismatch("samples differ in depth or branching order".into()));
    }
    level_ranges(first.k, first.depth)
        .into_iter()
        .map(|range| {
            let mut c = vec![0u64; states.len()];
            for s in samples {
                for &spin in &s.spins[range.clone()] {
                    c[position(states, spin)?] += 1;
                }
            }
            Ok(c)
        })
        .collect()
}

pub fn level_marginals(samples: &[TreeSample], states: &[State]) -> Result<Vec<Vec<f64>>> {
    Ok(level_counts(samples, states)?.iter().map(|c| normalise(c)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of `counts` against `probs`. Cells with zero
/// expected probability must have zero count and are dropped.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if counts.len() != probs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} counts against {} probabilities",
            counts.len(),
            probs.len()
        )));
    }
    let n: u64 = counts.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if c > 0 {
                return Ok(ChiSquareTest {
                    statistic: f64::INFINITY,
                    dof: 0,
                    p_value: 0.0,
                });
            }
            continue;
        }
        let e = p * n as f64;
        statistic += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::NumericalFailure(e.to_string()))?;
        dist.sf(statistic)
    };
    Ok(ChiSquareTest { statistic, dof, p_value })
}

/// Exact finite-volume Gibbs distribution on a small tree: every admissible
/// configuration has probability `∝ Π_x λ_{σ(x)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsTable<T> {
    pub k: u32,
    pub depth: u32,
    pub alphabet: Vec<i64>,
    /// Admissible configurations in lexicographic order (breadth-first
    /// vertex order), with their probabilities.
    pub configurations: Vec<(Vec<i64>, T)>,
}

const MAX_ALPHABET: usize = 6;
const MAX_VERTICES: usize = 10;

/// Enumerates the Gibbs distribution on the depth-`depth` tree over
/// `alphabet` (which must contain 0). `boundary` pins leaves to spins.
///
/// Fails with [`Error::TooLarge`] beyond 6 symbols or 10 vertices.
pub fn finite_gibbs_oracle<T: Scalar>(
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    alphabet: &[i64],
    depth: u32,
    boundary: Option<&BTreeMap<usize, i64>>,
) -> Result<GibbsTable<T>> {
    let mut alpha = alphabet.to_vec();
    alpha.sort_unstable();
    alpha.dedup();
    if alpha.len() > MAX_ALPHABET {
        return Err(Error::TooLarge(format!(
            "alphabet of {} symbols exceeds {MAX_ALPHABET}",
            alpha.len()
        )));
    }
    let k = spec.k;
    let n = tree_size(k, depth);
    if depth > 2 || n > MAX_VERTICES {
        return Err(Error::TooLarge(format!(
            "tree of depth {depth} has {n} vertices, more than {MAX_VERTICES}"
        )));
    }
    if !alpha.contains(&0) {
        return Err(Error::InvalidInput("alphabet must contain spin 0".into()));
    }
    let weights = alpha
        .iter()
        .map(|&i| {
            spec.activity(i)
                .ok_or_else(|| Error::InvalidInput(format!("spin {i} has no listed activity")))
        })
        .collect::<Result<Vec<T>>>()?;
    let leaves = level_ranges(k, depth).pop().expect("at least the root level");
    let pinned: BTreeMap<usize, usize> = match boundary {
        None => BTreeMap::new(),
        Some(b) => b
            .iter()
            .map(|(&v, &s)| {
                if !leaves.contains(&v) {
                    return Err(Error::InvalidInput(format!("boundary vertex {v} is not a leaf")));
                }
                let pos = alpha
                    .binary_search(&s)
                    .map_err(|_| Error::InvalidInput(format!("boundary spin {s} not in the alphabet")))?;
                Ok((v, pos))
            })
            .collect::<Result<_>>()?,
    };

    let mut out = Vec::new();
    let mut config = vec![0usize; n];
    enumerate(0, T::one(), &mut config, &mut out, &alpha, &weights, graph, k, &pinned);
    let total = compensated_sum(out.iter().map(|(_, w)| *w));
    let configurations = out
        .into_iter()
        .map(|(c, w)| (c.into_iter().map(|i| alpha[i]).collect(), w / total))
        .collect();
    Ok(GibbsTable {
        k,
        depth,
        alphabet: alpha,
        configurations,
    })
}

/// Neumaier summation; the tables run to ~10⁵ terms.
fn compensated_sum<T: Scalar>(xs: impl Iterator<Item = T>) -> T {
    let (mut sum, mut c) = (T::zero(), T::zero());
    for x in xs {
        let t = sum + x;
        c = c + if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

#[allow(clippy::too_many_arguments)]
fn enumerate<T: Scalar>(
    v: usize,
    weight: T,
    config: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, T)>,
    alpha: &[i64],
    weights: &[T],
    graph: &AdmissibilityGraph,
    k: u32,
    pinned: &BTreeMap<usize, usize>,
) {
    if v == config.len() {
        out.push((config.clone(), weight));
        return;
    }
    for s in 0..alpha.len() {
        if pinned.get(&v).is_some_and(|&p| p != s) {
            continue;
        }
        if let Some(p) = parent(k, v) {
            if graph.adjacency(alpha[config[p]], alpha[s]) == 0 {
                continue;
            }
        }
        config[v] = s;
        enumerate(v + 1, weight * weights[s], config, out, alpha, weights, graph, k, pinned);
    }
}

impl<T: Scalar> GibbsTable<T> {
    pub fn probability(&self, config: &[i64]) -> T {
        self.configurations
            .binary_search_by(|(c, _)| c.as_slice().cmp(config))
            .map_or(T::zero(), |i| self.configurations[i].1)
    }

    pub fn total(&self) -> T {
        compensated_sum(self.configurations.iter().map(|(_, p)| *p))
    }

    /// Law of `σ(v)` given every other spin of `config`, by enumeration.
    /// Ordered as `alphabet`.
    pub fn site_conditional(&self, v: usize, config: &[i64]) -> Vec<T> {
        let mut c = config.to_vec();
        let w: Vec<T> = self
            .alphabet
            .iter()
            .map(|&s| {
                c[v] = s;
                self.probability(&c)
            })
            .collect();
        let total: T = w.iter().copied().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

/// `λ_i Π_y a_{i,ω(y)}`, normalised over `alphabet`.
pub fn single_site_conditional<T: Scalar>(
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    alphabet: &[i64],
    neighbours: &[i64],
) -> Result<Vec<T>> {
    let w = alphabet
        .iter()
        .map(|&i| {
            let l = spec
                .activity(i)
                .ok_or_else(|| Error::InvalidInput(format!("spin {i} has no listed activity")))?;
            let ok = neighbours.iter().all(|&j| graph.adjacency(i, j) == 1);
            Ok(if ok { l } else { T::zero() })
        })
        .collect::<Result<Vec<T>>>()?;
    let total: T = w.iter().copied().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    /// Sorted children of the root.
    pub children: Vec<State>,
    pub observations: usize,
    pub empirical: Vec<f64>,
    pub gibbs: Vec<f64>,
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalReport {
    pub states: Vec<State>,
    pub trials: usize,
    pub rows: Vec<PatternRow>,
}

impl fmt::Display for ConditionalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "children\tn\ttv")?;
        for r in &self.rows {
            let kids: Vec<String> = r.children.iter().map(State::label).collect();
            writeln!(f, "{}\t{}\t{:.3}", kids.join(","), r.observations, r.tv)?;
        }
        Ok(())
    }
}

/// Samples `trials` depth-1 trees from the chain and compares, for every
/// observed multiset of children, the empirical root law with the Gibbs
/// single-site law `∝ λ_i Π_y a_{i,ω(y)}`. `TAIL` carries activity
/// `tail_mass`. Exploratory: nothing is asserted.
pub fn conditional_diagnostic<T: Scalar>(
    solution: &BoundaryLawSolution<T>,
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    trials: usize,
    seed: u64,
) -> Result<ConditionalReport> {
    let sampler = TreeSampler::from_solution(solution, spec, graph)?;
    let states = sampler.states().to_vec();
    let activity: Vec<f64> = states
        .iter()
        .map(|s| match s {
            State::Spin(i) => spec.activity(*i).map_or(0.0, |v| v.as_f64()),
            State::Tail => spec.tail_mass.as_f64(),
        })
        .collect();
    let mut tally: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
    for tree in sampler.sample_many(1, trials, seed) {
        let root = position(&states, tree.spins[0])?;
        let mut kids = tree.spins[1..]
            .iter()
            .map(|&s| position(&states, s))
            .collect::<Result<Vec<_>>>()?;
        kids.sort_unstable();
        tally.entry(kids).or_insert_with(|| vec![0; states.len()])[root] += 1;
    }
    let rows = tally
        .into_iter()
        .map(|(kids, c)| {
            let w: Vec<f64> = (0..states.len())
                .map(|i| {
                    let ok = kids
                        .iter()
                        .all(|&j| graph.state_adjacency(states[i], states[j]) == 1);
                    if ok { activity[i] } else { 0.0 }
                })
                .collect();
            let total: f64 = w.iter().sum();
            let gibbs: Vec<f64> = w.iter().map(|x| x / total).collect();
            let empirical = normalise(&c);
            PatternRow {
                children: kids.iter().map(|&j| states[j]).collect(),
                observations: c.iter().sum::<u64>() as usize,
                tv: total_variation(&empirical, &gibbs),
                empirical,
                gibbs,
            }
        })
        .collect();
    Ok(ConditionalReport { states, trials, rows })
}
