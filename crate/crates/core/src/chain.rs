//! Markov kernel of a translation-invariant measure and its stationary law.
//!
//! With `z_0 = λ_0 = 1` the kernel is `p_ij = a_ij λ_j z_j / Σ_l a_il λ_l z_l`.
//! On the hub-plus-loops graph this leaves three kinds of row: spin 0 moves
//! anywhere, a loop spin `i` stays with probability `λ_i z_i / (1 + λ_i z_i)`
//! or returns to 0, and every other spin returns to 0.
//!
//! Unlisted non-loop spins all behave alike, so they are merged into a
//! single `TAIL` state entered from 0 with their combined weight
//! `Σ λ_j z_j = Σ λ_j² / (1+A)^k`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::boundary_law::expand;
use crate::error::{Error, Result};
use crate::model::{ActivitySpec, AdmissibilityGraph, BoundaryLawSolution, State};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransitionMatrix<T> {
    pub window: u32,
    pub states: Vec<State>,
    pub rows: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StationaryDistribution<T> {
    pub states: Vec<State>,
    pub probabilities: Vec<T>,
}

impl<T: Scalar> TransitionMatrix<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: State) -> Option<usize> {
        self.states.iter().position(|&t| t == s)
    }

    pub fn entry(&self, from: State, to: State) -> T {
        match (self.index_of(from), self.index_of(to)) {
            (Some(i), Some(j)) => self.rows[i][j],
            _ => T::zero(),
        }
    }

    /// Largest `|Σ_j p_ij − 1|` over rows.
    pub fn max_row_sum_error(&self) -> T {
        self.rows
            .iter()
            .map(|r| (r.iter().copied().sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// `x · P`.
    pub fn apply_left(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "vector has {} entries, matrix has {} states",
                x.len(),
                self.len()
            )));
        }
        let mut out = vec![T::zero(); self.len()];
        for (xi, row) in x.iter().zip(&self.rows) {
            for (o, &p) in out.iter_mut().zip(row) {
                *o = *o + *xi * p;
            }
        }
        Ok(out)
    }
}

impl<T: Scalar> StationaryDistribution<T> {
    pub fn get(&self, s: State) -> T {
        self.states
            .iter()
            .position(|&t| t == s)
            .map_or(T::zero(), |i| self.probabilities[i])
    }
}

/// Per-state weights `λ_s z_s` over the chain's state set, plus the flags
/// the rows need.
struct Weights<T> {
    states: Vec<State>,
    weight: Vec<T>,
    is_loop: Vec<bool>,
}

fn weights<T: Scalar>(
    solution: &BoundaryLawSolution<T>,
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    window: Option<u32>,
) -> Result<Weights<T>> {
    if spec.divergent {
        return Err(Error::DivergentActivities);
    }
    if spec.loops.keys().ne(graph.loops().iter()) {
        return Err(Error::InvalidInput(format!(
            "graph loops {:?} do not match the spec",
            graph.loops()
        )));
    }
    if let Some(m) = window {
        let too_far = spec
            .loops
            .keys()
            .chain(spec.tail.keys())
            .find(|i| i.unsigned_abs() > u64::from(m));
        if let Some(&index) = too_far {
            return Err(Error::WindowTooSmall { index, window: m });
        }
    }
    let e = expand(solution, spec);
    let mut states = vec![State::Spin(0)];
    let mut weight = vec![T::one()];
    let mut is_loop = vec![false];
    for (&i, &z) in &e.z {
        let lambda = spec.activity(i).ok_or_else(|| {
            Error::InvalidInput(format!("solution carries spin {i}, which the spec does not list"))
        })?;
        states.push(State::Spin(i));
        weight.push(lambda * z);
        is_loop.push(graph.is_loop(i));
    }
    if spec.tail_mass > T::zero() {
        let inv = T::one() / (T::one() + solution.a).powi(spec.k as i32);
        states.push(State::Tail);
        weight.push(spec.tail_square_mass() * inv);
        is_loop.push(false);
    }
    // expand yields spins in increasing order; keep 0 in its sorted place
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by_key(|&i| match states[i] {
        State::Spin(s) => (0, s),
        State::Tail => (1, 0),
    });
    Ok(Weights {
        states: order.iter().map(|&i| states[i]).collect(),
        weight: order.iter().map(|&i| weight[i]).collect(),
        is_loop: order.iter().map(|&i| is_loop[i]).collect(),
    })
}

/// Kernel on spin 0, the loops, the listed tail and (when `tail_mass > 0`)
/// the `TAIL` state. Every listed spin must satisfy `|i| ≤ window`.
pub fn transition_matrix<T: Scalar>(
    solution: &BoundaryLawSolution<T>,
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    window: u32,
) -> Result<TransitionMatrix<T>> {
    let w = weights(solution, spec, graph, Some(window))?;
    let n = w.states.len();
    let hub = w.states.iter().position(|&s| s == State::Spin(0)).expect("hub present");
    let d0: T = w.weight.iter().copied().sum();
    let rows = (0..n)
        .map(|i| {
            let mut row = vec![T::zero(); n];
            if i == hub {
                for (r, &wt) in row.iter_mut().zip(&w.weight) {
                    *r = wt / d0;
                }
            } else if w.is_loop[i] {
                let lz = w.weight[i];
                row[i] = lz / (T::one() + lz);
                row[hub] = T::one() / (T::one() + lz);
            } else {
                row[hub] = T::one();
            }
            row
        })
        .collect();
    Ok(TransitionMatrix {
        window,
        states: w.states,
        rows,
    })
}

/// Closed-form stationary law:
///
/// ```text
/// x_0 = (1 + S) / D,   x_i = ((λ_i z_i)² + λ_i z_i) / D  (loops),
/// x_j = λ_j z_j / D    (others, TAIL included),
/// D = 1 + Σ_loops (λ_i z_i)² + 2S,   S = Σ_{l≠0} λ_l z_l.
/// ```
pub fn stationary_closed_form<T: Scalar>(
    solution: &BoundaryLawSolution<T>,
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
) -> Result<StationaryDistribution<T>> {
    let w = weights(solution, spec, graph, None)?;
    let hub = w.states.iter().position(|&s| s == State::Spin(0)).expect("hub present");
    let s: T = w.weight.iter().copied().sum::<T>() - T::one();
    let loop_sq: T = w
        .weight
        .iter()
        .zip(&w.is_loop)
        .filter(|(_, &l)| l)
        .map(|(&x, _)| x * x)
        .sum();
    let d = T::one() + loop_sq + T::lit(2.0) * s;
    let probabilities = (0..w.states.len())
        .map(|i| {
            let lz = w.weight[i];
            if i == hub {
                (T::one() + s) / d
            } else if w.is_loop[i] {
                (lz * lz + lz) / d
            } else {
                lz / d
            }
        })
        .collect();
    Ok(StationaryDistribution {
        states: w.states,
        probabilities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StationarityReport<T> {
    /// `‖X·P − X‖∞`.
    pub max_residual: T,
    /// `|ΣX − 1|`.
    pub sum_error: T,
    pub pass: bool,
}

pub fn verify_stationary<T: Scalar>(
    x: &StationaryDistribution<T>,
    p: &TransitionMatrix<T>,
    tol: T,
) -> Result<StationarityReport<T>> {
    if x.states != p.states {
        return Err(Error::ShapeMismatch(format!(
            "distribution over {} states, matrix over {}",
            x.states.len(),
            p.states.len()
        )));
    }
    let xp = p.apply_left(&x.probabilities)?;
    let max_residual = xp
        .iter()
        .zip(&x.probabilities)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max);
    let sum_error = (x.probabilities.iter().copied().sum::<T>() - T::one()).abs();
    Ok(StationarityReport {
        max_residual,
        sum_error,
        pass: max_residual <= tol && sum_error <= tol,
    })
}

fn reaches_all<T: Scalar>(p: &TransitionMatrix<T>, forward: bool) -> bool {
    let n = p.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            let edge = if forward { p.rows[i][j] } else { p.rows[j][i] };
            if edge > T::zero() && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Strong connectivity of the graph of positive entries.
pub fn irreducible<T: Scalar>(p: &TransitionMatrix<T>) -> bool {
    p.is_empty() || (reaches_all(p, true) && reaches_all(p, false))
}

/// `Σ |a_i − b_i| / 2`.
pub fn total_variation<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum::<T>() / T::lit(2.0)
}

/// Iterates `x ← x·P` from the uniform vector until successive iterates
/// differ by less than `tol` in total variation. Returns the iterate and the
/// number of steps taken.
pub fn power_iteration<T: Scalar>(p: &TransitionMatrix<T>, max_steps: usize, tol: T) -> (Vec<T>, usize) {
    let n = p.len();
    let mut x = vec![T::one() / T::lit(n as f64); n];
    for step in 1..=max_steps {
        let next = p.apply_left(&x).expect("square matrix");
        let delta = total_variation(&next, &x);
        x = next;
        if delta < tol {
            return (x, step);
        }
    }
    (x, max_steps)
}
