//! Closed-form-free verification: damped fixed-point iteration and
//! multistart solution counting on the reduced system.
//!
//! Plain iteration only finds attracting fixed points. Every random start
//! is therefore also handed to a damped Newton method in log coordinates
//! (which keeps iterates positive and copes with starts spread over six
//! decades), so repelling solutions are discovered without looking at the
//! closed forms.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary_law::{reduce, residual, ReducedSystem};
use crate::error::{Error, Result};
use crate::model::{ActivitySpec, AdmissibilityGraph};
use crate::scalar::Scalar;

/// Outcome of one fixed-point run; failing to converge is a value.
#[derive(Debug, Clone, PartialEq)]
pub enum Iteration<T> {
    Converged { x: Vec<T>, iterations: usize, residual: T },
    Failed { iterations: usize, residual: T },
}

impl<T: Scalar> Iteration<T> {
    pub fn point(&self) -> Option<&[T]> {
        match self {
            Iteration::Converged { x, .. } => Some(x),
            Iteration::Failed { .. } => None,
        }
    }
}

/// Runs without a tenfold residual improvement for this many steps give up.
const STALL_WINDOW: usize = 5_000;

/// `x ← (1−θ)x + θF(x)` from `x0` until the residual drops below `tol`.
pub fn iterate_system<T: Scalar>(
    sys: &ReducedSystem<T>,
    x0: &[T],
    damping: T,
    max_iter: usize,
    tol: T,
) -> Iteration<T> {
    let mut x = x0.to_vec();
    let mut r = sys.max_residual(&x);
    let (mut best, mut best_at) = (r, 0);
    for it in 0..=max_iter {
        if r < tol {
            return Iteration::Converged { x, iterations: it, residual: r };
        }
        if !r.is_finite() || it == max_iter || it - best_at > STALL_WINDOW {
            return Iteration::Failed { iterations: it, residual: r };
        }
        let f = sys.map(&x);
        for (xi, fi) in x.iter_mut().zip(f) {
            *xi = (T::one() - damping) * *xi + damping * fi;
        }
        r = sys.max_residual(&x);
        if r < best * T::lit(0.1) {
            best = r;
            best_at = it;
        }
    }
    unreachable!("loop returns by max_iter")
}

/// Damped fixed-point iteration for a spec. `init` must hold every loop
/// coordinate.
pub fn fixed_point_iterate<T: Scalar>(
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    init: &BTreeMap<i64, T>,
    init_a: T,
    damping: T,
    max_iter: usize,
    tol: T,
) -> Result<Iteration<T>> {
    let sys = reduce(spec, graph)?;
    if !(damping > T::zero() && damping <= T::one()) {
        return Err(Error::InvalidInput(format!("damping must lie in (0, 1], got {damping}")));
    }
    let mut x0 = sys
        .loop_labels
        .iter()
        .map(|i| match init.get(i) {
            Some(&z) if z > T::zero() => Ok(z),
            _ => Err(Error::InvalidInput(format!("initial z_{i} missing or not positive"))),
        })
        .collect::<Result<Vec<T>>>()?;
    if !(init_a > T::zero()) {
        return Err(Error::InvalidInput(format!("initial A must be positive, got {init_a}")));
    }
    x0.push(init_a);
    Ok(iterate_system(&sys, &x0, damping, max_iter, tol))
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_linear<T: Scalar>(mut m: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).expect("finite"))?;
        if m[p][c] == T::zero() || !m[p][c].is_finite() {
            return None;
        }
        m.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                let v = m[c][k];
                m[r][k] = m[r][k] - f * v;
            }
            b[r] = b[r] - f * b[c];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s: T = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn merit<T: Scalar>(r: &[T]) -> T {
    r.iter().map(|v| *v * *v).sum()
}

/// Damped Newton on `u = ln x` with backtracking on `‖r‖²`. Stops when the
/// residual is below `tol` and a further step no longer helps.
pub fn newton_log<T: Scalar>(sys: &ReducedSystem<T>, x0: &[T], max_iter: usize, tol: T) -> Iteration<T> {
    let mut x = x0.to_vec();
    let mut r = sys.residuals(&x);
    let mut m = merit(&r);
    for it in 0..max_iter {
        if !m.is_finite() {
            return Iteration::Failed { iterations: it, residual: T::infinity() };
        }
        let mut jac = sys.jacobian(&x);
        for row in jac.iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * x[j];
            }
        }
        let Some(du) = solve_linear(jac, r.iter().map(|v| -*v).collect()) else {
            break;
        };
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<T> = x
                .iter()
                .zip(&du)
                .map(|(xi, d)| *xi * (t * *d).max(T::lit(-30.0)).min(T::lit(30.0)).exp())
                .collect();
            let rt = sys.residuals(&trial);
            let mt = merit(&rt);
            if mt.is_finite() && mt < m {
                accepted = Some((trial, rt, mt));
                break;
            }
            t = t / T::lit(2.0);
        }
        let Some((nx, nr, nm)) = accepted else {
            break;
        };
        x = nx;
        r = nr;
        m = nm;
        if m.sqrt() < tol * T::lit(1e-3) {
            break;
        }
    }
    let res = sys.max_residual(&x);
    if res < tol {
        Iteration::Converged { x, iterations: max_iter, residual: res }
    } else {
        Iteration::Failed { iterations: max_iter, residual: res }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistartConfig<T> {
    pub n_starts: usize,
    pub seed: u64,
    /// Relative distance below which two points are one solution.
    pub cluster_tol: T,
    pub dampings: Vec<T>,
    pub max_iter: usize,
    pub tol: T,
    pub newton: bool,
}

impl<T: Scalar> MultistartConfig<T> {
    pub fn new(n_starts: usize, seed: u64) -> Self {
        MultistartConfig {
            n_starts,
            seed,
            cluster_tol: T::lit(1e-6),
            dampings: [1.0, 0.5, 0.3, 0.1].into_iter().map(T::lit).collect(),
            max_iter: 100_000,
            tol: T::lit(1e-11).max(T::residual_tol() * T::lit(0.1)),
            newton: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Cluster<T> {
    #[serde(rename = "A")]
    pub a: T,
    pub z: BTreeMap<i64, T>,
    /// Residual of the full system, listed tail included.
    pub residual: T,
    pub hits: usize,
    /// Hits that came from plain or damped iteration rather than Newton.
    pub iteration_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MultistartResult<T> {
    pub count: usize,
    pub representatives: Vec<Cluster<T>>,
    pub starts: usize,
    pub converged: usize,
}

/// Log-uniform start in `[1e-3, 1e3]` for every coordinate, drawn from
/// stream `index` of the generator keyed by `seed`.
pub fn random_start<T: Scalar>(dim: usize, seed: u64, index: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..dim)
        .map(|_| T::lit(10f64.powf(rng.random_range(-3.0..=3.0))))
        .collect()
}

struct Found<T> {
    x: Vec<T>,
    by_iteration: bool,
}

fn relative_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).abs() / x.abs().max(y.abs()).max(T::min_positive_value()))
        .fold(T::zero(), T::max)
}

fn same_solution<T: Scalar>(sys: &ReducedSystem<T>, a: &[T], b: &[T], cfg: &MultistartConfig<T>) -> bool {
    let d = relative_distance(a, b);
    if d < cfg.cluster_tol {
        return true;
    }
    // near a degenerate root the residual is flat and converged points
    // spread along a curved valley; treat them as one when every point of
    // the segment between them projects back onto the solution set by a
    // step much shorter than the segment
    if d < T::lit(5e-2) {
        return (1..8).all(|i| {
            let t = T::lit(i as f64 / 8.0);
            let p: Vec<T> = a.iter().zip(b).map(|(x, y)| *x + t * (*y - *x)).collect();
            project(sys, p.clone(), cfg.tol).is_some_and(|x| relative_distance(&x, &p) <= d / T::lit(4.0))
        });
    }
    false
}

/// Levenberg-Marquardt descent onto the solution set. Unlike Newton it
/// takes short steps along directions where the Jacobian is nearly singular.
fn project<T: Scalar>(sys: &ReducedSystem<T>, mut x: Vec<T>, tol: T) -> Option<Vec<T>> {
    let n = x.len();
    let mut r = sys.residuals(&x);
    let mut m = merit(&r);
    let mut mu = T::lit(1e-6);
    for _ in 0..200 {
        if sys.max_residual(&x) <= tol {
            return Some(x);
        }
        let jac = sys.jacobian(&x);
        let mut jtj = vec![vec![T::zero(); n]; n];
        let mut jtr = vec![T::zero(); n];
        for (row, ri) in jac.iter().zip(&r) {
            for i in 0..n {
                jtr[i] = jtr[i] - row[i] * *ri;
                for j in 0..n {
                    jtj[i][j] = jtj[i][j] + row[i] * row[j];
                }
            }
        }
        let scale = (0..n).map(|i| jtj[i][i]).fold(T::zero(), T::max);
        let mut stepped = false;
        while mu < T::lit(1e12) {
            let mut a = jtj.clone();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] = row[i] + mu * scale;
            }
            if let Some(du) = solve_linear(a, jtr.clone()) {
                let trial: Vec<T> = x.iter().zip(&du).map(|(xi, d)| *xi + *d).collect();
                if trial.iter().all(|v| *v > T::zero()) {
                    let rt = sys.residuals(&trial);
                    let mt = merit(&rt);
                    if mt < m {
                        x = trial;
                        r = rt;
                        m = mt;
                        mu = (mu / T::lit(10.0)).max(T::lit(1e-12));
                        stepped = true;
                        break;
                    }
                }
            }
            mu = mu * T::lit(10.0);
        }
        if !stepped {
            break;
        }
    }
    (sys.max_residual(&x) <= tol).then_some(x)
}

fn find_root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Counts distinct positive solutions of the reduced system from
/// `config.n_starts` random starts.
pub fn multistart<T: Scalar>(
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    cfg: &MultistartConfig<T>,
) -> Result<MultistartResult<T>> {
    if cfg.n_starts < 50 {
        return Err(Error::InvalidInput(format!(
            "at least 50 starts are required, got {}",
            cfg.n_starts
        )));
    }
    let sys = reduce(spec, graph)?;
    let dim = sys.dim();
    let found: Vec<Found<T>> = (0..cfg.n_starts)
        .into_par_iter()
        .flat_map_iter(|s| {
            let x0 = random_start::<T>(dim, cfg.seed, s as u64);
            let mut out = Vec::new();
            for &theta in &cfg.dampings {
                if let Iteration::Converged { x, .. } = iterate_system(&sys, &x0, theta, cfg.max_iter, cfg.tol) {
                    out.push(Found { x: polish(&sys, x, cfg.tol), by_iteration: true });
                    break;
                }
            }
            if cfg.newton {
                if let Iteration::Converged { x, .. } = newton_log(&sys, &x0, 200, cfg.tol) {
                    out.push(Found { x, by_iteration: false });
                }
            }
            out
        })
        .collect();

    let converged = found.len();
    // single linkage, so a chain of points along a valley ends up together
    let mut parent: Vec<usize> = (0..found.len()).collect();
    for i in 0..found.len() {
        for j in 0..i {
            let (ri, rj) = (find_root(&mut parent, i), find_root(&mut parent, j));
            if ri != rj && same_solution(&sys, &found[i].x, &found[j].x, cfg) {
                parent[ri] = rj;
            }
        }
    }
    let mut clusters: Vec<(Vec<T>, usize, usize)> = Vec::new();
    let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, f) in found.into_iter().enumerate() {
        let r = find_root(&mut parent, i);
        match slot.get(&r) {
            Some(&c) => {
                let c = &mut clusters[c];
                c.1 += 1;
                c.2 += usize::from(f.by_iteration);
                if sys.max_residual(&f.x) < sys.max_residual(&c.0) {
                    c.0 = f.x;
                }
            }
            None => {
                slot.insert(r, clusters.len());
                clusters.push((f.x, 1, usize::from(f.by_iteration)));
            }
        }
    }
    clusters.sort_by(|p, q| {
        p.0.iter()
            .rev()
            .zip(q.0.iter().rev())
            .map(|(a, b)| a.partial_cmp(b).expect("finite"))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let representatives = clusters
        .into_iter()
        .map(|(x, hits, iteration_hits)| {
            let a = x[dim - 1];
            let mut z: BTreeMap<i64, T> = sys.loop_labels.iter().copied().zip(x).collect();
            let inv = T::one() / (T::one() + a).powi(spec.k as i32);
            let full: BTreeMap<i64, T> = z
                .clone()
                .into_iter()
                .chain(spec.tail.iter().map(|(&j, &l)| (j, l * inv)))
                .collect();
            let res = residual(spec, graph, &full, a)?;
            z.retain(|i, _| graph.is_loop(*i));
            Ok(Cluster { a, z, residual: res, hits, iteration_hits })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultistartResult {
        count: representatives.len(),
        representatives,
        starts: cfg.n_starts,
        converged,
    })
}

/// Default schedule with the given start count, seed and cluster tolerance.
pub fn multistart_count<T: Scalar>(
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    n_starts: usize,
    seed: u64,
    cluster_tol: T,
) -> Result<MultistartResult<T>> {
    let mut cfg = MultistartConfig::new(n_starts, seed);
    cfg.cluster_tol = cluster_tol;
    multistart(spec, graph, &cfg)
}

/// Newton from an iteration limit; never makes it worse.
fn polish<T: Scalar>(sys: &ReducedSystem<T>, x: Vec<T>, tol: T) -> Vec<T> {
    match newton_log(sys, &x, 200, tol) {
        Iteration::Converged { x: y, .. } if sys.max_residual(&y) <= sys.max_residual(&x) => y,
        _ => x,
    }
}
