//! Consistency equations for translation-invariant boundary laws.
//!
//! With `z_0 = 1` the law satisfies, for every nonzero spin `i`,
//!
//! ```text
//! z_i = λ_i · ((a_{i0} + Σ_{j≠0} a_{ij} z_j) / (1 + A))^k,    A = Σ_{j≠0} z_j.
//! ```
//!
//! On the hub-plus-loops graph a non-loop spin sees only spin 0, so
//! `z_j = λ_j / (1+A)^k`, and summing over them collapses the infinite
//! system onto the loop coordinates plus `A`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{ActivitySpec, AdmissibilityGraph, BoundaryLawSolution};
use crate::scalar::Scalar;

/// The `(|loops| + 1)`-dimensional system in `(z_loops, A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem<T> {
    pub k: u32,
    pub loop_labels: Vec<i64>,
    pub lambda_loops: Vec<T>,
    /// `Λ`, the total nonzero-spin activity (loops included).
    pub lambda_total: T,
}

impl<T: Scalar> ReducedSystem<T> {
    pub fn new(k: u32, loop_labels: Vec<i64>, lambda_loops: Vec<T>, lambda_total: T) -> Self {
        assert_eq!(loop_labels.len(), lambda_loops.len());
        ReducedSystem {
            k,
            loop_labels,
            lambda_loops,
            lambda_total,
        }
    }

    pub fn dim(&self) -> usize {
        self.lambda_loops.len() + 1
    }

    /// Activity carried by the non-loop spins.
    pub fn non_loop_mass(&self) -> T {
        self.lambda_total - self.lambda_loops.iter().copied().sum::<T>()
    }

    fn pow_k(&self, x: T) -> T {
        x.powi(self.k as i32)
    }

    /// The fixed-point map `F` on `x = (z_1, …, z_m, A)`.
    pub fn map(&self, x: &[T]) -> Vec<T> {
        let a = x[self.dim() - 1];
        let inv = T::one() / self.pow_k(T::one() + a);
        let mut out: Vec<T> = self
            .lambda_loops
            .iter()
            .zip(x)
            .map(|(&l, &z)| l * self.pow_k(T::one() + z) * inv)
            .collect();
        let agg = out.iter().copied().sum::<T>() + self.non_loop_mass() * inv;
        out.push(agg);
        out
    }

    /// `x − F(x)` with the aggregate equation written as
    /// `A − Σ z_i − (Λ − Σ λ_i)/(1+A)^k`.
    pub fn residuals(&self, x: &[T]) -> Vec<T> {
        let m = self.lambda_loops.len();
        let a = x[m];
        let inv = T::one() / self.pow_k(T::one() + a);
        let mut out: Vec<T> = self
            .lambda_loops
            .iter()
            .zip(x)
            .map(|(&l, &z)| z - l * self.pow_k(T::one() + z) * inv)
            .collect();
        let zsum: T = x[..m].iter().copied().sum();
        out.push(a - zsum - self.non_loop_mass() * inv);
        out
    }

    pub fn max_residual(&self, x: &[T]) -> T {
        self.residuals(x)
            .into_iter()
            .fold(T::zero(), |m, r| if r.is_nan() { T::nan() } else { m.max(r.abs()) })
    }

    /// Jacobian of [`Self::residuals`], row-major.
    pub fn jacobian(&self, x: &[T]) -> Vec<Vec<T>> {
        let m = self.lambda_loops.len();
        let n = m + 1;
        let k = T::lit(self.k as f64);
        let a = x[m];
        let one_a = T::one() + a;
        let inv_k = T::one() / self.pow_k(one_a);
        let inv_k1 = inv_k / one_a;
        let mut jac = vec![vec![T::zero(); n]; n];
        for i in 0..m {
            let l = self.lambda_loops[i];
            let one_z = T::one() + x[i];
            jac[i][i] = T::one() - k * l * one_z.powi(self.k as i32 - 1) * inv_k;
            jac[i][m] = k * l * self.pow_k(one_z) * inv_k1;
            jac[m][i] = -T::one();
        }
        jac[m][m] = T::one() + k * self.non_loop_mass() * inv_k1;
        jac
    }
}

fn check_graph<T: Scalar>(spec: &ActivitySpec<T>, graph: &AdmissibilityGraph) -> Result<()> {
    if spec.loops.keys().ne(graph.loops().iter()) {
        return Err(Error::InvalidInput(format!(
            "graph loops {:?} do not match the loop activities {:?}",
            graph.loops(),
            spec.loops.keys().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// Collapses the spec onto its reduced system.
pub fn reduce<T: Scalar>(
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
) -> Result<ReducedSystem<T>> {
    check_graph(spec, graph)?;
    if spec.divergent {
        return Err(Error::DivergentActivities);
    }
    let (labels, lambdas) = spec.loops.iter().map(|(&i, &l)| (i, l)).unzip();
    Ok(ReducedSystem::new(spec.k, labels, lambdas, spec.total_activity()))
}

/// Maximum absolute violation of the consistency equations at `(z, A)`.
///
/// `z` must hold every loop spin and every explicitly listed tail spin.
pub fn residual<T: Scalar>(
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    z: &BTreeMap<i64, T>,
    a_claimed: T,
) -> Result<T> {
    let system = reduce(spec, graph)?;
    if !(a_claimed > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "aggregate A must be positive, got {a_claimed}"
        )));
    }
    if let Some((i, v)) = z.iter().find(|(_, v)| !(**v > T::zero())) {
        return Err(Error::InvalidInput(format!(
            "boundary-law coordinate z_{i} must be positive, got {v}"
        )));
    }
    let lookup = |i: &i64| {
        z.get(i)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("missing coordinate z_{i}")))
    };
    let mut x = system
        .loop_labels
        .iter()
        .map(lookup)
        .collect::<Result<Vec<T>>>()?;
    x.push(a_claimed);
    let mut worst = system.max_residual(&x);
    let inv = T::one() / (T::one() + a_claimed).powi(spec.k as i32);
    for (i, &l) in &spec.tail {
        let zj = lookup(i)?;
        worst = worst.max((zj - l * inv).abs());
    }
    Ok(worst)
}

/// Residual of a solver output, computed from its expansion.
pub fn solution_residual<T: Scalar>(
    spec: &ActivitySpec<T>,
    graph: &AdmissibilityGraph,
    solution: &BoundaryLawSolution<T>,
) -> Result<T> {
    residual(spec, graph, &expand(solution, spec).z, solution.a)
}

/// Every listed coordinate of a reduced solution, plus the total boundary-law
/// mass carried by the unlisted tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion<T> {
    pub z: BTreeMap<i64, T>,
    pub tail_z_mass: T,
}

pub fn expand<T: Scalar>(solution: &BoundaryLawSolution<T>, spec: &ActivitySpec<T>) -> Expansion<T> {
    let inv = T::one() / (T::one() + solution.a).powi(spec.k as i32);
    let mut z = solution.loop_z.clone();
    z.extend(spec.tail.iter().map(|(&j, &l)| (j, l * inv)));
    Expansion {
        z,
        tail_z_mass: spec.tail_mass * inv,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalisability<T> {
    pub normalisable: bool,
    /// `Σ z_j^{(k+1)/k}` over the listed coordinates.
    pub explicit_sum: T,
    /// Upper bound for the same sum over the unlisted tail.
    pub tail_bound: T,
}

/// Checks `z ∈ ℓ^{(k+1)/k}`. Every unlisted `z_j` is at most the tail
/// z-mass `m`, so the tail contributes at most `m · m^{1/k}`.
pub fn normalisable<T: Scalar>(
    solution: &BoundaryLawSolution<T>,
    spec: &ActivitySpec<T>,
) -> Normalisability<T> {
    if spec.divergent {
        return Normalisability {
            normalisable: false,
            explicit_sum: T::infinity(),
            tail_bound: T::infinity(),
        };
    }
    let k = T::lit(spec.k as f64);
    let p = (k + T::one()) / k;
    let e = expand(solution, spec);
    let explicit_sum: T = e.z.values().map(|z| z.powf(p)).sum();
    let tail_bound = e.tail_z_mass * e.tail_z_mass.powf(T::one() / k);
    Normalisability {
        normalisable: explicit_sum.is_finite() && tail_bound.is_finite(),
        explicit_sum,
        tail_bound,
    }
}
