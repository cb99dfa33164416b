//! Graph with loops at 0 and at one nonzero spin, branching order 2.

use std::collections::BTreeMap;

use crate::boundary_law::ReducedSystem;
use crate::branch::{branch_roots, LoopRoot};
use crate::error::{Error, Result};
use crate::model::{ActivitySpec, Branch, BoundaryLawSolution};
use crate::regime::{CaseLabel, RegimeReport};
use crate::scalar::Scalar;

/// Loop activity `λ₁` and total activity `Λ` (which includes `λ₁`).
/// `Λ = +∞` encodes a divergent activity series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLoopProblem<T> {
    pub lambda1: T,
    pub total: T,
}

impl<T: Scalar> TwoLoopProblem<T> {
    pub fn new(lambda1: T, total: T) -> Result<Self> {
        if !(lambda1.is_finite() && lambda1 > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "loop activity must be finite and positive, got {lambda1}"
            )));
        }
        if total.is_nan() || total < lambda1 {
            return Err(Error::InvalidInput(format!(
                "total activity {total} is below the loop activity {lambda1} it contains"
            )));
        }
        Ok(TwoLoopProblem { lambda1, total })
    }

    pub fn from_spec(spec: &ActivitySpec<T>) -> Result<Self> {
        if spec.k != 2 {
            return Err(Error::InvalidInput(format!(
                "closed-form solving needs k = 2, got {}",
                spec.k
            )));
        }
        let mut it = spec.loops.values();
        match (it.next(), it.next()) {
            (Some(&l), None) => Self::new(l, spec.total_activity()),
            _ => Err(Error::InvalidInput(format!(
                "the two-loop graph needs exactly one nonzero loop, got {}",
                spec.loops.len()
            ))),
        }
    }

    pub fn is_divergent(&self) -> bool {
        self.total.is_infinite()
    }

    fn system(&self) -> ReducedSystem<T> {
        ReducedSystem::new(2, vec![1], vec![self.lambda1], self.total)
    }
}

fn curve_radicand<T: Scalar>(lambda: T, x: T) -> Result<T> {
    let bound = x * x / T::lit(4.0);
    if !(lambda > T::zero() && lambda <= bound) {
        return Err(Error::Domain(format!(
            "λ = {lambda} outside (0, x²/4 = {bound}]"
        )));
    }
    Ok((x * x - T::lit(4.0) * lambda).max(T::zero()))
}

/// `f(λ, x) = x⁴ + x³(√(x² − 4λ) − 2λ) + 2λ(Λ − λ)` on `λ ∈ (0, x²/4]`.
///
/// With `x = 1 + A` its zero in `λ` reproduces the upper-branch equation.
pub fn f_curve<T: Scalar>(lambda: T, x: T, total: T) -> Result<T> {
    let d = curve_radicand(lambda, x)?;
    let two = T::lit(2.0);
    Ok(x.powi(4) + x.powi(3) * (d.sqrt() - two * lambda) + two * lambda * (total - lambda))
}

/// `g(λ, x) = x⁴ − x³(√(x² − 4λ) + 2λ) + 2λ(Λ − λ)`, the lower-branch
/// companion of [`f_curve`].
pub fn g_curve<T: Scalar>(lambda: T, x: T, total: T) -> Result<T> {
    let d = curve_radicand(lambda, x)?;
    let two = T::lit(2.0);
    Ok(x.powi(4) - x.powi(3) * (d.sqrt() + two * lambda) + two * lambda * (total - lambda))
}

fn to_solution<T: Scalar>(
    problem: &TwoLoopProblem<T>,
    a: T,
    z: T,
    root: LoopRoot,
) -> BoundaryLawSolution<T> {
    let residual = problem.system().max_residual(&[z, a]);
    BoundaryLawSolution {
        a,
        loop_z: BTreeMap::from([(1, z)]),
        branch: match root {
            LoopRoot::Upper => Branch::TwoLoopF,
            LoopRoot::Lower => Branch::TwoLoopG,
        },
        residual,
    }
}

/// Every positive solution `(A, z₁)`, loop labelled `1`.
pub fn solve_all<T: Scalar>(problem: &TwoLoopProblem<T>) -> Result<Vec<BoundaryLawSolution<T>>> {
    if problem.is_divergent() {
        return Err(Error::DivergentActivities);
    }
    Ok(branch_roots(problem.lambda1, problem.total, T::one())?
        .into_iter()
        .map(|r| to_solution(problem, r.a, r.z, r.root))
        .collect())
}

/// The unique positive solution.
///
/// Fails with [`Error::NotUnique`] when the branch scan finds more than one
/// root; this happens for large `λ₁` and `Λ` (for example `λ₁ = 16.9`,
/// `Λ = 507.5` has three).
pub fn solve_unique<T: Scalar>(problem: &TwoLoopProblem<T>) -> Result<BoundaryLawSolution<T>> {
    let mut all = solve_all(problem)?;
    match all.len() {
        0 => Err(Error::NumericalFailure(format!(
            "no branch bracketed a root for λ₁ = {}, Λ = {}",
            problem.lambda1, problem.total
        ))),
        1 => Ok(all.remove(0)),
        count => Err(Error::NotUnique { count }),
    }
}

pub fn classify<T: Scalar>(problem: &TwoLoopProblem<T>) -> Result<RegimeReport<T>> {
    if problem.is_divergent() {
        return Ok(RegimeReport {
            lambda: problem.lambda1,
            total: None,
            lambda1: None,
            lambda2: None,
            count: 0,
            case_label: CaseLabel::Divergent,
        });
    }
    let count = solve_all(problem)?.len();
    Ok(RegimeReport {
        lambda: problem.lambda1,
        total: Some(problem.total),
        lambda1: None,
        lambda2: None,
        count,
        case_label: if count == 1 {
            CaseLabel::TwoLoopUnique
        } else {
            CaseLabel::TwoLoopNonUnique
        },
    })
}
