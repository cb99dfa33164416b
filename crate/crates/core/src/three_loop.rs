//! Graph with loops at 0 and at two nonzero spins sharing the activity `λ`,
//! branching order 2.
//!
//! Solutions come in two families. Symmetric ones (`z₁ = z₂`) solve the
//! one-dimensional branch equation with multiplicity 2. Asymmetric ones pair
//! the two roots of the loop quadratic, `z₂ = 1/z₁`, and their aggregate is a
//! root of the quartic
//!
//! ```text
//! q(x) = (1+x)⁴ − λ(x+2)(1+x)² + λΛ − 2λ²
//! ```
//!
//! on `x > 2√λ − 1`. There `q` is increasing when `λ ≤ 49/9`; otherwise it
//! falls to a minimum at `x₃` and rises again. With `q(2√λ−1) = λ(Λ − Λ1)`
//! and `q(x₃) = λ(Λ − Λ2)` the thresholds decide how many roots exist.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::boundary_law::ReducedSystem;
use crate::branch::{aggregate_floor, branch_roots, loop_z, LoopRoot};
use crate::error::{Error, Result};
use crate::model::{ActivitySpec, Branch, BoundaryLawSolution};
use crate::regime::{compare_with_tol, three_loop_case, CaseLabel, RegimeReport, CRITICAL_LOOP_ACTIVITY};
use crate::roots::solve_bracketed;
use crate::scalar::Scalar;

/// Common loop activity `λ = λ₁ = λ₂` and total activity `Λ ≥ 2λ`.
/// `Λ = +∞` encodes a divergent activity series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLoopProblem<T> {
    pub lambda: T,
    pub total: T,
}

impl<T: Scalar> ThreeLoopProblem<T> {
    pub fn new(lambda: T, total: T) -> Result<Self> {
        if !(lambda.is_finite() && lambda > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "loop activity must be finite and positive, got {lambda}"
            )));
        }
        if total.is_nan() || total < T::lit(2.0) * lambda {
            return Err(Error::InvalidInput(format!(
                "total activity {total} is below 2λ = {}, the loop activities it contains",
                T::lit(2.0) * lambda
            )));
        }
        Ok(ThreeLoopProblem { lambda, total })
    }

    /// Loops must carry equal activities; the unequal case has no closed form.
    pub fn from_spec(spec: &ActivitySpec<T>) -> Result<Self> {
        if spec.k != 2 {
            return Err(Error::InvalidInput(format!(
                "closed-form solving needs k = 2, got {}",
                spec.k
            )));
        }
        let loops: Vec<T> = spec.loops.values().copied().collect();
        match loops[..] {
            [a, b] if a == b => Self::new(a, spec.total_activity()),
            [a, b] => Err(Error::InvalidInput(format!(
                "loop activities {a} and {b} differ; only λ₁ = λ₂ is classified in closed form"
            ))),
            _ => Err(Error::InvalidInput(format!(
                "the three-loop graph needs exactly two nonzero loops, got {}",
                loops.len()
            ))),
        }
    }

    pub fn is_divergent(&self) -> bool {
        self.total.is_infinite()
    }

    fn system(&self) -> ReducedSystem<T> {
        ReducedSystem::new(2, vec![1, 2], vec![self.lambda, self.lambda], self.total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    pub lambda1: T,
    pub lambda2: T,
}

/// `Λ1 = 8λ^{3/2} − 10λ` and
/// `Λ2 = ((18λ² + 64λ)√(9λ² + 32λ) + 54λ³ + 288λ² + 2304λ) / 1024`.
pub fn thresholds<T: Scalar>(lambda: T) -> Thresholds<T> {
    let l = lambda;
    let lambda1 = T::lit(8.0) * l * l.sqrt() - T::lit(10.0) * l;
    let w = T::lit(9.0) * l * l + T::lit(32.0) * l;
    let lambda2 = ((T::lit(18.0) * l * l + T::lit(64.0) * l) * w.sqrt()
        + T::lit(54.0) * l * l * l
        + T::lit(288.0) * l * l
        + T::lit(2304.0) * l)
        / T::lit(1024.0);
    Thresholds { lambda1, lambda2 }
}

fn shifted_radicand<T: Scalar>(lambda: T, x: T) -> Result<T> {
    let y = T::one() + x;
    let bound = y * y / T::lit(4.0);
    if !(lambda > T::zero() && lambda <= bound) {
        return Err(Error::Domain(format!(
            "λ = {lambda} outside (0, (1+x)²/4 = {bound}]"
        )));
    }
    Ok((y * y - T::lit(4.0) * lambda).max(T::zero()))
}

fn symmetric_curve<T: Scalar>(lambda: T, x: T, total: T, sign: T) -> Result<T> {
    let d = shifted_radicand(lambda, x)?;
    let y = T::one() + x;
    Ok(y.powi(4) + sign * y.powi(3) * d.sqrt() - lambda * y * y * (T::lit(2.0) + x)
        + lambda * (total - T::lit(2.0) * lambda))
}

/// `h(λ, x) = (1+x)⁴ + (1+x)³√((1+x)² − 4λ) − λ(1+x)²(2+x) + λ(Λ − 2λ)`,
/// the upper-branch symmetric equation with `x = A`.
pub fn h_curve<T: Scalar>(lambda: T, x: T, total: T) -> Result<T> {
    symmetric_curve(lambda, x, total, T::one())
}

/// Lower-branch companion of [`h_curve`] (minus sign on the root).
pub fn delta_curve<T: Scalar>(lambda: T, x: T, total: T) -> Result<T> {
    symmetric_curve(lambda, x, total, -T::one())
}

pub fn q_poly<T: Scalar>(lambda: T, total: T, x: T) -> T {
    let y = T::one() + x;
    y.powi(4) - lambda * (x + T::lit(2.0)) * y * y + lambda * total - T::lit(2.0) * lambda * lambda
}

/// `q'(x) = 4x³ + (12 − 3λ)x² + (12 − 8λ)x + 4 − 5λ`.
pub fn q_derivative<T: Scalar>(lambda: T, x: T) -> T {
    let c = T::lit;
    ((c(4.0) * x + c(12.0) - c(3.0) * lambda) * x + c(12.0) - c(8.0) * lambda) * x + c(4.0)
        - c(5.0) * lambda
}

/// Critical points of `q` other than `x = −1`:
/// `x₂,₃ = (3λ − 8 ∓ √(9λ² + 32λ)) / 8`.
pub fn q_critical_points<T: Scalar>(lambda: T) -> (T, T) {
    let c = T::lit;
    let w = (c(9.0) * lambda * lambda + c(32.0) * lambda).sqrt();
    let base = c(3.0) * lambda - c(8.0);
    ((base - w) / c(8.0), (base + w) / c(8.0))
}

/// Every symmetric solution (`z₁ = z₂`).
pub fn symmetric_solutions<T: Scalar>(
    problem: &ThreeLoopProblem<T>,
) -> Result<Vec<BoundaryLawSolution<T>>> {
    if problem.is_divergent() {
        return Err(Error::DivergentActivities);
    }
    let sys = problem.system();
    Ok(branch_roots(problem.lambda, problem.total, T::lit(2.0))?
        .into_iter()
        .map(|r| BoundaryLawSolution {
            a: r.a,
            loop_z: BTreeMap::from([(1, r.z), (2, r.z)]),
            branch: Branch::Symmetric,
            residual: sys.max_residual(&[r.z, r.z, r.a]),
        })
        .collect())
}

/// The symmetric solution; [`Error::NotUnique`] if the scan finds several.
pub fn solve_symmetric<T: Scalar>(problem: &ThreeLoopProblem<T>) -> Result<BoundaryLawSolution<T>> {
    let mut all = symmetric_solutions(problem)?;
    match all.len() {
        0 => Err(Error::NumericalFailure(format!(
            "no symmetric branch bracketed a root for λ = {}, Λ = {}",
            problem.lambda, problem.total
        ))),
        1 => Ok(all.remove(0)),
        count => Err(Error::NotUnique { count }),
    }
}

/// Roots of `q` on `(2√λ − 1, ∞)`, ascending. A double root at `x₃`
/// (`Λ = Λ2`) is returned once.
pub fn solve_asymmetric<T: Scalar>(problem: &ThreeLoopProblem<T>) -> Result<Vec<T>> {
    if problem.is_divergent() {
        return Err(Error::DivergentActivities);
    }
    let (lambda, total) = (problem.lambda, problem.total);
    let th = thresholds(lambda);
    let q = |x: T| q_poly(lambda, total, x);
    let dq = |x: T| q_derivative(lambda, x);
    let lo = aggregate_floor(lambda);
    let c1 = compare_with_tol(total, th.lambda1);

    // doubles until q turns positive; q(∞) = ∞
    let upper_bracket = |from: T| -> Result<T> {
        let mut hi = from.max(T::one()) * T::lit(2.0);
        for _ in 0..200 {
            if q(hi) > T::zero() {
                return Ok(hi);
            }
            hi = hi * T::lit(2.0);
        }
        Err(Error::NumericalFailure("q never turned positive".into()))
    };

    if lambda <= T::lit(CRITICAL_LOOP_ACTIVITY) {
        if c1 != Ordering::Less {
            return Ok(vec![]);
        }
        let hi = upper_bracket(lo)?;
        return Ok(vec![solve_bracketed(q, dq, lo, hi)]);
    }

    let (_, x3) = q_critical_points(lambda);
    let mut roots = Vec::new();
    match compare_with_tol(total, th.lambda2) {
        Ordering::Greater => {}
        Ordering::Equal => {
            // tangency at x₃; in floating point q(x₃) may be a hair negative,
            // in which case the nearby root on the right is an exact zero
            if q(x3) < T::zero() {
                let hi = upper_bracket(x3)?;
                roots.push(solve_bracketed(q, dq, x3, hi));
            } else {
                roots.push(x3);
            }
        }
        Ordering::Less => {
            if c1 == Ordering::Greater {
                roots.push(solve_bracketed(q, dq, lo, x3));
            }
            let hi = upper_bracket(x3)?;
            roots.push(solve_bracketed(q, dq, x3, hi));
        }
    }
    Ok(roots)
}

/// Every solution: the symmetric ones, then for each asymmetric aggregate
/// the pair `(z⁽¹⁾, z⁽²⁾)` and its swap.
pub fn enumerate_solutions<T: Scalar>(
    problem: &ThreeLoopProblem<T>,
) -> Result<Vec<BoundaryLawSolution<T>>> {
    let mut out = symmetric_solutions(problem)?;
    let sys = problem.system();
    let tags = [
        (Branch::AsymmetricA1, Branch::AsymmetricA1Swapped),
        (Branch::AsymmetricA2, Branch::AsymmetricA2Swapped),
    ];
    for (a, (tag, swapped)) in solve_asymmetric(problem)?.into_iter().zip(tags) {
        let z_hi = loop_z(a, problem.lambda, LoopRoot::Upper).ok_or_else(|| {
            Error::NumericalFailure(format!("asymmetric root A = {a} below the branch point"))
        })?;
        let z_lo = z_hi.recip();
        for (z1, z2, branch) in [(z_hi, z_lo, tag), (z_lo, z_hi, swapped)] {
            out.push(BoundaryLawSolution {
                a,
                loop_z: BTreeMap::from([(1, z1), (2, z2)]),
                branch,
                residual: sys.max_residual(&[z1, z2, a]),
            });
        }
    }
    Ok(out)
}

pub fn classify<T: Scalar>(problem: &ThreeLoopProblem<T>) -> RegimeReport<T> {
    let th = thresholds(problem.lambda);
    let (total, case_label) = if problem.is_divergent() {
        (None, CaseLabel::Divergent)
    } else {
        (
            Some(problem.total),
            three_loop_case(problem.lambda, problem.total, th.lambda1, th.lambda2),
        )
    };
    RegimeReport {
        lambda: problem.lambda,
        total,
        lambda1: Some(th.lambda1),
        lambda2: Some(th.lambda2),
        count: case_label.count().expect("three-loop cases carry a count"),
        case_label,
    }
}
