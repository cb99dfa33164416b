//! The loop quadratic and the one-dimensional aggregate equation shared by
//! the two-loop solver and the symmetric three-loop solver (k = 2).
//!
//! A loop spin with activity `λ` satisfies `z (1+A)² = λ (1+z)²`, whose
//! roots are real iff `(1+A)² ≥ 4λ`:
//!
//! ```text
//! z⁽¹'²⁾ = ((1+A)² − 2λ ± (1+A) √((1+A)² − 4λ)) / (2λ),   z⁽¹⁾ z⁽²⁾ = 1.
//! ```
//!
//! With `c` loop spins sharing that activity and coordinate, summing the
//! consistency equations gives `A (1+A)² = Λ + c λ z (2 + z)`. Substituting
//! either root leaves one equation `Ψ(A) = 0` in the aggregate alone.

use crate::error::{Error, Result};
use crate::roots::{scan_grid, sign_change_brackets, solve_bracketed};
use crate::scalar::Scalar;

/// Which root of the loop quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopRoot {
    /// `z⁽¹⁾ ≥ 1`.
    Upper,
    /// `z⁽²⁾ = 1/z⁽¹⁾ ≤ 1`.
    Lower,
}

/// Smallest admissible aggregate: `max(0, 2√λ − 1)`.
pub fn aggregate_floor<T: Scalar>(lambda: T) -> T {
    (T::lit(2.0) * lambda.sqrt() - T::one()).max(T::zero())
}

/// Root of the loop quadratic at aggregate `a`; `None` when complex.
///
/// The lower root is taken as the reciprocal of the upper one, which avoids
/// the cancellation in the minus-sign formula.
pub fn loop_z<T: Scalar>(a: T, lambda: T, root: LoopRoot) -> Option<T> {
    let y = T::one() + a;
    let s = y * y;
    let mut disc = s - T::lit(4.0) * lambda;
    // at the floor 2√λ − 1 the discriminant is zero up to rounding, and the
    // square root would blow that rounding up to √ε
    if disc.abs() <= T::lit(64.0) * T::epsilon() * s {
        disc = T::zero();
    }
    if disc < T::zero() {
        return None;
    }
    let two = T::lit(2.0);
    let upper = (s - two * lambda + y * disc.sqrt()) / (two * lambda);
    Some(match root {
        LoopRoot::Upper => upper,
        LoopRoot::Lower => upper.recip(),
    })
}

/// `Ψ(A) = A(1+A)² − Λ − c λ z(A) (2 + z(A))` on one root branch.
pub fn psi<T: Scalar>(a: T, lambda: T, total: T, mult: T, root: LoopRoot) -> T {
    match loop_z(a, lambda, root) {
        Some(z) => {
            let y = T::one() + a;
            a * y * y - total - mult * lambda * z * (T::lit(2.0) + z)
        }
        None => T::nan(),
    }
}

/// `dΨ/dA`, using `dz/dA = 2(1+A) z / (2λ(1+z) − (1+A)²)` from implicit
/// differentiation of the loop quadratic. Infinite at the branch point.
pub fn psi_derivative<T: Scalar>(a: T, lambda: T, mult: T, root: LoopRoot) -> T {
    let Some(z) = loop_z(a, lambda, root) else {
        return T::nan();
    };
    let two = T::lit(2.0);
    let y = T::one() + a;
    let s = y * y;
    let dz = two * y * z / (two * lambda * (T::one() + z) - s);
    s + two * a * y - mult * lambda * (two + two * z) * dz
}

/// An aggregate beyond which neither branch has a root.
///
/// On the lower branch `z ≤ 1`, so `Ψ ≥ (1+A)²(A − c) − (Λ − cλ)`, positive
/// once `A > c + Λ − cλ`. On the upper branch `z ≥ ((1+A)² − 2λ)/(2λ)`,
/// which makes `Ψ` negative once `c(1+A)² − 2λ(1+A) − 2cλ > 0`.
pub fn aggregate_ceiling<T: Scalar>(lambda: T, total: T, mult: T) -> T {
    let two = T::lit(2.0);
    let lower = mult + (total - mult * lambda) + T::one();
    let y = (two * lambda + (T::lit(4.0) * lambda * lambda + T::lit(8.0) * mult * mult * lambda).sqrt())
        / (two * mult);
    let upper = T::lit(1.5) * y;
    lower.max(upper).max(aggregate_floor(lambda) + T::one())
}

/// A root of `Ψ` on one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRoot<T> {
    pub a: T,
    pub z: T,
    pub root: LoopRoot,
}

/// Every root of `Ψ` on both branches, sorted by aggregate.
///
/// Each branch is scanned for sign changes on a grid spanning
/// `[aggregate_floor, aggregate_ceiling]`, then every bracket is bisected
/// and Newton-polished. Both branches meet at the floor (where `z = 1`), so
/// a root sitting exactly there is reported once.
pub fn branch_roots<T: Scalar>(lambda: T, total: T, mult: T) -> Result<Vec<BranchRoot<T>>> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("loop activity must be positive, got {lambda}")));
    }
    if total.is_infinite() {
        return Err(Error::DivergentActivities);
    }
    let lo = aggregate_floor(lambda);
    let hi = aggregate_ceiling(lambda, total, mult);
    let grid = scan_grid(lo, hi, 4096, 512);
    let mut found: Vec<BranchRoot<T>> = Vec::new();
    for root in [LoopRoot::Upper, LoopRoot::Lower] {
        let f = |a: T| psi(a, lambda, total, mult, root);
        let df = |a: T| psi_derivative(a, lambda, mult, root);
        for (a0, a1) in sign_change_brackets(f, &grid) {
            let a = if a0 == a1 {
                a0
            } else {
                // next to the floor Ψ has a square-root cusp and the polished
                // point can be worse than an endpoint
                [solve_bracketed(f, df, a0, a1), a0, a1]
                    .into_iter()
                    .min_by(|p, q| f(*p).abs().partial_cmp(&f(*q).abs()).expect("finite"))
                    .expect("three candidates")
            };
            let z = loop_z(a, lambda, root).ok_or_else(|| {
                Error::NumericalFailure(format!("root A = {a} left the real branch"))
            })?;
            let duplicate = found.iter().any(|r| r.a == a && a == lo);
            if !duplicate {
                found.push(BranchRoot { a, z, root });
            }
        }
    }
    // a root touching the floor without crossing (the pitchfork at Λ = Λ1
    // when λ = 49/9) leaves no sign change; accept the floor itself when Ψ
    // vanishes there to polishing accuracy
    let at_floor = psi(lo, lambda, total, mult, LoopRoot::Upper);
    let near_floor = |a: T| (a - lo).abs() <= T::lit(1e-6) * T::one().max(lo);
    if at_floor.abs() <= T::polish_tol() * T::one().max(total) && !found.iter().any(|r| near_floor(r.a)) {
        let z = loop_z(lo, lambda, LoopRoot::Upper).expect("real at the floor");
        found.push(BranchRoot { a: lo, z, root: LoopRoot::Upper });
    }
    found.sort_by(|p, q| p.a.partial_cmp(&q.a).expect("finite roots"));
    Ok(found)
}
