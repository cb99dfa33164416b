//! Scalar abstraction shared by every solver.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type the solvers are generic over.
///
/// The tolerance hooks carry the precision contract of each type: `f64`
/// honours the published tolerances, `f32` gets proportionally looser ones.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Bound on the boundary-law residual of an accepted solution.
    fn residual_tol() -> Self;
    /// Relative bracket width at which bisection stops.
    fn bisect_tol() -> Self;
    /// Target for `|Ψ|` during Newton polishing.
    fn polish_tol() -> Self;
    /// Relative tolerance for deciding threshold equalities such as `Λ = Λ2`.
    fn threshold_tol() -> Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn residual_tol() -> Self {
        1e-10
    }
    fn bisect_tol() -> Self {
        1e-13
    }
    fn polish_tol() -> Self {
        1e-12
    }
    fn threshold_tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn residual_tol() -> Self {
        2e-3
    }
    fn bisect_tol() -> Self {
        1e-6
    }
    fn polish_tol() -> Self {
        1e-5
    }
    fn threshold_tol() -> Self {
        1e-5
    }
}

/// `true` when `a` and `b` agree to `rel` relative to `max(1, |a|, |b|)`.
pub fn approx_eq<T: Scalar>(a: T, b: T, rel: T) -> bool {
    let scale = T::one().max(a.abs()).max(b.abs());
    (a - b).abs() <= rel * scale
}
