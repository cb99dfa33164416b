//! Bracketed bisection with Newton polishing for scalar equations.

use crate::scalar::Scalar;

/// Bisects `f` on `[lo, hi]`, which must bracket a sign change, until the
/// bracket is narrower than `rel_width · max(1, |x|)`.
///
/// Returns the final bracket.
pub fn bisect<T: Scalar, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T, rel_width: T) -> (T, T) {
    let two = T::lit(2.0);
    let mut f_lo = f(lo);
    if f_lo == T::zero() {
        return (lo, lo);
    }
    for _ in 0..400 {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if hi - lo <= rel_width * T::one().max(mid.abs()) {
            break;
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return (mid, mid);
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// At most `max_steps` Newton steps from the midpoint of `[lo, hi]`. A step
/// is only taken when it stays in the bracket and lowers `|f|`, so the
/// result is never worse than the bisection estimate.
pub fn newton_polish<T: Scalar, F, D>(f: F, df: D, lo: T, hi: T, max_steps: usize, tol: T) -> T
where
    F: Fn(T) -> T,
    D: Fn(T) -> T,
{
    let mut x = lo + (hi - lo) / T::lit(2.0);
    let mut fx = f(x);
    for _ in 0..max_steps {
        if fx.abs() <= tol {
            break;
        }
        let d = df(x);
        if !d.is_finite() || d == T::zero() {
            break;
        }
        let next = x - fx / d;
        if !(next >= lo && next <= hi) {
            break;
        }
        let f_next = f(next);
        if !(f_next.abs() < fx.abs()) {
            break;
        }
        x = next;
        fx = f_next;
    }
    x
}

/// Bisection to `T::bisect_tol()` followed by up to five Newton steps.
pub fn solve_bracketed<T: Scalar, F, D>(f: F, df: D, lo: T, hi: T) -> T
where
    F: Fn(T) -> T,
    D: Fn(T) -> T,
{
    let (a, b) = bisect(&f, lo, hi, T::bisect_tol());
    if a == b {
        return a;
    }
    newton_polish(&f, df, a, b, 5, T::polish_tol())
}

/// Sign-change brackets of `f` over an increasing sample grid. An exact
/// zero at a sample point is reported as the degenerate bracket `(x, x)`.
pub fn sign_change_brackets<T: Scalar, F: Fn(T) -> T>(f: F, grid: &[T]) -> Vec<(T, T)> {
    let mut out = Vec::new();
    let mut prev: Option<(T, T)> = None;
    for &x in grid {
        let fx = f(x);
        if !fx.is_finite() {
            prev = None;
            continue;
        }
        if fx == T::zero() {
            out.push((x, x));
            prev = Some((x, fx));
            continue;
        }
        if let Some((px, pf)) = prev {
            if pf != T::zero() && (pf < T::zero()) != (fx < T::zero()) {
                out.push((px, x));
            }
        }
        prev = Some((x, fx));
    }
    out
}

/// Sample grid on `[lo, hi]`: geometric spacing near `lo` (where the loop
/// branches have a square-root singularity) merged with uniform spacing.
pub fn scan_grid<T: Scalar>(lo: T, hi: T, uniform: usize, geometric: usize) -> Vec<T> {
    let width = hi - lo;
    let mut grid = Vec::with_capacity(uniform + geometric + 2);
    grid.push(lo);
    for i in 0..geometric {
        // offsets from 1e-14 to 1 of the width
        let e = -14.0 + 14.0 * i as f64 / geometric as f64;
        grid.push(lo + width * T::lit(10f64.powf(e)));
    }
    for i in 1..=uniform {
        grid.push(lo + width * T::lit(i as f64 / uniform as f64));
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();
    grid
}
