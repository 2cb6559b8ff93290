//! Bracketing root finders and a derivative-free 1-D minimizer.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Bisection on `[lo, hi]` for a sign change of `f`.
///
/// Stops when the bracket stops shrinking in floating point or after `max_iter` halvings.
pub fn bisect<S, F>(mut f: F, mut lo: S, mut hi: S, max_iter: usize) -> Result<S>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == S::zero() {
        return Ok(lo);
    }
    if fhi == S::zero() {
        return Ok(hi);
    }
    if (flo > S::zero()) == (fhi > S::zero()) {
        return Err(Error::Numerical(format!(
            "bisection bracket has no sign change: f({lo})={flo}, f({hi})={fhi}"
        )));
    }
    let two = lit::<S>(2.0);
    for _ in 0..max_iter {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == S::zero() {
            return Ok(mid);
        }
        if (fm > S::zero()) == (flo > S::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / two)
}

/// Golden-section search for the minimizer of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(argmin, min)`.
pub fn golden_section<S, F>(mut f: F, mut lo: S, mut hi: S, tol: S) -> (S, S)
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    let inv_phi = (lit::<S>(5.0).sqrt() - S::one()) / lit(2.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..500 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = (lo + hi) / lit(2.0);
    let fx = f(x);
    let (mut best, mut fbest) = (x, fx);
    for (xc, fc) in [(x1, f1), (x2, f2)] {
        if fc < fbest {
            best = xc;
            fbest = fc;
        }
    }
    (best, fbest)
}

/// Minimizes a convex `f` on the real line: expands a bracket around `start`
/// until the function rises on both sides, then runs golden-section search.
pub fn minimize_convex<S, F>(mut f: F, start: S, step: S, tol: S) -> (S, S)
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    let mut lo = start - step;
    let mut hi = start + step;
    let f0 = f(start);
    let mut width = step;
    for _ in 0..200 {
        if f(lo) > f0 {
            break;
        }
        width = width * lit(2.0);
        lo = start - width;
    }
    width = step;
    for _ in 0..200 {
        if f(hi) > f0 {
            break;
        }
        width = width * lit(2.0);
        hi = start + width;
    }
    golden_section(f, lo, hi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisect_rejects_bracket_without_sign_change() {
        assert!(bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 10).is_err());
    }

    #[test]
    fn minimize_shifted_parabola() {
        let (x, fx) = minimize_convex(|x: f64| 3.0 * (x - 7.5).powi(2) + 1.25, 0.0, 1.0, 1e-12);
        assert!((x - 7.5).abs() < 1e-8);
        assert!((fx - 1.25).abs() < 1e-14);
    }
}
