//! Log-domain arithmetic for probabilities that span hundreds of orders of magnitude.

use crate::scalar::{lit, Scalar};

/// Terms further than this many nats below the running maximum are dropped
/// from a log-sum-exp; each contributes less than `e^-60` relative.
const CUTOFF: f64 = 60.0;

/// `ln Σ exp(x_i)` with max extraction. Empty or all `-inf` input gives `-inf`.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if max == S::neg_infinity() {
        return max;
    }
    if max == S::infinity() {
        return max;
    }
    let floor = max - lit(CUTOFF);
    let mut acc = S::zero();
    for &x in xs {
        if x > floor {
            acc = acc + (x - max).exp();
        }
    }
    max + acc.ln()
}

/// Streaming form of [`log_sum_exp`] over an iterator of terms.
///
/// Makes two passes, so the iterator must be cloneable.
pub fn log_sum_exp_iter<S, I>(terms: I) -> S
where
    S: Scalar,
    I: Iterator<Item = S> + Clone,
{
    let max = terms.clone().fold(S::neg_infinity(), S::max);
    if max == S::neg_infinity() || max == S::infinity() {
        return max;
    }
    let floor = max - lit(CUTOFF);
    let mut acc = S::zero();
    for x in terms {
        if x > floor {
            acc = acc + (x - max).exp();
        }
    }
    max + acc.ln()
}

#[inline]
pub fn log_add_exp<S: Scalar>(a: S, b: S) -> S {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == S::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`; `-inf` when equal.
#[inline]
pub fn log_sub_exp<S: Scalar>(a: S, b: S) -> S {
    debug_assert!(a >= b || b == S::neg_infinity());
    if b == S::neg_infinity() {
        return a;
    }
    let d = b - a;
    if d >= S::zero() {
        return S::neg_infinity();
    }
    a + log1m_exp(d)
}

/// `ln(1 - e^x)` for `x <= 0`, accurate near both ends.
#[inline]
pub fn log1m_exp<S: Scalar>(x: S) -> S {
    if x > -S::LN_2() {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln((e^x - 1)/x)` style helper: `ln(expm1(x))` for `x > 0`.
#[inline]
pub fn ln_expm1<S: Scalar>(x: S) -> S {
    if x > lit(30.0) {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// Normalizes log-weights into log-probabilities in place, returning the log normalizer.
pub fn normalize_in_place<S: Scalar>(logw: &mut [S]) -> S {
    let z = log_sum_exp(logw);
    for w in logw.iter_mut() {
        *w = *w - z;
    }
    z
}
