//! The duality relation `T e^{-T} = c e^{-c}`, its parametrization, and the
//! Borel weights `h(k)` that are the limiting jump intensities.

use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::optimize::bisect;
use crate::scalar::{from_usize, lit, CompensatedSum, LogFactorials, Scalar};

/// Default truncation for Borel series.
pub const DEFAULT_TRUNCATION: usize = 10_000;

/// A pair `(c, T)` with `T e^{-T} = c e^{-c}` and `T <= 1`.
///
/// `t = T / c` is the parametrization variable: for `c > 1`,
/// `c = -ln t / (1 - t)` and `T = -t ln t / (1 - t)`. For `c <= 1` the pair is
/// degenerate (`T = c`) and `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityPair<S> {
    pub c: S,
    pub t_dual: S,
    pub t: S,
}

impl<S: Scalar> DualityPair<S> {
    /// `T / c`, the asymptotic fraction of vertices outside the giant component.
    pub fn ratio(&self) -> S {
        self.t_dual / self.c
    }

    /// `1 - T/c`, the asymptotic giant component fraction (zero for `c <= 1`).
    pub fn giant_fraction(&self) -> S {
        S::one() - self.ratio()
    }

    /// `|T e^{-T} - c e^{-c}|`.
    pub fn residual(&self) -> S {
        (self.t_dual * (-self.t_dual).exp() - self.c * (-self.c).exp()).abs()
    }

    pub fn is_critical(&self) -> bool {
        self.c == S::one()
    }
}

fn check_c<S: Scalar>(c: S) -> Result<()> {
    if !(c > S::zero()) || !c.is_finite() {
        return Err(Error::invalid("c", format!("must be a positive finite real, got {c}")));
    }
    Ok(())
}

/// Solves `T e^{-T} = c e^{-c}` for `T` in `(0, 1]`.
///
/// For `c > 1` the root is bracketed in `(0, 1)` and bisected on
/// `ln x - x = ln c - c`, then polished with Newton steps on the same equation.
pub fn solve_duality<S: Scalar>(c: S) -> Result<DualityPair<S>> {
    check_c(c)?;
    if c <= S::one() {
        return Ok(DualityPair { c, t_dual: c, t: S::one() });
    }
    let target = c.ln() - c;
    let g = |x: S| x.ln() - x - target;
    // g(0+) = -inf, g(1) = -1 - target > 0 since x - ln x has its minimum at 1.
    let tiny = S::min_positive_value();
    let mut t = bisect(g, tiny, S::one(), 2000)?;
    for _ in 0..10 {
        let d = S::one() / t - S::one();
        if d == S::zero() {
            break;
        }
        let step = g(t) / d;
        let next = t - step;
        if !(next > S::zero() && next < S::one()) {
            break;
        }
        if (next - t).abs() <= S::epsilon() * t {
            t = next;
            break;
        }
        t = next;
    }
    Ok(DualityPair { c, t_dual: t, t: t / c })
}

/// The closed-form parametrization `c = -ln t/(1-t)`, `T = -t ln t/(1-t)` for `t` in `(0, 1)`.
pub fn parametrize<S: Scalar>(t: S) -> Result<DualityPair<S>> {
    if !(t > S::zero() && t < S::one()) {
        return Err(Error::invalid("t", format!("must lie in (0, 1), got {t}")));
    }
    let one_minus = S::one() - t;
    let c = -(-one_minus).ln_1p() / one_minus;
    Ok(DualityPair { c, t_dual: t * c, t })
}

/// `ln h(k) = (k-2) ln k + (k-1) ln c - k c - ln k!` for `k >= 1`.
pub fn log_borel_weight<S: Scalar>(c: S, k: usize, lf: &LogFactorials<S>) -> S {
    let kf = from_usize::<S>(k);
    let km2 = kf - lit(2.0);
    let power = if k == 2 { S::zero() } else { km2 * kf.ln() };
    power + (kf - S::one()) * c.ln() - kf * c - lf.ln_factorial(k)
}

/// `h(1..=K)` stored in the log domain.
#[derive(Debug, Clone)]
pub struct BorelWeights<S> {
    pub c: S,
    log_h: Vec<S>,
}

impl<S: Scalar> BorelWeights<S> {
    pub fn truncation(&self) -> usize {
        self.log_h.len()
    }

    /// `ln h(k)` for `1 <= k <= K`.
    pub fn log_h(&self, k: usize) -> S {
        self.log_h[k - 1]
    }

    pub fn h(&self, k: usize) -> S {
        self.log_h(k).exp()
    }

    pub fn log_values(&self) -> &[S] {
        &self.log_h
    }
}

pub fn borel_weights<S: Scalar>(c: S, truncation: usize) -> Result<BorelWeights<S>> {
    check_c(c)?;
    if truncation == 0 {
        return Err(Error::invalid("K", "truncation must be at least 1"));
    }
    let lf = LogFactorials::new(truncation);
    let log_h = (1..=truncation).map(|k| log_borel_weight(c, k, &lf)).collect();
    Ok(BorelWeights { c, log_h })
}

/// A truncated series together with a certified bound on the omitted tail.
#[derive(Debug, Clone, Copy)]
pub struct SeriesSum<S> {
    pub log_value: S,
    pub tail_bound: S,
}

impl<S: Scalar> SeriesSum<S> {
    pub fn value(&self) -> S {
        self.log_value.exp()
    }
}

/// Partial sums of `h`, `k h`, `k^2 h` with geometric tail bounds.
#[derive(Debug, Clone, Copy)]
pub struct BorelMoments<S> {
    pub mass: SeriesSum<S>,
    pub first: SeriesSum<S>,
    pub second: SeriesSum<S>,
}

/// `Σ_{k<=K} k^γ h(k)` with a ratio-test tail bound.
///
/// `h(k+1)/h(k) = (1+1/k)^{k-2} c e^{-c} < c e^{1-c}`, so for `k >= K` the
/// ratio of consecutive terms of `k^γ h(k)` is at most `q = (1+1/K)^γ c e^{1-c}`
/// and the tail is bounded by `term_K q/(1-q)`.
pub fn borel_power_sum<S: Scalar>(c: S, gamma: S, truncation: usize) -> Result<SeriesSum<S>> {
    check_c(c)?;
    if c == S::one() {
        return Err(Error::Unsupported(
            "Borel sums at c = 1 have a power-law tail and no geometric certificate".into(),
        ));
    }
    let w = borel_weights(c, truncation)?;
    let terms: Vec<S> = (1..=truncation)
        .map(|k| gamma * from_usize::<S>(k).ln() + w.log_h(k))
        .collect();
    let log_value = log_sum_exp(&terms);
    let kf = from_usize::<S>(truncation);
    let q = (S::one() + S::one() / kf).powf(gamma) * c * (S::one() - c).exp();
    let tail_bound = if q < S::one() {
        terms[truncation - 1].exp() * q / (S::one() - q)
    } else {
        S::infinity()
    };
    Ok(SeriesSum { log_value, tail_bound })
}

pub fn borel_moments<S: Scalar>(c: S, truncation: usize) -> Result<BorelMoments<S>> {
    Ok(BorelMoments {
        mass: borel_power_sum(c, S::zero(), truncation)?,
        first: borel_power_sum(c, S::one(), truncation)?,
        second: borel_power_sum(c, lit(2.0), truncation)?,
    })
}

/// Closed-form limits `((T/c)(1-T/2), T/c, (T/c)/(1-T))` of the three Borel sums.
pub fn borel_moment_limits<S: Scalar>(pair: &DualityPair<S>) -> (S, S, S) {
    let r = pair.ratio();
    let t = pair.t_dual;
    (r * (S::one() - t / lit(2.0)), r, r / (S::one() - t))
}

/// Linear-domain compensated sum `Σ_{k<=K} k^γ h(k)`; used where the log form is not needed.
pub fn borel_power_sum_linear<S: Scalar>(w: &BorelWeights<S>, gamma: S) -> S {
    (1..=w.truncation())
        .map(|k| (gamma * from_usize::<S>(k).ln() + w.log_h(k)).exp())
        .collect::<CompensatedSum<S>>()
        .value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use num_traits::{One, ToPrimitive};

    #[test]
    fn subcritical_and_critical_are_self_dual() {
        let p = solve_duality(1.0f64).unwrap();
        assert_eq!(p.t_dual, 1.0);
        let p = solve_duality(0.5f64).unwrap();
        assert_eq!(p.t_dual, 0.5);
        assert_eq!(p.t, 1.0);
    }

    #[test]
    fn supercritical_root_matches_bisection_oracle() {
        // independent oracle: plain bisection on x e^{-x} - 2 e^{-2} over (0, 1)
        let target = 2.0 * (-2.0f64).exp();
        let (mut lo, mut hi) = (1e-12f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (-mid).exp() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = solve_duality(2.0f64).unwrap();
        assert!((p.t_dual - 0.5 * (lo + hi)).abs() < 1e-14);
        assert!((p.t_dual - 0.406_375_739_959_959_9).abs() < 1e-15);
        assert!(p.residual() <= 1e-14);
    }

    #[test]
    fn residual_and_ordering_invariants_on_grid() {
        let grid = (1..=40).map(|i| 0.1 * i as f64);
        for c in grid {
            let p = solve_duality(c).unwrap();
            let scale = c * (-c).exp();
            assert!(p.residual() <= 1e-12 * scale, "c={c}");
            assert!(p.t_dual <= 1.0);
            if c > 1.0 {
                assert!(p.t_dual < 1.0);
            }
            if (c - 1.0).abs() > 1e-9 {
                // c + T > 2 away from criticality (only meaningful for c > 1; c <= 1 gives 2c)
                if c > 1.0 {
                    assert!(p.c + p.t_dual > 2.0);
                }
            }
        }
    }

    #[test]
    fn rejects_nonpositive_c() {
        assert!(solve_duality(0.0f64).is_err());
        assert!(solve_duality(-1.0f64).is_err());
        assert!(parametrize(1.0f64).is_err());
        assert!(parametrize(0.0f64).is_err());
    }

    #[test]
    fn parametrization_closed_forms() {
        let p = parametrize(0.5f64).unwrap();
        assert!((p.c - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((p.t_dual - 2f64.ln()).abs() < 1e-15);
        let p = parametrize(0.2f64).unwrap();
        assert!(p.t_dual < 1.0 && p.c > 1.0);
        assert!(p.residual() <= 1e-12 * p.c * (-p.c).exp());
        // t -> 1-: c + T -> 2
        let near = parametrize(1.0 - 1e-9f64).unwrap();
        assert!((near.c + near.t_dual - 2.0).abs() < 1e-8);
        assert!(near.c > 1.0 && near.t_dual < 1.0);
    }

    #[test]
    fn round_trip_through_parametrization() {
        for i in 11..=40 {
            let c = 0.1 * i as f64;
            let p = solve_duality(c).unwrap();
            let back = parametrize(p.t).unwrap();
            assert!((back.c - c).abs() < 1e-10 * c, "c={c}");
            assert!((back.t_dual - p.t_dual).abs() < 1e-10);
        }
        for &t in &[0.05f64, 0.2, 0.5, 0.9] {
            let p = parametrize(t).unwrap();
            let s = solve_duality(p.c).unwrap();
            assert!((s.t_dual - p.t_dual).abs() < 1e-12);
        }
    }

    #[test]
    fn borel_weight_small_cases() {
        let c = 0.7f64;
        let w = borel_weights(c, 5).unwrap();
        assert!((w.h(1) - (-c).exp()).abs() < 1e-16);
        assert!((w.h(2) - c * (-2.0 * c).exp() / 2.0).abs() < 1e-16);
        assert!(w.log_values().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn borel_weights_match_extended_precision_oracle() {
        // k^{k-2}/k! as an exact rational, converted once; c^{k-1} e^{-kc} in the log domain.
        for &c in &[0.3f64, 0.5, 2.0, 3.0] {
            let w = borel_weights(c, 50).unwrap();
            let mut fact = BigUint::one();
            for k in 1..=50u32 {
                fact *= BigUint::from(k);
                let num = if k >= 2 { BigUint::from(k).pow(k - 2) } else { BigUint::one() };
                // ln(num) - ln(fact) through f64 mantissa/exponent splitting
                let ln_big = |x: &BigUint| -> f64 {
                    let bits = x.bits();
                    if bits <= 1000 {
                        x.to_f64().unwrap().ln()
                    } else {
                        let shift = bits - 60;
                        (x >> shift).to_f64().unwrap().ln() + shift as f64 * 2f64.ln()
                    }
                };
                let ln_ratio = if k == 1 { 0.0 } else { ln_big(&num) - ln_big(&fact) };
                let expected = ln_ratio + (k as f64 - 1.0) * c.ln() - k as f64 * c;
                let got = w.log_h(k as usize);
                // relative error of h equals absolute error of ln h
                assert!((got - expected).abs() < 1e-13, "c={c} k={k}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn borel_identities_subcritical() {
        let m = borel_moments(0.5f64, DEFAULT_TRUNCATION).unwrap();
        assert!((m.mass.value() - 0.75).abs() < 1e-8);
        assert!((m.first.value() - 1.0).abs() < 1e-8);
        assert!((m.second.value() - 2.0).abs() < 1e-8);
        assert!(m.mass.tail_bound < 1e-100);
    }

    #[test]
    fn borel_identities_supercritical_against_long_sum() {
        let p = solve_duality(2.0f64).unwrap();
        let (l0, l1, l2) = borel_moment_limits(&p);
        let m = borel_moments(2.0f64, 100_000).unwrap();
        assert!((m.mass.value() - l0).abs() < 1e-8);
        assert!((m.first.value() - l1).abs() < 1e-8);
        assert!((m.second.value() - l2).abs() < 1e-8);
    }

    #[test]
    fn critical_moments_are_refused() {
        assert!(matches!(borel_moments(1.0f64, 100), Err(Error::Unsupported(_))));
    }

    #[test]
    fn first_moment_partial_sums_increase_to_limit() {
        let c = 2.0f64;
        let p = solve_duality(c).unwrap();
        let w = borel_weights(c, 2000).unwrap();
        let mut acc = 0.0;
        for k in 1..=2000 {
            let next = acc + k as f64 * w.h(k);
            assert!(next >= acc);
            acc = next;
            assert!(acc <= p.ratio() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn fractional_moments_converge_geometrically() {
        for &g in &[0.5f64, 1.0, 2.5] {
            for &c in &[0.5f64, 2.0] {
                let a = borel_power_sum(c, g, 200).unwrap();
                let b = borel_power_sum(c, g, 400).unwrap();
                let d = borel_power_sum(c, g, 800).unwrap();
                let d1 = (b.value() - a.value()).abs();
                let d2 = (d.value() - b.value()).abs();
                assert!(d2 <= d1 * 1e-3 || d2 < 1e-15, "gamma={g} c={c}");
                assert!(a.tail_bound.is_finite());
                assert!(b.value() - a.value() <= a.tail_bound * (1.0 + 1e-9) + 1e-15);
            }
        }
    }

    #[test]
    fn single_precision_instantiation() {
        let p = solve_duality(2.0f32).unwrap();
        assert!((p.t_dual - 0.406_375_74f32).abs() < 1e-5);
        let w = borel_weights(0.5f32, 10).unwrap();
        assert!((w.h(1) - (-0.5f32).exp()).abs() < 1e-6);
    }
}
