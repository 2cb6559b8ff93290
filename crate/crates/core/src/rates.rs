//! Rate functions: the moderate deviation quadratics, the largest-component
//! large deviation rate and the empirical-measure functionals.

use std::fmt;
use std::str::FromStr;

use crate::duality::{log_borel_weight, solve_duality, DualityPair};
use crate::error::{Error, Result};
use crate::optimize::{bisect, minimize_convex};
use crate::scalar::{from_usize, lit, CompensatedSum, LogFactorials, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateName {
    IMax,
    IotaK,
    JTotal,
    GrandSum,
    GrandFixed,
    GrandExclK,
    RandomSum,
    FixedCount,
}

impl RateName {
    pub const ALL: [RateName; 8] = [
        RateName::IMax,
        RateName::IotaK,
        RateName::JTotal,
        RateName::GrandSum,
        RateName::GrandFixed,
        RateName::GrandExclK,
        RateName::RandomSum,
        RateName::FixedCount,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RateName::IMax => "I_max",
            RateName::IotaK => "iota_k",
            RateName::JTotal => "j_total",
            RateName::GrandSum => "grand_sum",
            RateName::GrandFixed => "grand_fixed",
            RateName::GrandExclK => "grand_excl_k",
            RateName::RandomSum => "mdplemma_a",
            RateName::FixedCount => "mdplemma_b",
        }
    }
}

impl fmt::Display for RateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RateName::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::invalid("rate", format!("unknown rate {s:?}")))
    }
}

/// `x ↦ κ x²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRate<S> {
    pub name: RateName,
    pub kappa: S,
    pub c: S,
    pub t: S,
    pub k: Option<usize>,
    /// For `I_max`: the coefficient in the form where the rate reads `x²/2 · (T/c)(1-T/c)/(1-T)²`.
    pub reciprocal_form: Option<S>,
}

impl<S: Scalar> QuadraticRate<S> {
    pub fn value(&self, x: S) -> S {
        self.kappa * x * x / lit(2.0)
    }

    /// Implied asymptotic variance `1/κ`.
    pub fn variance(&self) -> S {
        S::one() / self.kappa
    }
}

fn quad<S: Scalar>(name: RateName, kappa: S, pair: &DualityPair<S>, k: Option<usize>) -> QuadraticRate<S> {
    QuadraticRate { name, kappa, c: pair.c, t: pair.t_dual, k, reciprocal_form: None }
}

fn noncritical<S: Scalar>(c: S) -> Result<DualityPair<S>> {
    if c == S::one() {
        return Err(Error::invalid("c", "the rates degenerate at c = 1"));
    }
    solve_duality(c)
}

fn borel_h<S: Scalar>(c: S, k: usize) -> S {
    log_borel_weight(c, k, &LogFactorials::new(k)).exp()
}

/// `(1-T)²/[(T/c)(1-T/c)]`.
pub fn imax_rate<S: Scalar>(c: S) -> Result<QuadraticRate<S>> {
    let pair = noncritical(c)?;
    let (r, t) = (pair.ratio(), pair.t_dual);
    let kappa = (S::one() - t) * (S::one() - t) / (r * (S::one() - r));
    let mut q = quad(RateName::IMax, kappa, &pair, None);
    q.reciprocal_form = Some(S::one() / kappa);
    Ok(q)
}

/// `1/(h(k) + (c-1)k²h(k)²)`.
pub fn iota_rate<S: Scalar>(c: S, k: usize) -> Result<QuadraticRate<S>> {
    let pair = noncritical(c)?;
    if k == 0 {
        return Err(Error::invalid("k", "size must be at least 1"));
    }
    let h = borel_h(c, k);
    let kf = from_usize::<S>(k);
    Ok(quad(RateName::IotaK, S::one() / (h + (c - S::one()) * kf * kf * h * h), &pair, Some(k)))
}

/// `1/[(T/c)(1 + T/2 - T/c)]`.
pub fn jay_rate<S: Scalar>(c: S) -> Result<QuadraticRate<S>> {
    let pair = noncritical(c)?;
    let (r, t) = (pair.ratio(), pair.t_dual);
    Ok(quad(RateName::JTotal, S::one() / (r * (S::one() + t / lit(2.0) - r)), &pair, None))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrandRates<S> {
    pub sum: QuadraticRate<S>,
    pub fixed: QuadraticRate<S>,
    pub excl_k: Option<QuadraticRate<S>>,
}

/// Rates of the unconditioned ensemble: `(1-T)/(T/c)`, `(1-T)(2-T)c/T²` and `1/((T/c)/(1-T) - k²h(k))`.
pub fn grand_rates<S: Scalar>(c: S, theta: S, k: Option<usize>) -> Result<GrandRates<S>> {
    if !(theta > S::zero() && theta <= S::one()) {
        return Err(Error::invalid("theta", format!("must lie in (0, 1], got {theta}")));
    }
    let pair = noncritical(c)?;
    let (r, t) = (pair.ratio(), pair.t_dual);
    let one = S::one();
    let sum = quad(RateName::GrandSum, (one - t) / r, &pair, None);
    let fixed = quad(RateName::GrandFixed, (one - t) * (lit::<S>(2.0) - t) * c / (t * t), &pair, None);
    let excl_k = match k {
        None => None,
        Some(0) => return Err(Error::invalid("k", "size must be at least 1")),
        Some(k) => {
            let kf = from_usize::<S>(k);
            let denom = r / (one - t) - kf * kf * borel_h(c, k);
            if !(denom > S::zero()) {
                return Err(Error::invalid("k", format!("k²h(k) >= (T/c)/(1-T) at k = {k}")));
            }
            Some(quad(RateName::GrandExclK, one / denom, &pair, Some(k)))
        }
    };
    Ok(GrandRates { sum, fixed, excl_k })
}

/// Compound sum with Poisson(`λn`) terms of mean `μ` and variance `σ²`: `κ = 1/(λ(σ² + μ²))`.
pub fn random_sum_kappa<S: Scalar>(lambda: S, mu: S, sigma2: S) -> Result<S> {
    if !(lambda > S::zero()) || sigma2 < S::zero() {
        return Err(Error::invalid("lambda", "needs lambda > 0 and sigma2 >= 0"));
    }
    Ok(S::one() / (lambda * (sigma2 + mu * mu)))
}

/// Sum of `⌊λn⌋` such terms: `κ = 1/(λσ²)`.
pub fn fixed_count_kappa<S: Scalar>(lambda: S, sigma2: S) -> Result<S> {
    if !(lambda > S::zero()) || !(sigma2 > S::zero()) {
        return Err(Error::invalid("sigma2", "needs lambda > 0 and sigma2 > 0"));
    }
    Ok(S::one() / (lambda * sigma2))
}

/// Any named rate; `k` is required for `iota_k` and `grand_excl_k`.
/// The random-sum and fixed-count rates are evaluated with the limiting jump law (`λ = (T/c)(1-T/2)`).
pub fn mdp_rate<S: Scalar>(name: RateName, c: S, k: Option<usize>) -> Result<QuadraticRate<S>> {
    let need_k = || k.ok_or_else(|| Error::invalid("k", format!("{name} needs k")));
    match name {
        RateName::IMax => imax_rate(c),
        RateName::IotaK => iota_rate(c, need_k()?),
        RateName::JTotal => jay_rate(c),
        RateName::GrandSum => Ok(grand_rates(c, S::one(), None)?.sum),
        RateName::GrandFixed => Ok(grand_rates(c, S::one(), None)?.fixed),
        RateName::GrandExclK => Ok(grand_rates(c, S::one(), Some(need_k()?))?.excl_k.unwrap()),
        RateName::RandomSum | RateName::FixedCount => {
            let pair = noncritical(c)?;
            let (r, t) = (pair.ratio(), pair.t_dual);
            let one = S::one();
            let half = one - t / lit(2.0);
            let lambda = r * half;
            let mean = one / half;
            let var = (t / lit(2.0)) / (half * half * (one - t));
            let kappa = if name == RateName::RandomSum {
                random_sum_kappa(lambda, mean, var)?
            } else {
                fixed_count_kappa(lambda, var)?
            };
            Ok(quad(name, kappa, &pair, None))
        }
    }
}

/// `a = (1-T)(1-c)/(1-T/c)`, the curvature contributed by the largest jump.
pub fn giant_curvature<S: Scalar>(pair: &DualityPair<S>) -> S {
    (S::one() - pair.t_dual) * (S::one() - pair.c) / (S::one() - pair.ratio())
}

/// `1/h(k) + min_y [a y² + b (k - y)²]` with `b = (1-T)/(T/c - (1-T)k²h(k))`, minimized numerically (`c > 1`).
pub fn iota_infimum<S: Scalar>(c: S, k: usize) -> Result<S> {
    let pair = supercritical(c)?;
    let h = borel_h(c, k);
    let kf = from_usize::<S>(k);
    let a = giant_curvature(&pair);
    let t = pair.t_dual;
    let b = (S::one() - t) / (pair.ratio() - (S::one() - t) * kf * kf * h);
    let (_, m) = minimize_convex(|y: S| a * y * y + b * (kf - y) * (kf - y), S::zero(), S::one(), lit(1e-12));
    Ok(S::one() / h + m)
}

/// `1/((T/c)(1-T/2)) + min_y [a y² + b (1 + (1-T/2) y)²]` with `b = (1-T)/((1-T/2)(T/2)(T/c))` (`c > 1`).
pub fn jay_infimum<S: Scalar>(c: S) -> Result<S> {
    let pair = supercritical(c)?;
    let (r, t) = (pair.ratio(), pair.t_dual);
    let one = S::one();
    let half = one - t / lit(2.0);
    let a = giant_curvature(&pair);
    let b = (one - t) / (half * (t / lit(2.0)) * r);
    let (_, m) = minimize_convex(|y: S| a * y * y + b * (one + half * y) * (one + half * y), S::zero(), one, lit(1e-12));
    Ok(one / (r * half) + m)
}

/// `a + (1-T)/(T/c)`, which equals the `I_max` constant.
pub fn imax_combination<S: Scalar>(c: S) -> Result<S> {
    let pair = supercritical(c)?;
    Ok(giant_curvature(&pair) + (S::one() - pair.t_dual) / pair.ratio())
}

fn supercritical<S: Scalar>(c: S) -> Result<DualityPair<S>> {
    if !(c > S::one()) {
        return Err(Error::invalid("c", format!("needs c > 1, got {c}")));
    }
    solve_duality(c)
}

/// `A(y, r) = y ln(1-e^{-yr}) - yr(1-y) - y ln y - (1-y) ln(1-y)`, with `0 ln 0 = 0`.
pub fn a_fn<S: Scalar>(y: S, r: S) -> S {
    let one = S::one();
    let xlogx = |v: S| if v == S::zero() { S::zero() } else { v * v.ln() };
    y * (-(-y * r).exp()).ln_1p() - y * r * (one - y) - xlogx(y) - xlogx(one - y)
}

const THRESHOLD_GRID: usize = 10_000;

/// `x - (1-kx)(1-e^{-cx})`, whose positive zero is `x_k`.
fn threshold_gap<S: Scalar>(c: S, k: usize, x: S) -> S {
    x - (S::one() - from_usize::<S>(k) * x) * (-(-c * x).exp_m1())
}

/// Largest root of `x/(1-kx) = 1 - e^{-cx}` in `(0, 1/k)`, if any.
pub fn ldp_threshold<S: Scalar>(c: S, k: usize) -> Result<Option<S>> {
    if k == 0 {
        return Ok(Some(S::one()));
    }
    let top = S::one() / from_usize::<S>(k);
    let grid = from_usize::<S>(THRESHOLD_GRID);
    let at = |i: usize| top * from_usize::<S>(i) / grid;
    let mut hi_val = threshold_gap(c, k, at(THRESHOLD_GRID));
    for i in (1..THRESHOLD_GRID).rev() {
        let v = threshold_gap(c, k, at(i));
        if (v <= S::zero()) != (hi_val <= S::zero()) {
            let root = bisect(|x| threshold_gap(c, k, x), at(i), at(i + 1), 200)?;
            return Ok(Some(root));
        }
        hi_val = v;
    }
    Ok(None)
}

/// `x_0 = 1, x_1, ..., x_k` up to `k_max`, stopping at the first `k` without a positive root.
pub fn ldp_thresholds<S: Scalar>(c: S, k_max: usize) -> Result<Vec<S>> {
    if !(c > S::zero()) {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    let mut xs = vec![S::one()];
    for k in 1..=k_max {
        match ldp_threshold(c, k)? {
            Some(x) => xs.push(x),
            None => break,
        }
    }
    Ok(xs)
}

/// `-Σ_{j<k} (1-jx) A(x/(1-jx), c(1-jx))`, the rate on the bracket `(x_k, x_{k-1}]`.
pub fn ldp_rate_on_bracket<S: Scalar>(c: S, x: S, k: usize) -> S {
    let mut acc = CompensatedSum::new();
    for j in 0..k {
        let s = S::one() - from_usize::<S>(j) * x;
        acc.add(s * a_fn(x / s, c * s));
    }
    -acc.value()
}

/// The largest-component rate `I_c` with its thresholds.
#[derive(Debug, Clone)]
pub struct LdpRate<S> {
    pub c: S,
    pub thresholds: Vec<S>,
    /// True when the list ended because no further positive root exists.
    pub complete: bool,
}

impl<S: Scalar> LdpRate<S> {
    pub fn new(c: S, k_max: usize) -> Result<Self> {
        let thresholds = ldp_thresholds(c, k_max)?;
        let complete = thresholds.len() <= k_max;
        Ok(LdpRate { c, thresholds, complete })
    }

    /// Bracket index `k` with `x_k < x <= x_{k-1}`.
    pub fn bracket(&self, x: S) -> Result<usize> {
        if !(x > S::zero() && x <= S::one()) {
            return Err(Error::invalid("x", format!("must lie in (0, 1], got {x}")));
        }
        for k in 1..self.thresholds.len() {
            if x > self.thresholds[k] {
                return Ok(k);
            }
        }
        if self.complete {
            return Ok(self.thresholds.len());
        }
        Err(Error::invalid(
            "x",
            format!("x = {x} is below the last computed threshold; extend k_max"),
        ))
    }

    pub fn eval(&self, x: S) -> Result<S> {
        Ok(ldp_rate_on_bracket(self.c, x, self.bracket(x)?))
    }
}

/// `I_c(x)`, computing thresholds as far as needed.
pub fn ldp_rate<S: Scalar>(c: S, x: S) -> Result<S> {
    if !(x > S::zero() && x <= S::one()) {
        return Err(Error::invalid("x", format!("must lie in (0, 1], got {x}")));
    }
    let k_max = (S::one() / x).ceil().to_usize().unwrap_or(usize::MAX).saturating_add(1);
    if k_max > 100_000 {
        return Err(Error::CapExceeded { what: "threshold count", value: k_max, cap: 100_000 });
    }
    LdpRate::new(c, k_max)?.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRates<S> {
    pub h: S,
    pub i_mi: S,
    /// `Λ = Σ k σ_k`.
    pub lambda: S,
}

/// `H(σ) = Σ (σ_k ln(σ_k/h(k)) - σ_k + h(k))` and the canonical rate
/// `I_Mi(σ) = Σ σ_k (ln(σ_k/h(k)) - 1) + Λ(1 - c/2) - (1-Λ)(ln((1-e^{-c(1-Λ)})/(1-Λ)) - Λc/2)`
/// for `σ` supported on `1..=sigma.len()`; the `h` tail enters through `Σ h = (T/c)(1-T/2)`.
pub fn empirical_rates<S: Scalar>(sigma: &[S], c: S) -> Result<EmpiricalRates<S>> {
    let pair = solve_duality(c)?;
    let lf = LogFactorials::<S>::new(sigma.len().max(1));
    let mut lambda = CompensatedSum::new();
    let mut core = CompensatedSum::new();
    for (i, &s) in sigma.iter().enumerate() {
        let k = i + 1;
        if !(s >= S::zero()) {
            return Err(Error::invalid("sigma", format!("sigma_{k} = {s} is negative")));
        }
        lambda.add(from_usize::<S>(k) * s);
        if s > S::zero() {
            core.add(s * (s.ln() - log_borel_weight(c, k, &lf) - S::one()));
        }
    }
    let lambda = lambda.value();
    let one = S::one();
    if lambda > one + lit(1e-12) {
        return Err(Error::invalid("sigma", format!("Σ k σ_k = {lambda} exceeds 1")));
    }
    let core = core.value();
    let h_total = pair.ratio() * (one - pair.t_dual / lit(2.0));
    let rest = one - lambda;
    let tail = if rest <= S::zero() {
        S::zero()
    } else {
        rest * ((-(-c * rest).exp_m1() / rest).ln() - lambda * c / lit(2.0))
    };
    let i_mi = core + lambda * (one - c / lit(2.0)) - tail;
    Ok(EmpiricalRates { h: core + h_total, i_mi, lambda })
}
