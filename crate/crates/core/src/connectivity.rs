//! Connection probabilities `μ_k(p)` of `G(k, p)` and their asymptotic estimates.
//!
//! The floating point table uses the vertex-removal decomposition: deleting
//! vertex `k` from a connected graph leaves components, each joined to `k` by
//! at least one edge. With `x = p/q` and `W_k = μ_k / (p^{k-1} q^{(k-1)(k-2)/2})`
//! this gives the exponential-formula recursion
//!
//! ```text
//! W_k = (k-1)! B_{k-1},   m B_m = Σ_{s=1}^{m} A_s B_{m-s},   A_s = W_s ((1+x)^s - 1) / (x (s-1)!)
//! ```
//!
//! in which every term is positive, so no precision is lost to cancellation
//! even when `μ_k` is far below machine epsilon. The classical complement
//! recursion `μ_k = 1 - Σ_j C(k-1, j-1) μ_j q^{j(k-j)}` is evaluated in exact
//! rational arithmetic as an independent check.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::logspace::{ln_expm1, log_sum_exp_iter};
use crate::scalar::{from_usize, lit, to_f64, CompensatedSum, LogFactorials, Scalar};

/// Largest table size for which the exact rational evaluation is attempted.
pub const RATIONAL_CAP: usize = 30;

#[derive(Debug, Clone)]
pub struct MuTable<S> {
    pub p: S,
    log_mu: Vec<S>,
    exact: Option<Vec<BigRational>>,
}

impl<S: Scalar> MuTable<S> {
    pub fn len(&self) -> usize {
        self.log_mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_mu.is_empty()
    }

    /// `ln μ_k` for `1 <= k <= K`.
    #[inline]
    pub fn log_mu(&self, k: usize) -> S {
        self.log_mu[k - 1]
    }

    pub fn mu(&self, k: usize) -> S {
        self.log_mu(k).exp()
    }

    pub fn log_values(&self) -> &[S] {
        &self.log_mu
    }

    /// Exact rationals for the binary value of `p`, present when requested and `K <= 30`.
    pub fn exact(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    /// Attaches the exact complement-recursion values (`K <= 30`).
    pub fn with_exact_rationals(mut self) -> Result<Self> {
        if self.len() > RATIONAL_CAP {
            return Err(Error::CapExceeded { what: "K (exact rationals)", value: self.len(), cap: RATIONAL_CAP });
        }
        let p = BigRational::from_float(to_f64(self.p))
            .ok_or_else(|| Error::Numerical("p not representable as a rational".into()))?;
        self.exact = Some(mu_complement_rational(&p, self.len()));
        Ok(self)
    }

    /// `|1 - Σ_{j<k} C(k-1, j-1) μ_j q^{j(k-j)} - μ_k|` evaluated from the table.
    pub fn complement_residual(&self, k: usize, lf: &LogFactorials<S>) -> S {
        let ln_q = (-self.p).ln_1p();
        let mut acc = CompensatedSum::new();
        for j in 1..=k {
            let e = from_usize::<S>(j * (k - j));
            acc.add((lf.ln_binomial(k - 1, j - 1) + self.log_mu(j) + e * ln_q).exp());
        }
        (S::one() - acc.value()).abs()
    }
}

fn check_p<S: Scalar>(p: S) -> Result<()> {
    if !(p > S::zero() && p < S::one()) {
        return Err(Error::invalid("p", format!("edge probability must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// `ln μ_1(p) .. ln μ_K(p)`.
pub fn mu_exact<S: Scalar>(p: S, max_k: usize) -> Result<MuTable<S>> {
    check_p(p)?;
    if max_k == 0 {
        return Err(Error::invalid("K", "table size must be at least 1"));
    }
    let lf = LogFactorials::<S>::new(max_k);
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ln_x = ln_p - ln_q;

    // ln B_m for m = 0..K-1, ln A_s for s = 1..K-1 (index s-1).
    let mut log_b: Vec<S> = Vec::with_capacity(max_k);
    let mut log_a: Vec<S> = Vec::with_capacity(max_k);
    let mut log_mu = Vec::with_capacity(max_k);
    log_b.push(S::zero());
    for k in 1..=max_k {
        // W_k = (k-1)! B_{k-1}
        let log_w = lf.ln_factorial(k - 1) + log_b[k - 1];
        let kf = from_usize::<S>(k);
        let exponent = (kf - S::one()) * (kf - lit(2.0)) / lit(2.0);
        let lm = (kf - S::one()) * ln_p + exponent * ln_q + log_w;
        log_mu.push(lm.min(S::zero()));
        if k == max_k {
            break;
        }
        log_a.push(log_w + ln_expm1(-kf * ln_q) - ln_x - lf.ln_factorial(k - 1));
        let m = k;
        let terms = (1..=m).map(|s| log_a[s - 1] + log_b[m - s]);
        log_b.push(log_sum_exp_iter(terms) - from_usize::<S>(m).ln());
    }
    Ok(MuTable { p, log_mu, exact: None })
}

/// Table for the sparse graph edge probability `p = c/n`.
pub fn mu_for_graph<S: Scalar>(c: S, n: usize, max_k: usize) -> Result<MuTable<S>> {
    let p = c / from_usize::<S>(n);
    mu_exact(p, max_k)
}

/// Complement recursion in exact rational arithmetic.
pub fn mu_complement_rational(p: &BigRational, max_k: usize) -> Vec<BigRational> {
    let q = BigRational::one() - p;
    let mut q_pow: HashMap<usize, BigRational> = HashMap::new();
    let mut pow = |e: usize| -> BigRational {
        q_pow
            .entry(e)
            .or_insert_with(|| num_traits::pow::pow(q.clone(), e))
            .clone()
    };
    let mut binom_row: Vec<BigInt> = vec![BigInt::one()];
    let mut mu: Vec<BigRational> = Vec::with_capacity(max_k);
    for k in 1..=max_k {
        // binom_row holds C(k-1, 0..=k-1)
        if k > 1 {
            let mut next = vec![BigInt::one(); k];
            for i in 1..k - 1 {
                next[i] = &binom_row[i - 1] + &binom_row[i];
            }
            binom_row = next;
        }
        let mut s = BigRational::zero();
        for j in 1..k {
            let coef = BigRational::from_integer(binom_row[j - 1].clone());
            s += coef * &mu[j - 1] * pow(j * (k - j));
        }
        mu.push(BigRational::one() - s);
    }
    mu
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Leading small-`k` estimate `ln(k^{k-2} (c/n)^{k-1})`.
pub fn mu_stepanov_small<S: Scalar>(k: usize, c: S, n: usize) -> S {
    let kf = from_usize::<S>(k);
    let power = if k == 2 { S::zero() } else { (kf - lit(2.0)) * kf.ln() };
    power + (kf - S::one()) * (c.ln() - from_usize::<S>(n).ln())
}

/// `1 - αc/(e^{αc} - 1)`, the prefactor of the linear-size estimate.
pub fn stepanov_prefactor<S: Scalar>(alpha: S, c: S) -> S {
    let x = alpha * c;
    if x == S::zero() {
        return S::zero();
    }
    S::one() - x / x.exp_m1()
}

/// Linear-size estimate `ln[(1 - αc/(e^{αc}-1)) (1 - e^{-αc})^{αn}]` for `k = ⌈αn⌉`.
pub fn mu_stepanov_linear<S: Scalar>(alpha: S, c: S, n: usize) -> Result<S> {
    if !(alpha > S::zero() && alpha < S::one()) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let x = alpha * c;
    let base = (-(-x).exp()).ln_1p();
    Ok(stepanov_prefactor(alpha, c).ln() + alpha * from_usize::<S>(n) * base)
}

/// Log-domain sandwich bounds for `ln μ_k(c/n)`:
/// `(k-1)(k-2)/2 ln(1-c/n) + ln(k^{k-2} c^{k-1}/n^{k-1}) <= ln μ_k <= ln(k^{k-2} c^{k-1}/n^{k-1})`.
pub fn sandwich_bounds<S: Scalar>(c: S, n: usize, k: usize) -> (S, S) {
    let high = mu_stepanov_small(k, c, n);
    let kf = from_usize::<S>(k);
    let ln_q = (-(c / from_usize::<S>(n))).ln_1p();
    let low = high + (kf - S::one()) * (kf - lit(2.0)) / lit(2.0) * ln_q;
    (low, high)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichViolation {
    pub k: usize,
    pub log_mu: f64,
    pub log_low: f64,
    pub log_high: f64,
}

#[derive(Debug, Clone)]
pub struct SandwichReport {
    pub checked: usize,
    pub first_violation: Option<SandwichViolation>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks the sandwich bounds for every `k <= K` against [`mu_exact`] at `p = c/n`.
pub fn mu_sandwich_check<S: Scalar>(c: S, n: usize, max_k: usize) -> Result<SandwichReport> {
    if max_k > n {
        return Err(Error::invalid("K", format!("K = {max_k} exceeds n = {n}")));
    }
    let table = mu_for_graph(c, n, max_k)?;
    let tol = lit::<S>(1e-11);
    let mut first_violation = None;
    for k in 1..=max_k {
        let (lo, hi) = sandwich_bounds(c, n, k);
        let lm = table.log_mu(k);
        let slack = tol * (S::one() + lm.abs());
        if lm < lo - slack || lm > hi + slack {
            first_violation = Some(SandwichViolation {
                k,
                log_mu: to_f64(lm),
                log_low: to_f64(lo),
                log_high: to_f64(hi),
            });
            break;
        }
    }
    Ok(SandwichReport { checked: max_k, first_violation })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over all labeled graphs on `k <= 5` vertices.
    fn brute_connected(k: usize, p: f64) -> f64 {
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        let m = pairs.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << m) {
            let mut parent: Vec<usize> = (0..k).collect();
            fn find(p: &mut Vec<usize>, x: usize) -> usize {
                if p[x] != x {
                    let r = find(p, p[x]);
                    p[x] = r;
                }
                p[x]
            }
            let mut edges = 0usize;
            for (e, &(a, b)) in pairs.iter().enumerate() {
                if mask >> e & 1 == 1 {
                    edges += 1;
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra] = rb;
                }
            }
            let root = find(&mut parent, 0);
            if (0..k).all(|v| find(&mut parent, v) == root) {
                total += p.powi(edges as i32) * (1.0 - p).powi((m - edges) as i32);
            }
        }
        total
    }

    #[test]
    fn closed_forms_for_small_k() {
        for &p in &[0.01f64, 0.2, 0.5, 0.9] {
            let t = mu_exact(p, 3).unwrap();
            assert_eq!(t.mu(1), 1.0);
            assert!((t.mu(2) - p).abs() < 1e-15);
            let mu3 = 3.0 * p * p - 2.0 * p * p * p;
            assert!((t.mu(3) - mu3).abs() < 1e-14 * mu3);
        }
    }

    #[test]
    fn matches_brute_force_enumeration() {
        for &p in &[0.1f64, 1.0 / 3.0, 0.7] {
            let t = mu_exact(p, 5).unwrap();
            for k in 1..=5 {
                let b = brute_connected(k, p);
                assert!((t.mu(k) - b).abs() < 1e-13 * b, "k={k} p={p}");
            }
        }
    }

    #[test]
    fn rational_and_log_domain_agree() {
        for &p in &[0.02f64, 0.1, 0.5, 0.95] {
            let t = mu_exact(p, 30).unwrap().with_exact_rationals().unwrap();
            let exact = t.exact().unwrap();
            for k in 1..=30 {
                let e = rational_to_f64(&exact[k - 1]);
                assert!(
                    (t.log_mu(k) - e.ln()).abs() < 1e-12,
                    "p={p} k={k}: {} vs {}",
                    t.log_mu(k),
                    e.ln()
                );
            }
        }
    }

    #[test]
    fn rational_cap_enforced() {
        let t = mu_exact(0.1f64, 31).unwrap();
        assert!(matches!(t.with_exact_rationals(), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn complement_residual_is_tiny() {
        let lf = LogFactorials::new(200);
        for &(c, n) in &[(2.0f64, 100usize), (0.5, 200), (3.0, 50)] {
            let t = mu_for_graph(c, n, n.min(200)).unwrap();
            for k in 1..=t.len() {
                let r = t.complement_residual(k, &lf);
                assert!(r <= 1e-12, "c={c} n={n} k={k} r={r}");
                assert!(t.log_mu(k) <= 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(mu_exact(0.0f64, 3).is_err());
        assert!(mu_exact(1.0f64, 3).is_err());
        assert!(mu_exact(0.5f64, 0).is_err());
    }

    #[test]
    fn stepanov_small_values() {
        assert_eq!(mu_stepanov_small(1, 2.0f64, 100), 0.0);
        assert!((mu_stepanov_small(2, 1.0f64, 100).exp() - 0.01).abs() < 1e-17);
        let t = mu_for_graph(2.0f64, 10_000, 5).unwrap();
        let ratio = (t.log_mu(5) - mu_stepanov_small(5, 2.0, 10_000)).exp();
        assert!(ratio > 0.99 && ratio < 1.01, "ratio {ratio}");
    }

    #[test]
    fn stepanov_linear_prefactor() {
        assert!(stepanov_prefactor(1e-9f64, 2.0) < 1e-8);
        let expected = 1.0 - 2.0 / (2f64.exp() - 1.0);
        assert!((stepanov_prefactor(1.0f64, 2.0) - expected).abs() < 1e-15);
        assert!((expected - 0.686_964_714_500_668_7).abs() < 1e-15);
        assert!(mu_stepanov_linear(1.0f64, 2.0, 10).is_err());
    }

    #[test]
    fn stepanov_linear_error_is_sublinear() {
        let (alpha, c) = (0.5f64, 2.0f64);
        let mut prev = f64::INFINITY;
        for &n in &[50usize, 100, 200] {
            let k = (alpha * n as f64).ceil() as usize;
            let t = mu_for_graph(c, n, k).unwrap();
            let est = mu_stepanov_linear(alpha, c, n).unwrap();
            let per_n = (t.log_mu(k) - est).abs() / n as f64;
            assert!(per_n < prev, "n={n}: {per_n} !< {prev}");
            prev = per_n;
        }
    }

    #[test]
    fn sandwich_bounds_hold() {
        let r = mu_sandwich_check(2.0f64, 100, 40).unwrap();
        assert!(r.holds(), "{:?}", r.first_violation);
        for &(c, n) in &[(0.5f64, 50usize), (3.0, 30), (2.0, 1000)] {
            let r = mu_sandwich_check(c, n, n.min(300)).unwrap();
            assert!(r.holds(), "c={c} n={n}: {:?}", r.first_violation);
        }
        let (lo, hi) = sandwich_bounds(2.0f64, 100, 2);
        assert_eq!(lo, hi);
        assert!(mu_sandwich_check(2.0f64, 10, 11).is_err());
    }

    #[test]
    fn deep_tail_stays_finite_without_cancellation() {
        // μ_n(c/n) ~ (1-e^{-c})^n is ~e^{-290} here; the complement recursion cannot reach it in f64.
        let t = mu_for_graph(2.0f64, 2000, 2000).unwrap();
        let lm = t.log_mu(2000);
        let est = mu_stepanov_linear(0.999_999f64, 2.0, 2000).unwrap();
        assert!(lm.is_finite() && lm < -200.0);
        assert!((lm - est).abs() / 2000.0 < 0.01);
    }
}
