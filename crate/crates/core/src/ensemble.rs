//! The truncated jump law `X^{n,θ}`, its normalizer and the choice of `θ`.

use crate::connectivity::{mu_for_graph, MuTable};
use crate::duality::{solve_duality, DualityPair};
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp_iter;
use crate::optimize::bisect;
use crate::scalar::{from_usize, lit, CompensatedSum, LogFactorials, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaChoice<S> {
    pub theta: S,
    pub eps0: S,
    pub gamma_at_theta: S,
    pub eta: S,
}

/// `γ(θ) = (e^{cθ/2} - e^{-cθ/2})/(θc) · c e^{1-c}`.
pub fn gamma_fn<S: Scalar>(theta: S, c: S) -> S {
    let x = c * theta / lit(2.0);
    let shape = if x == S::zero() { S::one() } else { x.sinh() / x };
    shape * c * (S::one() - c).exp()
}

/// `c e^{1 - c + x c/2}`.
fn eps_bound<S: Scalar>(c: S, x: S) -> S {
    c * (S::one() - c + x * c / lit(2.0)).exp()
}

pub fn choose_theta<S: Scalar>(c: S) -> Result<ThetaChoice<S>> {
    if !(c > S::zero()) || !c.is_finite() {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    if c == S::one() {
        return Err(Error::invalid("c", "no admissible theta at the critical point c = 1"));
    }
    let pair = solve_duality(c)?;
    let theta0 = if c > S::one() { S::one() - pair.ratio() } else { S::zero() };
    let one = S::one();

    let theta = if c * (one - c / lit(2.0)).exp() < one || gamma_fn(one, c) < one {
        one
    } else {
        // γ is increasing in θ and γ(θ0) < 1 for c > 1.
        let lo = theta0.max(S::epsilon());
        if gamma_fn(lo, c) >= one {
            return Err(Error::Numerical(format!("gamma(theta0) >= 1 at c = {c}")));
        }
        let root = bisect(|th| gamma_fn(th, c) - one, lo, one, 200)?;
        (theta0 + root) / lit(2.0)
    };
    let gamma_at_theta = gamma_fn(theta, c);
    let margin = lit::<S>(1e-9);
    if gamma_at_theta >= one - margin || (c > one && theta - theta0 <= margin) {
        return Err(Error::Numerical(format!("theta selection lost its margin at c = {c}")));
    }

    let x_star = lit::<S>(2.0) * (c - one - c.ln()) / c;
    let eps0 = (x_star / lit(2.0)).min(theta);
    let a = eps_bound(c, eps0);
    let mut eta = lit::<S>(0.1);
    let mut halvings = 0;
    while !(eta.exp() * a < one && eta.exp() * gamma_at_theta < one) {
        if halvings == 20 {
            return Err(Error::Numerical(format!("no valid eta after 20 halvings at c = {c}")));
        }
        eta = eta / lit(2.0);
        halvings += 1;
    }
    Ok(ThetaChoice { theta, eps0, gamma_at_theta, eta })
}

#[derive(Debug, Clone)]
pub struct JumpLaw<S> {
    pub n: usize,
    pub c: S,
    pub theta: S,
    pub log_z: S,
    logp: Vec<S>,
}

impl<S: Scalar> JumpLaw<S> {
    /// Largest value in the support, `⌊θn⌋`.
    pub fn max_jump(&self) -> usize {
        self.logp.len()
    }

    #[inline]
    pub fn logp(&self, k: usize) -> S {
        if k == 0 || k > self.logp.len() {
            S::neg_infinity()
        } else {
            self.logp[k - 1]
        }
    }

    pub fn p(&self, k: usize) -> S {
        self.logp(k).exp()
    }

    /// Unnormalized log weight, `logp(k) + log Z`.
    pub fn log_weight(&self, k: usize) -> S {
        self.logp(k) + self.log_z
    }

    /// Log-probabilities for `k = 1..=max_jump`.
    pub fn log_probs(&self) -> &[S] {
        &self.logp
    }

    pub fn total_mass(&self) -> S {
        self.logp.iter().map(|&l| l.exp()).collect::<CompensatedSum<S>>().value()
    }
}

pub(crate) fn check_graph_params<S: Scalar>(n: usize, c: S) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(c > S::zero()) || !c.is_finite() {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    if c >= from_usize(n) {
        return Err(Error::invalid("c", format!("c = {c} needs c < n = {n} so that c/n is a probability")));
    }
    Ok(())
}

/// Support size `⌊θn⌋`.
pub fn truncation_index<S: Scalar>(n: usize, theta: S) -> Result<usize> {
    if !(theta > S::zero() && theta <= S::one()) {
        return Err(Error::invalid("theta", format!("must lie in (0, 1], got {theta}")));
    }
    let k = (theta * from_usize::<S>(n)).floor().to_usize().unwrap_or(0).min(n);
    if k == 0 {
        return Err(Error::invalid("theta", format!("floor(theta n) = 0 for theta = {theta}, n = {n}")));
    }
    Ok(k)
}

/// `(k-1) ln n + ln μ_k(c/n) + (kn - k²/2) ln(1 - c/n) - ln k!`.
pub fn log_jump_weights<S: Scalar>(n: usize, c: S, mu: &MuTable<S>, lf: &LogFactorials<S>) -> Vec<S> {
    let nf = from_usize::<S>(n);
    let ln_n = nf.ln();
    let ln_q = (-(c / nf)).ln_1p();
    (1..=mu.len())
        .map(|k| {
            let kf = from_usize::<S>(k);
            (kf - S::one()) * ln_n + mu.log_mu(k) + (kf * nf - kf * kf / lit(2.0)) * ln_q - lf.ln_factorial(k)
        })
        .collect()
}

pub fn jump_law<S: Scalar>(n: usize, c: S, theta: S) -> Result<JumpLaw<S>> {
    check_graph_params(n, c)?;
    let max_k = truncation_index(n, theta)?;
    let mu = mu_for_graph(c, n, max_k)?;
    let lf = LogFactorials::new(max_k);
    Ok(jump_law_from_weights(n, c, theta, log_jump_weights(n, c, &mu, &lf)))
}

pub(crate) fn jump_law_from_weights<S: Scalar>(n: usize, c: S, theta: S, mut logw: Vec<S>) -> JumpLaw<S> {
    let log_z = log_sum_exp_iter(logw.iter().copied());
    for l in logw.iter_mut() {
        *l = *l - log_z;
    }
    JumpLaw { n, c, theta, log_z, logp: logw }
}

/// Restriction of a law to `{1..m}`, renormalized.
pub fn restrict<S: Scalar>(law: &JumpLaw<S>, m: usize) -> Result<JumpLaw<S>> {
    if m == 0 || m > law.max_jump() {
        return Err(Error::invalid("m", format!("must lie in 1..={}, got {m}", law.max_jump())));
    }
    let w: Vec<S> = (1..=m).map(|k| law.log_weight(k)).collect();
    let theta = from_usize::<S>(m) / from_usize::<S>(law.n);
    Ok(jump_law_from_weights(law.n, law.c, theta, w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMoments<S> {
    pub z: S,
    pub mean: S,
    pub second: S,
    pub variance: S,
}

pub fn ensemble_moments<S: Scalar>(law: &JumpLaw<S>) -> EnsembleMoments<S> {
    let mut mean = CompensatedSum::new();
    let mut second = CompensatedSum::new();
    for k in 1..=law.max_jump() {
        let p = law.p(k);
        let kf = from_usize::<S>(k);
        mean.add(kf * p);
        second.add(kf * kf * p);
    }
    let mean = mean.value();
    let variance = (1..=law.max_jump())
        .map(|k| {
            let d = from_usize::<S>(k) - mean;
            d * d * law.p(k)
        })
        .collect::<CompensatedSum<S>>()
        .value();
    EnsembleMoments { z: law.log_z.exp(), mean, second: second.value(), variance }
}

/// Large-`n` limits: `Z → (T/c)(1-T/2)`, mean `→ 1/(1-T/2)`, second moment
/// `→ 1/((1-T/2)(1-T))`, variance `→ (T/2)/((1-T/2)²(1-T))`.
pub fn ensemble_moment_limits<S: Scalar>(pair: &DualityPair<S>) -> EnsembleMoments<S> {
    let t = pair.t_dual;
    let one = S::one();
    let half = one - t / lit(2.0);
    EnsembleMoments {
        z: pair.ratio() * half,
        mean: one / half,
        second: one / (half * (one - t)),
        variance: (t / lit(2.0)) / (half * half * (one - t)),
    }
}

/// `log E exp(η X)`.
pub fn mgf_bound_check<S: Scalar>(law: &JumpLaw<S>, eta: S) -> S {
    log_sum_exp_iter((1..=law.max_jump()).map(|k| law.logp(k) + eta * from_usize::<S>(k)))
}

/// `ln g_n(k)` using a precomputed `μ(c/n)` table: `g_n(0) = 0`, `g_n(1) = (1-c/n)^{-n+1/2}`,
/// `g_n(k) = (k/n) μ_{k-1}/μ_k (1-c/n)^{-n+k-1/2}`.
pub fn zero_range_log_rate<S: Scalar>(mu: &MuTable<S>, n: usize, c: S, k: usize) -> Result<S> {
    if k > mu.len() {
        return Err(Error::invalid("k", format!("k = {k} exceeds the table size {}", mu.len())));
    }
    let nf = from_usize::<S>(n);
    let ln_q = (-(c / nf)).ln_1p();
    let kf = from_usize::<S>(k);
    Ok(match k {
        0 => S::neg_infinity(),
        1 => (lit::<S>(0.5) - nf) * ln_q,
        _ => (kf / nf).ln() + mu.log_mu(k - 1) - mu.log_mu(k) + (kf - lit(0.5) - nf) * ln_q,
    })
}

pub fn zero_range_rate<S: Scalar>(n: usize, c: S, k: usize) -> Result<S> {
    check_graph_params(n, c)?;
    if k > n {
        return Err(Error::invalid("k", format!("k = {k} exceeds n = {n}")));
    }
    if k == 0 {
        return Ok(S::neg_infinity());
    }
    let mu = mu_for_graph(c, n, k)?;
    zero_range_log_rate(&mu, n, c, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_limits_and_values() {
        assert!((gamma_fn(0.0f64, 2.0) - 2.0 * (-1f64).exp()).abs() < 1e-16);
        assert!((gamma_fn(1e-8f64, 3.0) - 3.0 * (-2f64).exp()).abs() < 1e-14);
        // extended-precision oracle
        assert!((gamma_fn(1.0f64, 3.0) - 0.576_333_276_290_314_9).abs() < 1e-15);
        let pair = solve_duality(2.0f64).unwrap();
        let theta0 = 1.0 - pair.ratio();
        let closed = (1.0 - (2.0 + pair.t_dual) / 2.0).exp();
        assert!((gamma_fn(theta0, 2.0) - closed).abs() < 1e-14);
        assert!(closed < 1.0);
    }

    #[test]
    fn theta_choices_satisfy_their_inequalities() {
        for &c in &[0.3f64, 0.5, 0.9, 1.05, 1.2, 1.5, 2.0, 3.0, 4.0, 8.0] {
            let ch = choose_theta(c).unwrap();
            let pair = solve_duality(c).unwrap();
            assert!(ch.theta > 0.0 && ch.theta <= 1.0);
            assert!(ch.eps0 > 0.0 && ch.eps0 <= ch.theta);
            assert!(ch.gamma_at_theta < 1.0 - 1e-9, "c={c}");
            if c > 1.0 {
                assert!(ch.theta - (1.0 - pair.ratio()) > 1e-9, "c={c}");
            }
            let a = eps_bound(c, ch.eps0);
            assert!(a < 1.0);
            assert!(ch.eta > 0.0 && ch.eta.exp() * a < 1.0 && ch.eta.exp() * ch.gamma_at_theta < 1.0);
        }
    }

    #[test]
    fn theta_branches() {
        assert_eq!(choose_theta(0.5f64).unwrap().theta, 1.0);
        assert_eq!(choose_theta(4.0f64).unwrap().theta, 1.0);
        let ch = choose_theta(1.2f64).unwrap();
        assert!(ch.theta < 1.0);
        assert!(choose_theta(1.0f64).is_err());
        assert!(choose_theta(0.0f64).is_err());
    }

    #[test]
    fn hand_evaluation_at_n_two() {
        let (n, c) = (2usize, 0.5f64);
        let law = jump_law(n, c, 1.0).unwrap();
        assert_eq!(law.max_jump(), 2);
        let q = 1.0 - c / n as f64;
        // q^{4-2} / q^{2-1/2} = q^{1/2}
        let ratio = n as f64 * (c / n as f64) * q.powf(0.5) / 2.0;
        assert!((law.p(2) / law.p(1) - ratio).abs() < 1e-14);
        let z = q.powf(1.5) + n as f64 * (c / n as f64) * q.powi(2) / 2.0;
        assert!((law.log_z - z.ln()).abs() < 1e-15);
    }

    #[test]
    fn normalized_and_truncation_consistent() {
        for &(n, c, th) in &[(50usize, 2.0f64, 1.0f64), (300, 0.5, 0.7), (1000, 3.0, 0.4)] {
            let law = jump_law(n, c, th).unwrap();
            assert!((law.total_mass() - 1.0).abs() < 1e-10);
            let full = jump_law(n, c, 1.0).unwrap();
            let m = law.max_jump();
            let r = restrict(&full, m).unwrap();
            for k in 1..=m {
                assert!((r.logp(k) - law.logp(k)).abs() < 1e-12);
            }
            assert!((r.log_z - law.log_z).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(jump_law(0, 0.5f64, 1.0).is_err());
        assert!(jump_law(1, 1.5f64, 1.0).is_err());
        assert!(jump_law(10, 0.5f64, 0.0).is_err());
        assert!(jump_law(10, 0.5f64, 0.05).is_err());
        assert!(jump_law(10, 10.0f64, 1.0).is_err());
        assert!(jump_law(10, -1.0f64, 1.0).is_err());
    }

    #[test]
    fn small_jumps_approach_borel_weights() {
        let (n, c) = (1000usize, 0.5f64);
        let law = jump_law(n, c, 1.0).unwrap();
        let pair = solve_duality(c).unwrap();
        let scale = pair.ratio() * (1.0 - pair.t_dual / 2.0);
        let lf = LogFactorials::new(10);
        for k in 1..=5 {
            let h = crate::duality::log_borel_weight(c, k, &lf).exp();
            let r = law.p(k) * scale / h;
            assert!((r - 1.0).abs() <= 50.0 / n as f64, "k={k} r={r}");
            let w = law.log_weight(k).exp() / h;
            assert!((w - 1.0).abs() <= 50.0 / n as f64, "k={k} w={w}");
        }
    }

    #[test]
    fn moments_near_limits() {
        let n = 1000;
        let law = jump_law(n, 0.5f64, 1.0).unwrap();
        let m = ensemble_moments(&law);
        let lim = ensemble_moment_limits(&solve_duality(0.5f64).unwrap());
        assert!((lim.z - 0.75).abs() < 1e-15);
        assert!((lim.mean - 4.0 / 3.0).abs() < 1e-15);
        assert!((lim.second - 8.0 / 3.0).abs() < 1e-15);
        assert!((lim.variance - 8.0 / 9.0).abs() < 1e-15);
        for (a, b) in [(m.z, lim.z), (m.mean, lim.mean), (m.second, lim.second), (m.variance, lim.variance)] {
            assert!((a - b).abs() <= 50.0 / n as f64, "{a} vs {b}");
        }
        assert!((m.variance - (m.second - m.mean * m.mean)).abs() < 1e-12);
    }

    #[test]
    fn mgf_is_zero_at_zero_and_bounded() {
        let ch = choose_theta(2.0f64).unwrap();
        let mut worst = f64::NEG_INFINITY;
        for &n in &[100usize, 1000, 10_000] {
            let law = jump_law(n, 2.0f64, ch.theta).unwrap();
            assert!(mgf_bound_check(&law, 0.0).abs() < 1e-12);
            worst = worst.max(mgf_bound_check(&law, ch.eta));
        }
        assert!(worst < 10.0);
    }

    #[test]
    fn zero_range_rates() {
        let (n, c) = (100usize, 2.0f64);
        assert_eq!(zero_range_rate(n, c, 0).unwrap(), f64::NEG_INFINITY);
        let g1 = zero_range_rate(n, c, 1).unwrap().exp();
        assert!((g1 - 0.98f64.powf(-99.5)).abs() < 1e-12 * g1);
        let g2 = zero_range_rate(n, c, 2).unwrap().exp();
        let hand = 0.02 / 0.02 * 0.98f64.powf(-98.5);
        assert!((g2 - hand).abs() < 1e-12 * hand);
        assert!(zero_range_rate(n, c, 101).is_err());
        let mu = mu_for_graph(c, n, 3).unwrap();
        assert!(zero_range_log_rate(&mu, n, c, 4).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let law = jump_law(200, 2.0f32, 1.0).unwrap();
        assert!((law.total_mass() - 1.0).abs() < 1e-4);
    }
}
