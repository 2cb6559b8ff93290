//! Compound Poisson totals `S = Σ_{i ≤ N(λ)} X_i` and their laws conditioned on `S = n`.

use crate::duality::solve_duality;
use crate::ensemble::{choose_theta, jump_law, JumpLaw};
use crate::error::{Error, Result};
use crate::exactgraph::{log_prob_cmax_le, partitions, ExactLaw, PARTITION_CAP};
use crate::logspace::{log_add_exp, log_sum_exp, log_sum_exp_iter};
use crate::scalar::{from_usize, lit, LogFactorials, Scalar};

/// Cap for the jump-count-resolved dynamic program.
pub const N_PMF_CAP: usize = 2000;

/// Panjer recursion on log rates `log_rates[j-1] = ln(λ p(j))`:
/// `m p(m) = Σ_j j λ p(j) p(m-j)` started from `p(0) = e^{log_p0}`.
pub fn panjer_log<S: Scalar>(log_rates: &[S], log_p0: S, n_max: usize) -> Vec<S> {
    let a: Vec<S> = log_rates
        .iter()
        .enumerate()
        .map(|(i, &r)| from_usize::<S>(i + 1).ln() + r)
        .collect();
    let mut lp = Vec::with_capacity(n_max + 1);
    lp.push(log_p0);
    let mut terms = Vec::with_capacity(a.len());
    for m in 1..=n_max {
        terms.clear();
        let kmax = m.min(a.len());
        terms.extend((1..=kmax).map(|j| a[j - 1] + lp[m - j]));
        lp.push(log_sum_exp(&terms) - from_usize::<S>(m).ln());
    }
    lp
}

#[derive(Debug, Clone)]
pub struct CompoundSumTable<S> {
    pub lambda: S,
    pub law: JumpLaw<S>,
    logpmf: Vec<S>,
}

impl<S: Scalar> CompoundSumTable<S> {
    pub fn n_max(&self) -> usize {
        self.logpmf.len() - 1
    }

    pub fn logpmf(&self, m: usize) -> S {
        if m > self.n_max() {
            S::nan()
        } else {
            self.logpmf[m]
        }
    }

    pub fn log_values(&self) -> &[S] {
        &self.logpmf
    }

    /// `ln(λ p_X(j))` for `j = 1..=K`.
    pub fn log_rates(&self) -> Vec<S> {
        let ll = self.lambda.ln();
        self.law.log_probs().iter().map(|&l| ll + l).collect()
    }

    /// Relative residual of `m p_S(m) = λ Σ j p_X(j) p_S(m-j)`.
    pub fn panjer_residual(&self, m: usize) -> S {
        if m == 0 {
            return (self.logpmf[0] + self.lambda).abs();
        }
        let rates = self.log_rates();
        let kmax = m.min(rates.len());
        let rhs = log_sum_exp_iter((1..=kmax).map(|j| from_usize::<S>(j).ln() + rates[j - 1] + self.logpmf[m - j]));
        let lhs = from_usize::<S>(m).ln() + self.logpmf[m];
        (lhs - rhs).exp_m1().abs()
    }
}

pub fn compound_pmf<S: Scalar>(law: &JumpLaw<S>, lambda: S, n_max: usize) -> Result<CompoundSumTable<S>> {
    if !(lambda > S::zero()) || !lambda.is_finite() {
        return Err(Error::invalid("lambda", format!("must be positive and finite, got {lambda}")));
    }
    let ll = lambda.ln();
    let rates: Vec<S> = law.log_probs().iter().map(|&l| ll + l).collect();
    let logpmf = panjer_log(&rates, -lambda, n_max);
    Ok(CompoundSumTable { lambda, law: law.clone(), logpmf })
}

/// The compound sum with `λ = Z n` conditioned on hitting `n`.
#[derive(Debug, Clone)]
pub struct ConditionalEnsemble<S> {
    pub table: CompoundSumTable<S>,
    pub n: usize,
    pub log_p_hit: S,
}

impl<S: Scalar> ConditionalEnsemble<S> {
    pub fn from_law(law: JumpLaw<S>) -> Result<Self> {
        let n = law.n;
        let lambda = law.log_z.exp() * from_usize::<S>(n);
        let table = compound_pmf(&law, lambda, n)?;
        let log_p_hit = table.logpmf(n);
        Ok(ConditionalEnsemble { table, n, log_p_hit })
    }

    pub fn lambda(&self) -> S {
        self.table.lambda
    }

    pub fn law(&self) -> &JumpLaw<S> {
        &self.table.law
    }
}

pub fn conditional_ensemble<S: Scalar>(n: usize, c: S, theta: S) -> Result<ConditionalEnsemble<S>> {
    ConditionalEnsemble::from_law(jump_law(n, c, theta)?)
}

/// `θ` from [`choose_theta`], or `1` at the critical point where no choice exists.
pub fn auto_theta<S: Scalar>(c: S) -> Result<S> {
    if c == S::one() {
        return Ok(S::one());
    }
    Ok(choose_theta(c)?.theta)
}

/// `ln[e^{-Zn} n^n (1-c/n)^{n²/2} / n!]`.
pub fn hit_log_closed_form<S: Scalar>(n: usize, c: S, log_z: S) -> S {
    let nf = from_usize::<S>(n);
    let lf = LogFactorials::<S>::new(n);
    -log_z.exp() * nf + nf * nf.ln() + nf * nf / lit(2.0) * (-(c / nf)).ln_1p() - lf.ln_factorial(n)
}

/// `|ln P(S = n) - ln[closed form · P(C_max <= ⌊θn⌋)]|`, with the last factor from the partition formula.
pub fn hit_probability_identity<S: Scalar>(n: usize, c: S, theta: S) -> Result<S> {
    if n > PARTITION_CAP {
        return Err(Error::CapExceeded { what: "n (hit identity)", value: n, cap: PARTITION_CAP });
    }
    let ens = conditional_ensemble(n, c, theta)?;
    let m = ens.law().max_jump();
    let rhs = hit_log_closed_form(n, c, ens.law().log_z) + log_prob_cmax_le(n, c, m)?;
    Ok((ens.log_p_hit - rhs).abs())
}

/// Closed form of `ln[P(S = m)/P(S = n)]` at `θ = 1`:
/// `(m-n) ln n - ((n-m)²/2) ln(1-c/n) + ln n! - ln m!`.
pub fn hit_ratio_closed_form<S: Scalar>(n: usize, m: usize, c: S) -> S {
    let nf = from_usize::<S>(n);
    let lf = LogFactorials::<S>::new(n);
    let d = from_usize::<S>(n - m);
    -d * nf.ln() - d * d / lit(2.0) * (-(c / nf)).ln_1p() + lf.ln_factorial(n) - lf.ln_factorial(m)
}

pub fn ratio_identity_fra<S: Scalar>(n: usize, m: usize, c: S) -> Result<S> {
    if m > n {
        return Err(Error::invalid("m", format!("m = {m} exceeds n = {n}")));
    }
    let ens = conditional_ensemble(n, c, S::one())?;
    let lhs = ens.table.logpmf(m) - ens.log_p_hit;
    Ok((lhs - hit_ratio_closed_form(n, m, c)).abs())
}

/// Log pmf of the number of `k`-jumps given `S = n`, over `j = 0..=n/k`.
pub fn conditional_count_pmf<S: Scalar>(ens: &ConditionalEnsemble<S>, k: usize) -> Result<Vec<S>> {
    if k == 0 {
        return Err(Error::invalid("k", "size must be at least 1"));
    }
    let n = ens.n;
    if k > ens.law().max_jump() {
        return Ok(vec![S::zero()]);
    }
    let lambda = ens.lambda();
    let mut rates = ens.table.log_rates();
    let lr_k = rates[k - 1];
    let rate_k = lr_k.exp();
    rates[k - 1] = S::neg_infinity();
    let without = panjer_log(&rates, -lambda + rate_k, n);
    let lf = LogFactorials::<S>::new(n / k);
    Ok((0..=n / k)
        .map(|j| {
            let jf = from_usize::<S>(j);
            let pois = -rate_k + if j == 0 { S::zero() } else { jf * lr_k } - lf.ln_factorial(j);
            pois + without[n - j * k] - ens.log_p_hit
        })
        .collect())
}

/// Log pmf of the largest jump given `S = n`, indexed by `m = 0..=K`.
///
/// `G_k(m)` collects the Poisson weights of configurations with all jumps `<= k` and total `m`;
/// adding the `k`-atom gives `G_k(m) = Σ_j r_k^j/j! G_{k-1}(m - jk)`, all terms positive.
pub fn conditional_max_pmf<S: Scalar>(ens: &ConditionalEnsemble<S>) -> Vec<S> {
    let n = ens.n;
    let rates = ens.table.log_rates();
    let kmax = rates.len();
    let lf = LogFactorials::<S>::new(n);
    let mut g = vec![S::neg_infinity(); n + 1];
    g[0] = S::zero();
    let mut out = vec![S::neg_infinity(); kmax + 1];
    let mut terms = Vec::new();
    for k in 1..=kmax {
        let lr = rates[k - 1];
        for m in (k..=n).rev() {
            terms.clear();
            terms.extend(
                (1..=m / k).map(|j| from_usize::<S>(j) * lr - lf.ln_factorial(j) + g[m - j * k]),
            );
            let new_part = log_sum_exp(&terms);
            if m == n {
                out[k] = -ens.lambda() + new_part - ens.log_p_hit;
            }
            g[m] = log_add_exp(g[m], new_part);
        }
    }
    out
}

/// `ln P(max = k | S = n)` for `k > n/2`, where exactly one jump can reach `k`:
/// `P(max = k, S = n) = λ p_X(k) P(S = n - k)`.
pub fn max_upper_log_prob<S: Scalar>(ens: &ConditionalEnsemble<S>, k: usize) -> Result<S> {
    let n = ens.n;
    if 2 * k <= n || k > n {
        return Err(Error::invalid("k", format!("needs n/2 < k <= n, got k = {k}, n = {n}")));
    }
    Ok(ens.lambda().ln() + ens.law().logp(k) + ens.table.logpmf(n - k) - ens.log_p_hit)
}

/// `ln P(lo <= max <= hi | S = n)`.
pub fn max_window_log_prob<S: Scalar>(ens: &ConditionalEnsemble<S>, lo: usize, hi: usize) -> Result<S> {
    let hi = hi.min(ens.law().max_jump());
    if lo > hi {
        return Ok(S::neg_infinity());
    }
    if 2 * lo > ens.n {
        let terms: Result<Vec<S>> = (lo..=hi).map(|k| max_upper_log_prob(ens, k)).collect();
        return Ok(log_sum_exp(&terms?));
    }
    let pmf = conditional_max_pmf(ens);
    Ok(log_sum_exp(&pmf[lo.max(1)..=hi]))
}

/// Log pmf of the number of jumps given `S = n`, over `j = 0..=n`.
pub fn conditional_n_pmf<S: Scalar>(ens: &ConditionalEnsemble<S>) -> Result<Vec<S>> {
    let n = ens.n;
    if n > N_PMF_CAP {
        return Err(Error::CapExceeded { what: "n (jump-count law)", value: n, cap: N_PMF_CAP });
    }
    let logp = ens.law().log_probs();
    let kmax = logp.len();
    let lambda = ens.lambda();
    let ll = lambda.ln();
    let lf = LogFactorials::<S>::new(n);
    let mut out = vec![S::neg_infinity(); n + 1];
    // f_{j}(m) = P(X_1 + .. + X_j = m), nonzero for m >= j
    let mut prev = vec![S::neg_infinity(); n + 1];
    prev[0] = S::zero();
    if n == 0 {
        out[0] = -lambda - ens.log_p_hit;
        return Ok(out);
    }
    let mut cur = vec![S::neg_infinity(); n + 1];
    let mut terms = Vec::with_capacity(kmax);
    for j in 1..=n {
        for v in cur[..j].iter_mut() {
            *v = S::neg_infinity();
        }
        for m in j..=n {
            terms.clear();
            let xmax = kmax.min(m + 1 - j);
            terms.extend((1..=xmax).map(|x| logp[x - 1] + prev[m - x]));
            cur[m] = log_sum_exp(&terms);
        }
        let jf = from_usize::<S>(j);
        out[j] = -lambda + jf * ll - lf.ln_factorial(j) + cur[n] - ens.log_p_hit;
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(out)
}

/// Law of the jump profile given `S = n`, on partitions with largest part `<= K` (`n <= 40`).
pub fn conditional_profile_law<S: Scalar>(ens: &ConditionalEnsemble<S>) -> Result<ExactLaw<S>> {
    let n = ens.n;
    if n > PARTITION_CAP {
        return Err(Error::CapExceeded { what: "n (profile law)", value: n, cap: PARTITION_CAP });
    }
    let rates = ens.table.log_rates();
    let lf = LogFactorials::<S>::new(n);
    let entries = partitions(n)
        .into_iter()
        .filter(|p| p.max_part() <= rates.len())
        .map(|p| {
            let mut l = -ens.lambda() - ens.log_p_hit;
            for k in 1..=p.max_part() {
                let g = p.gamma(k) as usize;
                if g > 0 {
                    l = l + from_usize::<S>(g) * rates[k - 1] - lf.ln_factorial(g);
                }
            }
            (p, l)
        })
        .collect();
    Ok(ExactLaw { n, entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnBeta<S> {
    pub k: usize,
    pub value: S,
    pub limit: S,
}

/// `(1/a_n²) ln[Z n P(X = k_n(β)) / P(S = n)]` with `k_n(β) = ⌊(1-T/c)n + β a_n √n⌋`, for `c > 1`.
pub fn knbeta_ratio<S: Scalar>(n: usize, c: S, beta: S, a_n: S) -> Result<KnBeta<S>> {
    if !(c > S::one()) {
        return Err(Error::invalid("c", format!("needs c > 1, got {c}")));
    }
    let ens = conditional_ensemble(n, c, auto_theta(c)?)?;
    knbeta_from_ensemble(&ens, beta, a_n)
}

pub fn knbeta_from_ensemble<S: Scalar>(ens: &ConditionalEnsemble<S>, beta: S, a_n: S) -> Result<KnBeta<S>> {
    if !(a_n > S::zero()) {
        return Err(Error::invalid("a_n", format!("must be positive, got {a_n}")));
    }
    let c = ens.law().c;
    let pair = solve_duality(c)?;
    let nf = from_usize::<S>(ens.n);
    let pos = (S::one() - pair.ratio()) * nf + beta * a_n * nf.sqrt();
    let k = pos.floor().to_usize().unwrap_or(0);
    if pos < S::one() || k > ens.law().max_jump() {
        return Err(Error::invalid("beta", format!("k_n(beta) = {pos} lies outside 1..={}", ens.law().max_jump())));
    }
    let value = (ens.lambda().ln() + ens.law().logp(k) - ens.log_p_hit) / (a_n * a_n);
    let t = pair.t_dual;
    let limit = -(beta * beta / lit(2.0)) * (S::one() - t) * (S::one() - c) / (S::one() - pair.ratio());
    Ok(KnBeta { k, value, limit })
}

/// `(1/a_n²) ln P(S = n)`, the subcritical hit rate.
pub fn subcritical_hit_rate<S: Scalar>(n: usize, c: S, a_n: S) -> Result<S> {
    if !(c < S::one()) {
        return Err(Error::invalid("c", format!("needs c < 1, got {c}")));
    }
    let ens = conditional_ensemble(n, c, auto_theta(c)?)?;
    Ok(ens.log_p_hit / (a_n * a_n))
}

/// Linear probabilities from a log pmf.
pub fn to_probs<S: Scalar>(logpmf: &[S]) -> Vec<S> {
    logpmf.iter().map(|l| l.exp()).collect()
}

/// Total variation between two pmfs given as linear probabilities (shorter one padded with zeros).
pub fn tv_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    let len = a.len().max(b.len());
    let get = |v: &[S], i: usize| v.get(i).copied().unwrap_or(S::zero());
    (0..len).map(|i| (get(a, i) - get(b, i)).abs()).fold(S::zero(), |x, y| x + y) / lit(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::jump_law_from_weights;

    fn two_point_law() -> JumpLaw<f64> {
        jump_law_from_weights(2, 0.5, 1.0, vec![0.6f64.ln(), 0.4f64.ln()])
    }

    #[test]
    fn matches_convolution_power_series() {
        let law = two_point_law();
        let t = compound_pmf(&law, 1.0, 6).unwrap();
        // P(S = m) = Σ_j e^{-1}/j! P(X_1 + .. + X_j = m)
        let px = [0.0, 0.6, 0.4];
        let mut conv = vec![vec![0.0; 7]; 7];
        conv[0][0] = 1.0;
        for j in 1..7 {
            for m in 0..7 {
                for x in 1..=2 {
                    if m >= x {
                        conv[j][m] += px[x] * conv[j - 1][m - x];
                    }
                }
            }
        }
        let mut fact = 1.0;
        let mut direct = vec![0.0; 7];
        for (j, row) in conv.iter().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            for m in 0..7 {
                direct[m] += (-1f64).exp() / fact * row[m];
            }
        }
        for m in 0..7 {
            assert!((t.logpmf(m).exp() - direct[m]).abs() < 1e-15, "m={m}");
        }
        assert_eq!(t.logpmf(0), -1.0);
        assert!((t.logpmf(1).exp() - (-1f64).exp() * 0.6).abs() < 1e-16);
    }

    #[test]
    fn panjer_residual_and_mass() {
        let ens = conditional_ensemble(200, 2.0f64, 1.0).unwrap();
        for m in [0usize, 1, 7, 100, 200] {
            assert!(ens.table.panjer_residual(m) < 1e-11);
        }
        let mass: f64 = ens.table.log_values().iter().map(|l| l.exp()).sum();
        assert!(mass <= 1.0 + 1e-12);
        assert!(compound_pmf(ens.law(), 0.0, 3).is_err());
    }

    #[test]
    fn hit_identity_small_cases() {
        assert!(hit_probability_identity(10, 0.5f64, 1.0).unwrap() <= 1e-9);
        let th = auto_theta(2.0f64).unwrap();
        assert!(hit_probability_identity(20, 2.0f64, th).unwrap() <= 1e-8);
        assert!(hit_probability_identity(20, 2.0f64, 0.5).unwrap() <= 1e-8);
        assert!(hit_probability_identity(41, 2.0f64, 1.0).is_err());
    }

    #[test]
    fn fra_identity() {
        assert!(ratio_identity_fra(15, 15, 2.0f64).unwrap() < 1e-12);
        assert!(ratio_identity_fra(15, 10, 2.0f64).unwrap() <= 1e-9);
        assert!(ratio_identity_fra(30, 29, 0.5f64).unwrap() <= 1e-9);
        assert!(ratio_identity_fra(10, 11, 0.5f64).is_err());
    }

    #[test]
    fn count_and_max_laws_normalize() {
        let ens = conditional_ensemble(30, 2.0f64, 1.0).unwrap();
        for k in [1usize, 2, 5, 20] {
            let s: f64 = to_probs(&conditional_count_pmf(&ens, k).unwrap()).iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "k={k}");
        }
        let s: f64 = to_probs(&conditional_max_pmf(&ens)).iter().sum();
        assert!((s - 1.0).abs() < 1e-10);
        let ens = conditional_ensemble(30, 2.0f64, 0.5).unwrap();
        assert_eq!(conditional_count_pmf(&ens, 16).unwrap(), vec![0.0]);
        assert!(conditional_count_pmf(&ens, 0).is_err());
    }

    #[test]
    fn trivial_single_vertex() {
        let ens = conditional_ensemble(1, 0.5f64, 1.0).unwrap();
        let mx = to_probs(&conditional_max_pmf(&ens));
        assert!((mx[1] - 1.0).abs() < 1e-15);
        let np = to_probs(&conditional_n_pmf(&ens).unwrap());
        assert!((np[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn upper_identity_matches_full_pmf() {
        let ens = conditional_ensemble(120, 2.0f64, 1.0).unwrap();
        let pmf = conditional_max_pmf(&ens);
        for k in 61..=120 {
            let fast = max_upper_log_prob(&ens, k).unwrap();
            assert!((fast - pmf[k]).abs() < 1e-10 * (1.0 + fast.abs()), "k={k}");
        }
        assert!(max_upper_log_prob(&ens, 60).is_err());
        let w = max_window_log_prob(&ens, 80, 100).unwrap();
        let direct = log_sum_exp(&pmf[80..=100]);
        assert!((w - direct).abs() < 1e-10);
        let w = max_window_log_prob(&ens, 30, 100).unwrap();
        assert!((w - log_sum_exp(&pmf[30..=100])).abs() < 1e-12);
    }

    #[test]
    fn max_mode_near_giant_fraction() {
        let n = 200;
        let ens = conditional_ensemble(n, 2.0f64, 1.0).unwrap();
        let pmf = conditional_max_pmf(&ens);
        let mode = (1..pmf.len()).max_by(|&a, &b| pmf[a].partial_cmp(&pmf[b]).unwrap()).unwrap();
        let pair = solve_duality(2.0f64).unwrap();
        let target = (1.0 - pair.ratio()) * n as f64;
        assert!((mode as f64 - target).abs() <= 3.0, "mode {mode} vs {target}");
    }

    #[test]
    fn knbeta_at_zero_is_small_and_rejects_subcritical() {
        let r = knbeta_ratio(2000, 2.0f64, 0.0, 2000f64.powf(0.25)).unwrap();
        assert_eq!(r.limit, 0.0);
        assert!(r.value.abs() < 0.2, "{}", r.value);
        assert!(knbeta_ratio(100, 0.5f64, 1.0, 3.0).is_err());
        assert!(knbeta_ratio(100, 2.0f64, 100.0, 3.0).is_err());
    }
}
