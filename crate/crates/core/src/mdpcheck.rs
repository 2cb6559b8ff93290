//! Exact finite-`n` checks of the moderate deviation statements.
//!
//! Everything here is deterministic: probabilities come from the Panjer tables
//! and conditional laws of [`crate::panjer`], never from sampling.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::duality::{borel_weights, solve_duality};
use crate::ensemble::{ensemble_moments, JumpLaw};
use crate::error::{Error, Result};
use crate::logspace::{log_sum_exp, log_sum_exp_iter};
use crate::panjer::{
    auto_theta, compound_pmf, conditional_count_pmf, conditional_ensemble, conditional_n_pmf,
    max_window_log_prob, ConditionalEnsemble, N_PMF_CAP,
};
use crate::rates::{grand_rates, imax_rate, iota_rate, jay_rate};

pub const MAX_SCAN_CAP: usize = 20_000;
pub const DEFAULT_DELTA: f64 = 0.1;

/// Speed sequence `a_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnRule {
    Power(f64),
    SqrtLog,
}

impl AnRule {
    pub fn eval(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            AnRule::Power(rho) => nf.powf(rho),
            AnRule::SqrtLog => (2.0 * nf.ln()).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let AnRule::Power(rho) = *self {
            if !(rho > 0.0 && rho < 0.5) {
                return Err(Error::invalid("an", format!("power must lie in (0, 0.5), got {rho}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for AnRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnRule::Power(r) => write!(f, "pow:{r}"),
            AnRule::SqrtLog => write!(f, "sqrt_log"),
        }
    }
}

impl FromStr for AnRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rule = match s.trim() {
            "sqrt_log" => AnRule::SqrtLog,
            other => {
                let rho = other
                    .strip_prefix("pow:")
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid("an", format!("expected pow:<rho> or sqrt_log, got {other:?}")))?;
                AnRule::Power(rho)
            }
        };
        rule.validate()?;
        Ok(rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanStatistic {
    Max,
    CountK(usize),
    N,
    GrandSum,
}

impl fmt::Display for ScanStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScanStatistic::Max => write!(f, "max"),
            ScanStatistic::CountK(k) => write!(f, "count:{k}"),
            ScanStatistic::N => write!(f, "N"),
            ScanStatistic::GrandSum => write!(f, "grand_sum"),
        }
    }
}

impl FromStr for ScanStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "max" => Ok(ScanStatistic::Max),
            "N" | "n" => Ok(ScanStatistic::N),
            "grand_sum" => Ok(ScanStatistic::GrandSum),
            other => other
                .strip_prefix("count:")
                .or_else(|| other.strip_prefix("count_"))
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(ScanStatistic::CountK)
                .ok_or_else(|| Error::invalid("stat", format!("unknown statistic {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub c: f64,
    pub n_grid: Vec<usize>,
    pub an: AnRule,
    pub statistic: ScanStatistic,
    pub betas: Vec<f64>,
    pub delta: f64,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || self.c == 1.0 {
            return Err(Error::invalid("c", format!("needs c > 0 and c != 1, got {}", self.c)));
        }
        self.an.validate()?;
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n", "grid must be non-empty and strictly increasing"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid("delta", "must be positive"));
        }
        let n_top = *self.n_grid.last().unwrap();
        if self.an.eval(n_top) / (n_top as f64).sqrt() > 0.25 {
            return Err(Error::invalid("an", format!("a_n/sqrt(n) exceeds 0.25 at n = {n_top}")));
        }
        let cap = match self.statistic {
            ScanStatistic::N => N_PMF_CAP,
            _ => MAX_SCAN_CAP,
        };
        if n_top > cap {
            return Err(Error::CapExceeded { what: "n (scan)", value: n_top, cap });
        }
        if self.statistic == ScanStatistic::Max && self.c < 1.0 {
            return Err(Error::invalid("stat", "the largest-jump scan needs c > 1"));
        }
        Ok(())
    }

    /// `κ` of the rate the statistic is compared with.
    pub fn kappa(&self) -> Result<f64> {
        Ok(match self.statistic {
            ScanStatistic::Max => imax_rate(self.c)?.kappa,
            ScanStatistic::CountK(k) => iota_rate(self.c, k)?.kappa,
            ScanStatistic::N => jay_rate(self.c)?.kappa,
            ScanStatistic::GrandSum => grand_rates(self.c, 1.0, None)?.sum.kappa,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub beta: f64,
    pub a_n: f64,
    /// Integer window `[lo, hi]` of the statistic.
    pub lo: i64,
    pub hi: i64,
    pub log_prob: f64,
    /// `-(1/a_n²) ln P`.
    pub scaled: f64,
    /// `κβ²/2`.
    pub rate_at_beta: f64,
    /// `κ(|β|-δ)²/2`, the infimum over the window.
    pub rate_ball: f64,
}

/// Centre of the statistic at `n` (limit constants times `n`, or the exact grand mean).
fn centre(spec: &ScanSpec, ens: &ConditionalEnsemble<f64>) -> Result<f64> {
    let pair = solve_duality(spec.c)?;
    let nf = ens.n as f64;
    Ok(match spec.statistic {
        ScanStatistic::Max => (1.0 - pair.ratio()) * nf,
        ScanStatistic::CountK(k) => borel_weights(spec.c, k)?.h(k) * nf,
        ScanStatistic::N => pair.ratio() * (1.0 - pair.t_dual / 2.0) * nf,
        ScanStatistic::GrandSum => ens.lambda() * ensemble_moments(ens.law()).mean,
    })
}

fn window_log_prob(logpmf: &[f64], lo: i64, hi: i64) -> f64 {
    let lo = lo.max(0) as usize;
    let hi = hi.min(logpmf.len() as i64 - 1);
    if hi < lo as i64 {
        return f64::NEG_INFINITY;
    }
    log_sum_exp(&logpmf[lo..=hi as usize])
}

fn scan_one_n(spec: &ScanSpec, n: usize, kappa: f64) -> Result<Vec<ScanRow>> {
    let theta = auto_theta(spec.c)?;
    let ens = conditional_ensemble(n, spec.c, theta)?;
    let a = spec.an.eval(n);
    let scale = a * (n as f64).sqrt();
    let mid = centre(spec, &ens)?;
    let windows: Vec<(f64, i64, i64)> = spec
        .betas
        .iter()
        .map(|&b| {
            let lo = (mid + (b - spec.delta) * scale).ceil() as i64;
            let hi = (mid + (b + spec.delta) * scale).ceil() as i64 - 1;
            (b, lo, hi)
        })
        .collect();
    let pmf: Option<Vec<f64>> = match spec.statistic {
        ScanStatistic::CountK(k) => Some(conditional_count_pmf(&ens, k)?),
        ScanStatistic::N => Some(conditional_n_pmf(&ens)?),
        ScanStatistic::GrandSum => {
            let top = windows.iter().map(|w| w.2).max().unwrap_or(0).max(0) as usize;
            let table = compound_pmf(ens.law(), ens.lambda(), top)?;
            Some(table.log_values().to_vec())
        }
        ScanStatistic::Max => None,
    };
    windows
        .into_iter()
        .map(|(beta, lo, hi)| {
            let log_prob = match &pmf {
                Some(p) => window_log_prob(p, lo, hi),
                None => {
                    if hi < 1 || lo > n as i64 {
                        f64::NEG_INFINITY
                    } else {
                        max_window_log_prob(&ens, lo.max(1) as usize, hi as usize)?
                    }
                }
            };
            let ball = (beta.abs() - spec.delta).max(0.0);
            Ok(ScanRow {
                n,
                beta,
                a_n: a,
                lo,
                hi,
                log_prob,
                scaled: -log_prob / (a * a),
                rate_at_beta: kappa * beta * beta / 2.0,
                rate_ball: kappa * ball * ball / 2.0,
            })
        })
        .collect()
}

/// Exact window probabilities over the grid, rows ordered by `n` then `β`.
pub fn conditional_mdp_scan(spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    spec.validate()?;
    let kappa = spec.kappa()?;
    let per_n: Result<Vec<Vec<ScanRow>>> = spec.n_grid.par_iter().map(|&n| scan_one_n(spec, n, kappa)).collect();
    Ok(per_n?.into_iter().flatten().collect())
}

/// `e^x - 1 - x` without cancellation.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x2 * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x / 720.0))))
    } else {
        x.exp_m1() - x
    }
}

fn ln_expm1_minus_x(x: f64) -> f64 {
    if x > 1.0 {
        x + (-(1.0 + x) * (-x).exp()).ln_1p()
    } else {
        expm1_minus_x(x).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfCheck {
    pub n: usize,
    pub a_n: f64,
    pub xi: f64,
    /// Random-sum form: `(1/a²)[λn(M(t)-1) - tλμn]` with `t = ξ a/√n`.
    pub exact_random: f64,
    /// `ξ²λ(σ²+μ²)/2`.
    pub predicted_random: f64,
    /// Fixed-count form: `(1/a²)⌊λn⌋(ln M(t) - tμ)`.
    pub exact_fixed: f64,
    /// `ξ²λσ²/2`.
    pub predicted_fixed: f64,
}

impl MgfCheck {
    pub fn residual_random(&self) -> f64 {
        (self.exact_random - self.predicted_random).abs()
    }

    pub fn residual_fixed(&self) -> f64 {
        (self.exact_fixed - self.predicted_fixed).abs()
    }

    /// Quadratic coefficients implied by the exact values, `2·exact/ξ²`.
    pub fn fitted_coefficients(&self) -> (f64, f64) {
        let s = 2.0 / (self.xi * self.xi);
        (self.exact_random * s, self.exact_fixed * s)
    }
}

/// Scaled log-MGFs of the compound and fixed-count sums of `law`, against their quadratic expansions.
/// `lambda` is the intensity per unit `n`.
pub fn mgf_expansion_check(law: &JumpLaw<f64>, lambda: f64, xi: f64, a_n: f64, n: usize) -> Result<MgfCheck> {
    if !(lambda > 0.0) || !(a_n > 0.0) || n == 0 {
        return Err(Error::invalid("lambda", "needs lambda > 0, a_n > 0, n >= 1"));
    }
    let m = ensemble_moments(law);
    let t = xi * a_n / (n as f64).sqrt();
    let ks = 1..=law.max_jump();
    // Σ p_k (e^{tk} - 1 - tk), summed in logs since e^{tk} can overflow where p_k underflows
    let second = log_sum_exp_iter(ks.map(|k| law.logp(k) + ln_expm1_minus_x(t * k as f64))).exp();
    let first = second + t * m.mean;
    let nf = n as f64;
    let a2 = a_n * a_n;
    let exact_random = lambda * nf * second / a2;
    let count = (lambda * nf).floor();
    let log_m_minus = (first.ln_1p() - first) + second;
    let exact_fixed = count * log_m_minus / a2;
    let half = xi * xi / 2.0;
    Ok(MgfCheck {
        n,
        a_n,
        xi,
        exact_random,
        predicted_random: half * lambda * m.second,
        exact_fixed,
        predicted_fixed: half * lambda * m.variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphanRow {
    pub n: usize,
    pub a_n: f64,
    /// `-(1/a²) λ P(X > αn)`, the exact scaled log-probability that no jump exceeds `αn`.
    pub value: f64,
    /// `Z E X / (α a²)`.
    pub markov_bound: f64,
}

impl AlphanRow {
    pub fn tightness(&self) -> f64 {
        self.value.abs() / self.markov_bound
    }
}

pub fn alphan_check(c: f64, theta: f64, alpha: f64, an: AnRule, n_grid: &[usize]) -> Result<Vec<AlphanRow>> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    an.validate()?;
    n_grid
        .par_iter()
        .map(|&n| {
            let law = crate::ensemble::jump_law(n, c, theta)?;
            let a = an.eval(n);
            let cut = (alpha * n as f64).floor() as usize;
            let tail = if cut >= law.max_jump() {
                f64::NEG_INFINITY
            } else {
                log_sum_exp_iter((cut + 1..=law.max_jump()).map(|k| law.logp(k)))
            };
            let lambda = law.log_z.exp() * n as f64;
            let m = ensemble_moments(&law);
            Ok(AlphanRow {
                n,
                a_n: a,
                value: -lambda * tail.exp() / (a * a),
                markov_bound: m.z * m.mean / (alpha * a * a),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRateRow {
    pub n: usize,
    pub a_n: f64,
    /// `(1/a²) ln P(S = n)`.
    pub value: f64,
}

/// Subcritical `(1/a_n²) ln P(S = n)` along a grid.
pub fn subcritical_hit_trend(c: f64, an: AnRule, n_grid: &[usize]) -> Result<Vec<HitRateRow>> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid("c", format!("needs 0 < c < 1, got {c}")));
    }
    n_grid
        .par_iter()
        .map(|&n| {
            let a = an.eval(n);
            let ens = conditional_ensemble(n, c, auto_theta(c)?)?;
            Ok(HitRateRow { n, a_n: a, value: ens.log_p_hit / (a * a) })
        })
        .collect()
}
