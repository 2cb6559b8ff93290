//! Monte Carlo sampling of `G(n, c/n)` and the variance constants of `C_max`, `t_n(k)` and `C_n`.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::duality::{borel_weights, solve_duality};
use crate::error::{Error, Result};

/// One sample's component profile, stored sparsely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentStats {
    pub n: usize,
    pub cmax: usize,
    pub cn: usize,
    /// `(k, t(k))` for every size `k` present, increasing in `k`.
    pub counts: Vec<(usize, u32)>,
}

impl ComponentStats {
    pub fn t(&self, k: usize) -> u32 {
        self.counts
            .binary_search_by_key(&k, |e| e.0)
            .map_or(0, |i| self.counts[i].1)
    }

    pub fn value(&self, stat: Statistic) -> f64 {
        match stat {
            Statistic::Cmax => self.cmax as f64,
            Statistic::Cn => self.cn as f64,
            Statistic::T(k) => self.t(k) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    Cmax,
    Cn,
    T(usize),
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Cmax => write!(f, "cmax"),
            Statistic::Cn => write!(f, "cn"),
            Statistic::T(k) => write!(f, "t:{k}"),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cmax" => Ok(Statistic::Cmax),
            "cn" => Ok(Statistic::Cn),
            other => {
                let k = other
                    .strip_prefix("t:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| Error::invalid("track", format!("unknown statistic {other:?}")))?;
                Ok(Statistic::T(k))
            }
        }
    }
}

/// Generator for replica `replica` under `seed`: ChaCha8 keyed by the seed, one stream per replica.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Uniform on `(0, 1]` with 53 random bits.
#[inline]
fn uniform_open0<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

fn check_sample_params(n: usize, c: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if n > u32::MAX as usize {
        return Err(Error::CapExceeded { what: "n", value: n, cap: u32::MAX as usize });
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    if c >= n as f64 && n > 1 {
        return Err(Error::invalid("c", format!("c = {c} needs c < n = {n}")));
    }
    Ok(())
}

/// Samples one graph from the given generator.
///
/// Edges are drawn by geometric skipping over the pairs `(v, w)`, `w < v`, in row order.
pub fn sample_with_rng<R: RngCore>(n: usize, c: f64, rng: &mut R) -> Result<ComponentStats> {
    check_sample_params(n, c)?;
    let mut uf = UnionFind::new(n);
    if n > 1 {
        let p = c / n as f64;
        let ln_q = (-p).ln_1p();
        let (mut v, mut w) = (1usize, -1i64);
        let limit = (n as f64) * (n as f64);
        while v < n {
            let skip = (uniform_open0(rng).ln() / ln_q).floor();
            if skip >= limit {
                break;
            }
            w += 1 + skip as i64;
            while w >= v as i64 && v < n {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                uf.union(v as u32, w as u32);
            }
        }
    }
    let mut hist = vec![0u32; n + 1];
    let mut cn = 0;
    for x in 0..n as u32 {
        if uf.find(x) == x {
            hist[uf.size[x as usize] as usize] += 1;
            cn += 1;
        }
    }
    let counts: Vec<(usize, u32)> = hist.iter().enumerate().filter(|e| *e.1 > 0).map(|(k, &t)| (k, t)).collect();
    let cmax = counts.last().map_or(0, |e| e.0);
    let stats = ComponentStats { n, cmax, cn, counts };
    let total: usize = stats.counts.iter().map(|&(k, t)| k * t as usize).sum();
    assert_eq!(total, n, "component sizes must partition the vertex set");
    Ok(stats)
}

pub fn sample_graph_stats(n: usize, c: f64, seed: u64) -> Result<ComponentStats> {
    sample_with_rng(n, c, &mut replica_rng(seed, 0))
}

/// Replicas `0..replicas`, sampled in parallel and returned in replica order.
pub fn run_replicas(n: usize, c: f64, replicas: usize, seed: u64) -> Result<Vec<ComponentStats>> {
    check_sample_params(n, c)?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| sample_with_rng(n, c, &mut replica_rng(seed, r)))
        .collect()
}

/// Streaming mean and centered second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &MomentAccumulator) -> MomentAccumulator {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.count as f64 * other.count as f64) / count as f64;
        MomentAccumulator { count, mean, m2 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn mean_se(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for MomentAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MomentAccumulator::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Leave-one-out jackknife standard error of the sample variance.
pub fn jackknife_variance_se(xs: &[f64]) -> f64 {
    let r = xs.len();
    if r < 3 {
        return f64::NAN;
    }
    let acc: MomentAccumulator = xs.iter().copied().collect();
    let rf = r as f64;
    let loo: MomentAccumulator = xs
        .iter()
        .map(|&x| {
            let m_i = (rf * acc.mean - x) / (rf - 1.0);
            let m2_i = acc.m2 - (x - acc.mean) * (x - m_i);
            m2_i / (rf - 2.0)
        })
        .collect();
    ((rf - 1.0) * (rf - 1.0) / rf * loo.variance()).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatSummary {
    pub stat: Statistic,
    pub mean: f64,
    pub mean_se: f64,
    pub var_over_n: f64,
    pub var_over_n_se: f64,
}

pub fn summarize(samples: &[ComponentStats], stat: Statistic) -> StatSummary {
    let n = samples.first().map_or(1, |s| s.n) as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.value(stat)).collect();
    let acc: MomentAccumulator = xs.iter().copied().collect();
    StatSummary {
        stat,
        mean: acc.mean,
        mean_se: acc.mean_se(),
        var_over_n: acc.variance() / n,
        var_over_n_se: jackknife_variance_se(&xs) / n,
    }
}

/// `|estimate - expected| <= max(10% of expected, 3 standard errors)`.
pub fn consistent(estimate: f64, se: f64, expected: f64) -> bool {
    (estimate - expected).abs() <= (0.1 * expected.abs()).max(3.0 * se)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantCheck {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub expected: f64,
    pub consistent: bool,
}

impl ConstantCheck {
    fn new(name: impl Into<String>, s: &StatSummary, expected: f64) -> Self {
        ConstantCheck {
            name: name.into(),
            estimate: s.var_over_n,
            se: s.var_over_n_se,
            expected,
            consistent: consistent(s.var_over_n, s.var_over_n_se, expected),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmaxVarianceVerdict {
    Printed,
    Alternative,
    Both,
    Neither,
}

/// Measured `Var(C_max)/n` against the two candidate constants
/// `(T/c)(1-T/c)²/(1-T)²` (printed) and `(T/c)(1-T/c)/(1-T)²` (from the rate function).
#[derive(Debug, Clone, PartialEq)]
pub struct CmaxVarianceAdjudication {
    pub estimate: f64,
    pub se: f64,
    pub printed: f64,
    pub alternative: f64,
    pub verdict: CmaxVarianceVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub n: usize,
    pub c: f64,
    pub replicas: usize,
    pub checks: Vec<ConstantCheck>,
    pub cmax_variance: Option<CmaxVarianceAdjudication>,
    /// `(mean of C_n/n, its standard error, (T/c)(1 - T/2))`.
    pub cn_mean: (f64, f64, f64),
}

/// Variance constants: `h(k) + (c-1)k²h(k)²` for `t_n(k)`, `(T/c)(1 - (T/c)(1 - c/2))` for `C_n`.
pub fn clt_expected(c: f64, k: usize) -> Result<(f64, f64)> {
    let pair = solve_duality(c)?;
    let h = borel_weights(c, k.max(1))?.h(k.max(1));
    let kf = k as f64;
    let r = pair.ratio();
    Ok((h + (c - 1.0) * kf * kf * h * h, r * (1.0 - r * (1.0 - c / 2.0))))
}

pub fn cmax_variance_candidates(c: f64) -> Result<(f64, f64)> {
    let pair = solve_duality(c)?;
    let (r, t) = (pair.ratio(), pair.t_dual);
    let alt = r * (1.0 - r) / ((1.0 - t) * (1.0 - t));
    Ok((alt * (1.0 - r), alt))
}

pub fn clt_constants_check(n: usize, c: f64, replicas: usize, seed: u64) -> Result<CltReport> {
    if replicas < 500 {
        return Err(Error::invalid("replicas", format!("needs at least 500, got {replicas}")));
    }
    if c == 1.0 {
        return Err(Error::Unsupported("variance constants at the critical point c = 1".into()));
    }
    let samples = run_replicas(n, c, replicas, seed)?;
    let mut checks = Vec::new();
    for k in 1..=5 {
        let (expected, _) = clt_expected(c, k)?;
        checks.push(ConstantCheck::new(format!("var t:{k}"), &summarize(&samples, Statistic::T(k)), expected));
    }
    let (_, cn_expected) = clt_expected(c, 1)?;
    let cn = summarize(&samples, Statistic::Cn);
    checks.push(ConstantCheck::new("var cn", &cn, cn_expected));

    let cmax_variance = if c > 1.0 {
        let s = summarize(&samples, Statistic::Cmax);
        let (printed, alternative) = cmax_variance_candidates(c)?;
        let a = consistent(s.var_over_n, s.var_over_n_se, printed);
        let b = consistent(s.var_over_n, s.var_over_n_se, alternative);
        let verdict = match (a, b) {
            (true, true) => CmaxVarianceVerdict::Both,
            (true, false) => CmaxVarianceVerdict::Printed,
            (false, true) => CmaxVarianceVerdict::Alternative,
            (false, false) => CmaxVarianceVerdict::Neither,
        };
        Some(CmaxVarianceAdjudication { estimate: s.var_over_n, se: s.var_over_n_se, printed, alternative, verdict })
    } else {
        None
    };
    let pair = solve_duality(c)?;
    let nf = n as f64;
    let cn_mean = (cn.mean / nf, cn.mean_se / nf, pair.ratio() * (1.0 - pair.t_dual / 2.0));
    Ok(CltReport { n, c, replicas, checks, cmax_variance, cn_mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vertex() {
        let s = sample_graph_stats(1, 0.5, 7).unwrap();
        assert_eq!((s.cmax, s.cn, s.t(1)), (1, 1, 1));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(sample_graph_stats(10, 10.0, 1).is_err());
        assert!(sample_graph_stats(0, 0.5, 1).is_err());
        assert!(sample_graph_stats(10, -0.5, 1).is_err());
        assert!("t:0".parse::<Statistic>().is_err());
        assert!("bogus".parse::<Statistic>().is_err());
        assert_eq!("t:3".parse::<Statistic>().unwrap(), Statistic::T(3));
        assert!(clt_constants_check(100, 2.0, 499, 1).is_err());
    }

    #[test]
    fn reproducible_and_stream_separated() {
        let a = sample_graph_stats(5000, 2.0, 42).unwrap();
        let b = sample_graph_stats(5000, 2.0, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_with_rng(5000, 2.0, &mut replica_rng(42, 1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invariants_hold() {
        let xs = run_replicas(2000, 1.5, 20, 3).unwrap();
        for s in &xs {
            let total: usize = s.counts.iter().map(|&(k, t)| k * t as usize).sum();
            assert_eq!(total, 2000);
            assert_eq!(s.cn, s.counts.iter().map(|e| e.1 as usize).sum::<usize>());
            assert_eq!(s.cmax, s.counts.last().unwrap().0);
        }
    }

    #[test]
    fn edge_count_matches_expectation() {
        // C_n = n - (edges) + (cycles); at c = 0.3 cycles are rare, so E[n - C_n] ≈ p C(n,2)
        let n = 20_000;
        let c = 0.3;
        let acc: MomentAccumulator = run_replicas(n, c, 200, 11)
            .unwrap()
            .iter()
            .map(|s| (n - s.cn) as f64)
            .collect();
        let expected = c / n as f64 * (n as f64 * (n as f64 - 1.0) / 2.0);
        assert!((acc.mean - expected).abs() < 4.0 * acc.mean_se() + 1.0, "{} vs {expected}", acc.mean);
    }

    #[test]
    fn triangle_connectivity_frequency() {
        let p: f64 = 1.0 / 3.0;
        let target = 3.0 * p * p - 2.0 * p * p * p;
        let mut rng = replica_rng(2024, 0);
        let trials = 1_000_000;
        let hits = (0..trials).filter(|_| sample_with_rng(3, 1.0, &mut rng).unwrap().cmax == 3).count();
        let freq = hits as f64 / trials as f64;
        let sigma = (target * (1.0 - target) / trials as f64).sqrt();
        assert!((freq - target).abs() <= 3.0 * sigma, "{freq} vs {target}");
    }

    #[test]
    fn accumulator_merge_and_jackknife() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 / 10.0).collect();
        let whole: MomentAccumulator = xs.iter().copied().collect();
        let a: MomentAccumulator = xs[..300].iter().copied().collect();
        let b: MomentAccumulator = xs[300..700].iter().copied().collect();
        let c: MomentAccumulator = xs[700..].iter().copied().collect();
        let left = a.merge(&b).merge(&c);
        let right = a.merge(&b.merge(&c));
        for m in [left, right] {
            assert!((m.mean - whole.mean).abs() < 1e-12 * whole.mean.abs());
            assert!((m.m2 - whole.m2).abs() < 1e-12 * whole.m2);
        }
        assert_eq!(MomentAccumulator::new().merge(&a), a);
        // brute-force leave-one-out
        let r = xs.len() as f64;
        let loo: Vec<f64> = (0..xs.len())
            .map(|i| {
                let rest: MomentAccumulator =
                    xs.iter().enumerate().filter(|e| e.0 != i).map(|e| *e.1).collect();
                rest.variance()
            })
            .collect();
        let mbar = loo.iter().sum::<f64>() / r;
        let se = ((r - 1.0) / r * loo.iter().map(|v| (v - mbar).powi(2)).sum::<f64>()).sqrt();
        assert!((jackknife_variance_se(&xs) - se).abs() < 1e-9 * se);
    }

    #[test]
    fn candidate_constants_at_two() {
        let (a, b) = cmax_variance_candidates(2.0).unwrap();
        assert!((a - 0.3662).abs() < 1e-3 && (b - 0.4595).abs() < 1e-3);
        let (count_var, cn_var) = clt_expected(0.5, 1).unwrap();
        let h1 = (-0.5f64).exp();
        assert!((count_var - (h1 - 0.5 * h1 * h1)).abs() < 1e-15);
        assert!((cn_var - 0.25).abs() < 1e-15);
        let (_, cn_var) = clt_expected(2.0, 1).unwrap();
        assert!((cn_var - solve_duality(2.0).unwrap().t_dual / 2.0).abs() < 1e-15);
    }
}
