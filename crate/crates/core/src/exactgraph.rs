//! Exact laws of the component profile of `G(n, c/n)` for small `n`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::connectivity::{mu_complement_rational, mu_for_graph};
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp_iter;
use crate::scalar::{from_usize, CompensatedSum, LogFactorials, Scalar};

pub const PARTITION_CAP: usize = 40;
pub const BRUTE_FORCE_CAP: usize = 6;
pub const RATIONAL_LAW_CAP: usize = 10;

/// Component-size profile: `gamma[k-1]` components of size `k`, with `Σ k γ_k = n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionProfile {
    gamma: Vec<u32>,
}

impl PartitionProfile {
    pub fn from_gamma(gamma: Vec<u32>) -> Self {
        PartitionProfile { gamma }
    }

    /// Builds the profile of a list of component sizes.
    pub fn from_sizes(n: usize, sizes: &[usize]) -> Result<Self> {
        let mut gamma = vec![0u32; n];
        let mut total = 0;
        for &s in sizes {
            if s == 0 || s > n {
                return Err(Error::invalid("sizes", format!("part {s} outside 1..={n}")));
            }
            gamma[s - 1] += 1;
            total += s;
        }
        if total != n {
            return Err(Error::invalid("sizes", format!("parts sum to {total}, not {n}")));
        }
        Ok(PartitionProfile { gamma })
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// `γ_k`; zero outside `1..=n`.
    pub fn gamma(&self, k: usize) -> u32 {
        if k == 0 || k > self.gamma.len() {
            0
        } else {
            self.gamma[k - 1]
        }
    }

    pub fn gammas(&self) -> &[u32] {
        &self.gamma
    }

    pub fn max_part(&self) -> usize {
        self.gamma.iter().rposition(|&g| g > 0).map_or(0, |i| i + 1)
    }

    pub fn num_parts(&self) -> usize {
        self.gamma.iter().map(|&g| g as usize).sum()
    }

    /// `Σ γ_k k²`.
    pub fn sum_squares(&self) -> usize {
        self.gamma.iter().enumerate().map(|(i, &g)| g as usize * (i + 1) * (i + 1)).sum()
    }

    /// Parts in decreasing order joined by `+`, e.g. `3+1+1`.
    pub fn signature(&self) -> String {
        let mut parts = Vec::with_capacity(self.num_parts());
        for k in (1..=self.gamma.len()).rev() {
            for _ in 0..self.gamma(k) {
                parts.push(k.to_string());
            }
        }
        parts.join("+")
    }
}

/// All partitions of `n`, colexicographic in `γ` (compare `γ_n` first, then `γ_{n-1}`, ...).
pub fn partitions(n: usize) -> Vec<PartitionProfile> {
    fn rec(k: usize, rem: usize, gamma: &mut Vec<u32>, out: &mut Vec<PartitionProfile>) {
        if k == 1 {
            gamma[0] = rem as u32;
            out.push(PartitionProfile { gamma: gamma.clone() });
            gamma[0] = 0;
            return;
        }
        for g in 0..=rem / k {
            gamma[k - 1] = g as u32;
            rec(k - 1, rem - g * k, gamma, out);
        }
        gamma[k - 1] = 0;
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut gamma = vec![0u32; n];
    rec(n, n, &mut gamma, &mut out);
    out
}

#[derive(Debug, Clone)]
pub struct ExactLaw<S> {
    pub n: usize,
    pub entries: Vec<(PartitionProfile, S)>,
}

impl<S: Scalar> ExactLaw<S> {
    pub fn log_total_mass(&self) -> S {
        log_sum_exp_iter(self.entries.iter().map(|e| e.1))
    }

    pub fn total_mass(&self) -> S {
        self.entries.iter().map(|e| e.1.exp()).collect::<CompensatedSum<S>>().value()
    }

    pub fn log_prob(&self, profile: &PartitionProfile) -> S {
        self.entries
            .iter()
            .find(|e| &e.0 == profile)
            .map_or(S::neg_infinity(), |e| e.1)
    }

    /// Restriction to `C_max <= m`, renormalized; also returns the log of the removed-complement mass.
    pub fn restrict_cmax(&self, m: usize) -> (ExactLaw<S>, S) {
        let kept: Vec<_> = self.entries.iter().filter(|e| e.0.max_part() <= m).cloned().collect();
        let log_mass = log_sum_exp_iter(kept.iter().map(|e| e.1));
        let entries = kept.into_iter().map(|(p, l)| (p, l - log_mass)).collect();
        (ExactLaw { n: self.n, entries }, log_mass)
    }

    /// Total variation distance to another law on the same `n` (profiles missing on one side count as zero).
    pub fn total_variation(&self, other: &ExactLaw<S>) -> S {
        let mut map: HashMap<&PartitionProfile, (S, S)> = HashMap::new();
        for (p, l) in &self.entries {
            map.entry(p).or_insert((S::zero(), S::zero())).0 = l.exp();
        }
        for (p, l) in &other.entries {
            map.entry(p).or_insert((S::zero(), S::zero())).1 = l.exp();
        }
        let mut keys: Vec<_> = map.keys().copied().collect();
        keys.sort();
        let mut acc = CompensatedSum::new();
        for k in keys {
            let (a, b) = map[k];
            acc.add((a - b).abs());
        }
        acc.value() / (S::one() + S::one())
    }
}

fn check_small_graph<S: Scalar>(n: usize, c: S, cap: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if n > cap {
        return Err(Error::CapExceeded { what: "n", value: n, cap });
    }
    if !(c > S::zero()) || !c.is_finite() {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    if n >= 2 && c >= from_usize(n) {
        return Err(Error::invalid("c", format!("c = {c} needs c < n = {n} so that c/n is a probability")));
    }
    Ok(())
}

/// `P(γ) = n! Π_k (1/γ_k!) (μ_k/k!)^{γ_k} (1-c/n)^{(n² - Σ γ_k k²)/2}` for every partition of `n`.
pub fn law_by_partitions<S: Scalar>(n: usize, c: S) -> Result<ExactLaw<S>> {
    check_small_graph(n, c, PARTITION_CAP)?;
    if n == 1 {
        return Ok(ExactLaw { n, entries: vec![(PartitionProfile { gamma: vec![1] }, S::zero())] });
    }
    let mu = mu_for_graph(c, n, n)?;
    let lf = LogFactorials::<S>::new(n);
    let ln_q = (-(c / from_usize::<S>(n))).ln_1p();
    let per_part: Vec<S> = (1..=n).map(|k| mu.log_mu(k) - lf.ln_factorial(k)).collect();
    let entries = partitions(n)
        .into_iter()
        .map(|p| {
            let mut l = lf.ln_factorial(n);
            for k in 1..=n {
                let g = p.gamma(k) as usize;
                if g > 0 {
                    l = l - lf.ln_factorial(g) + from_usize::<S>(g) * per_part[k - 1];
                }
            }
            let exponent = (n * n - p.sum_squares()) / 2;
            l = l + from_usize::<S>(exponent) * ln_q;
            (p, l)
        })
        .collect();
    Ok(ExactLaw { n, entries })
}

/// The partition formula in exact rationals for a rational edge probability `p` (`n <= 10`).
pub fn law_by_partitions_exact(n: usize, p: &BigRational) -> Result<Vec<(PartitionProfile, BigRational)>> {
    if n == 0 || n > RATIONAL_LAW_CAP {
        return Err(Error::CapExceeded { what: "n (exact law)", value: n, cap: RATIONAL_LAW_CAP });
    }
    if !(p > &BigRational::zero() && p <= &BigRational::one()) {
        return Err(Error::invalid("p", "must lie in (0, 1]"));
    }
    let mu = mu_complement_rational(p, n);
    let q = BigRational::one() - p;
    let fact = |k: usize| -> BigInt { (1..=k).fold(BigInt::one(), |a, i| a * BigInt::from(i)) };
    let n_fact = BigRational::from_integer(fact(n));
    Ok(partitions(n)
        .into_iter()
        .map(|prof| {
            let mut v = n_fact.clone();
            for k in 1..=n {
                let g = prof.gamma(k) as usize;
                if g > 0 {
                    let base = &mu[k - 1] / BigRational::from_integer(fact(k));
                    v = v * num_traits::pow::pow(base, g) / BigRational::from_integer(fact(g));
                }
            }
            let exponent = (n * n - prof.sum_squares()) / 2;
            v *= num_traits::pow::pow(q.clone(), exponent);
            (prof, v)
        })
        .collect())
}

/// Direct enumeration of all labeled graphs on `n <= 6` vertices.
pub fn brute_force_law<S: Scalar>(n: usize, c: S) -> Result<ExactLaw<S>> {
    check_small_graph(n, c, BRUTE_FORCE_CAP)?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let m = pairs.len();
    let p = if n >= 2 { c / from_usize::<S>(n) } else { S::zero() };
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let mut acc: HashMap<PartitionProfile, CompensatedSum<S>> = HashMap::new();
    let mut parent = vec![0usize; n];
    for mask in 0u64..(1u64 << m) {
        for (i, v) in parent.iter_mut().enumerate() {
            *v = i;
        }
        for (e, &(a, b)) in pairs.iter().enumerate() {
            if mask >> e & 1 == 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
        let mut sizes = vec![0usize; n];
        for v in 0..n {
            let r = find(&mut parent, v);
            sizes[r] += 1;
        }
        let comps: Vec<usize> = sizes.into_iter().filter(|&s| s > 0).collect();
        let profile = PartitionProfile::from_sizes(n, &comps)?;
        let edges = mask.count_ones() as usize;
        let w = if m == 0 {
            S::one()
        } else {
            (from_usize::<S>(edges) * ln_p + from_usize::<S>(m - edges) * ln_q).exp()
        };
        acc.entry(profile).or_default().add(w);
    }
    let mut entries: Vec<(PartitionProfile, S)> = acc.into_iter().map(|(p, s)| (p, s.value().ln())).collect();
    entries.sort_by(|a, b| colex_cmp(&a.0, &b.0));
    Ok(ExactLaw { n, entries })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn colex_cmp(a: &PartitionProfile, b: &PartitionProfile) -> std::cmp::Ordering {
    a.gamma.iter().rev().cmp(b.gamma.iter().rev())
}

/// Marginal laws (linear probabilities) of `C_max`, `C_n` and each `t_n(k)`.
#[derive(Debug, Clone)]
pub struct DerivedLaws<S> {
    /// `cmax[m] = P(C_max = m)`, `m = 0..=n`.
    pub cmax: Vec<S>,
    /// `cn[l] = P(C_n = l)`, `l = 0..=n`.
    pub cn: Vec<S>,
    /// `tnk[k-1][j] = P(t_n(k) = j)`, `j = 0..=n/k`.
    pub tnk: Vec<Vec<S>>,
}

fn pmf_mean<S: Scalar>(pmf: &[S]) -> S {
    pmf.iter().enumerate().map(|(i, &p)| from_usize::<S>(i) * p).collect::<CompensatedSum<S>>().value()
}

impl<S: Scalar> DerivedLaws<S> {
    pub fn mean_cmax(&self) -> S {
        pmf_mean(&self.cmax)
    }

    pub fn mean_cn(&self) -> S {
        pmf_mean(&self.cn)
    }

    pub fn mean_tnk(&self, k: usize) -> S {
        pmf_mean(&self.tnk[k - 1])
    }
}

pub fn derived_laws<S: Scalar>(law: &ExactLaw<S>) -> DerivedLaws<S> {
    let n = law.n;
    let mut cmax = vec![CompensatedSum::new(); n + 1];
    let mut cn = vec![CompensatedSum::new(); n + 1];
    let mut tnk: Vec<Vec<CompensatedSum<S>>> = (1..=n).map(|k| vec![CompensatedSum::new(); n / k + 1]).collect();
    for (p, l) in &law.entries {
        let w = l.exp();
        cmax[p.max_part()].add(w);
        cn[p.num_parts()].add(w);
        for k in 1..=n {
            tnk[k - 1][p.gamma(k) as usize].add(w);
        }
    }
    let fin = |v: Vec<CompensatedSum<S>>| v.into_iter().map(|s| s.value()).collect::<Vec<S>>();
    DerivedLaws { cmax: fin(cmax), cn: fin(cn), tnk: tnk.into_iter().map(fin).collect() }
}

/// `ln P(C_max <= m)` for `G(n, c/n)` via the partition formula.
pub fn log_prob_cmax_le<S: Scalar>(n: usize, c: S, m: usize) -> Result<S> {
    let law = law_by_partitions(n, c)?;
    Ok(law.restrict_cmax(m).1)
}
