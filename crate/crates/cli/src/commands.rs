use std::str::FromStr;

use serde_json::{Map, Value};

use gelation::connectivity::{mu_for_graph, rational_to_f64, sandwich_bounds};
use gelation::duality::solve_duality;
use gelation::ensemble::{ensemble_moments, jump_law};
use gelation::exactgraph::{brute_force_law, law_by_partitions, log_prob_cmax_le, PARTITION_CAP};
use gelation::mdpcheck::{conditional_mdp_scan, ScanSpec};
use gelation::panjer::{
    auto_theta, hit_log_closed_form, conditional_count_pmf, conditional_ensemble, conditional_max_pmf,
    conditional_n_pmf, hit_ratio_closed_form, knbeta_from_ensemble,
};
use gelation::rates::{empirical_rates, grand_rates, ldp_rate, ldp_thresholds, mdp_rate, QuadraticRate, RateName};
use gelation::simulate::{run_replicas, summarize};

use crate::output::{json_float, Body, Cell, Format, Meta, Table};
use crate::Command;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gelation::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Out = Result<(Meta, Body, Format), CliError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaArg {
    Auto,
    Value(f64),
}

impl ThetaArg {
    fn resolve(self, c: f64) -> Result<f64, CliError> {
        match self {
            ThetaArg::Auto => Ok(auto_theta(c)?),
            ThetaArg::Value(t) => Ok(t),
        }
    }
}

impl FromStr for ThetaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(ThetaArg::Auto);
        }
        s.parse::<f64>().map(ThetaArg::Value).map_err(|_| format!("expected a number or auto, got {s:?}"))
    }
}

fn f(x: f64) -> Value {
    json_float(x)
}

fn object(pairs: Vec<(&str, Value)>) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn parse_arg<T: FromStr>(what: &str, raw: &str) -> Result<T, CliError> {
    raw.parse::<T>().map_err(|_| CliError::Usage(format!("bad value {raw:?} in --what {what}")))
}

pub fn dispatch(cmd: &Command) -> Out {
    let config = format!("{cmd:?}");
    let meta = |command: &'static str, seed: Option<u64>| Meta { command, config: config.clone(), seed };
    match cmd {
        Command::Duality { c } => {
            let p = solve_duality(*c)?;
            let body = object(vec![
                ("c", f(p.c)),
                ("T", f(p.t_dual)),
                ("t", f(p.ratio())),
                ("giant_fraction", f(p.giant_fraction())),
                ("residual", f(p.residual())),
            ]);
            Ok((meta("duality", None), Body::Object(body), Format::Json))
        }
        Command::Mu { c, n, k_max, exact_rational } => {
            let mut table = mu_for_graph(*c, *n, *k_max)?;
            let mut cols = vec!["k", "log_mu", "bound_low", "bound_high"];
            if *exact_rational {
                table = table.with_exact_rationals()?;
                cols.extend(["log_mu_rational", "mu_rational"]);
            }
            let mut t = Table::new(&cols);
            for k in 1..=*k_max {
                let (lo, hi) = sandwich_bounds(*c, *n, k);
                let mut row = vec![Cell::from(k), table.log_mu(k).into(), lo.into(), hi.into()];
                if let Some(exact) = table.exact() {
                    let q = &exact[k - 1];
                    row.push(rational_to_f64(q).ln().into());
                    row.push(q.to_string().into());
                }
                t.push(row);
            }
            Ok((meta("mu", None), Body::Table(t), Format::Csv))
        }
        Command::Jumplaw { n, c, theta } => {
            let theta = theta.resolve(*c)?;
            let law = jump_law(*n, *c, theta)?;
            let m = ensemble_moments(&law);
            let head: Vec<Value> = (1..=law.max_jump().min(20))
                .map(|k| Value::Object(object(vec![("k", k.into()), ("p", f(law.p(k))), ("log_p", f(law.logp(k)))])))
                .collect();
            let body = object(vec![
                ("n", (*n).into()),
                ("c", f(*c)),
                ("theta", f(theta)),
                ("max_jump", law.max_jump().into()),
                ("logZ", f(law.log_z)),
                (
                    "moments",
                    Value::Object(object(vec![
                        ("z", f(m.z)),
                        ("mean", f(m.mean)),
                        ("second", f(m.second)),
                        ("variance", f(m.variance)),
                    ])),
                ),
                ("head", Value::Array(head)),
            ]);
            Ok((meta("jumplaw", None), Body::Object(body), Format::Json))
        }
        Command::Panjer { n, c, theta, what, an } => panjer(meta("panjer", None), *n, *c, *theta, what, *an),
        Command::Exact { n, c, brute_force } => {
            let law = if *brute_force { brute_force_law(*n, *c)? } else { law_by_partitions(*n, *c)? };
            let mut t = Table::new(&["partition", "log_prob"]);
            for (profile, lp) in &law.entries {
                t.push(vec![profile.signature().into(), (*lp).into()]);
            }
            Ok((meta("exact", None), Body::Table(t), Format::Csv))
        }
        Command::Simulate { n, c, replicas, seed, track, summary } => {
            if track.is_empty() {
                return Err(CliError::Usage("--track needs at least one statistic".into()));
            }
            let samples = run_replicas(*n, *c, *replicas, *seed)?;
            let t = if *summary {
                let mut t = Table::new(&["stat", "mean", "mean_se", "var_over_n", "var_over_n_se"]);
                for &stat in track {
                    let s = summarize(&samples, stat);
                    t.push(vec![stat.to_string().into(), s.mean.into(), s.mean_se.into(), s.var_over_n.into(), s.var_over_n_se.into()]);
                }
                t
            } else {
                let names: Vec<String> = track.iter().map(|s| s.to_string()).collect();
                let mut cols = vec!["replica"];
                cols.extend(names.iter().map(String::as_str));
                let mut t = Table::new(&cols);
                for (i, s) in samples.iter().enumerate() {
                    let mut row = vec![Cell::from(i)];
                    row.extend(track.iter().map(|&st| Cell::Int(s.value(st) as i64)));
                    t.push(row);
                }
                t
            };
            Ok((meta("simulate", Some(*seed)), Body::Table(t), Format::Csv))
        }
        Command::Rates { c, what, k_max, theta } => rates(meta("rates", None), *c, what, *k_max, *theta),
        Command::MdpScan { c, stat, beta, n, an, delta } => {
            let spec = ScanSpec { c: *c, n_grid: n.clone(), an: *an, statistic: *stat, betas: beta.clone(), delta: *delta };
            let rows = conditional_mdp_scan(&spec)?;
            let mut t =
                Table::new(&["n", "beta", "a_n", "lo", "hi", "log_prob", "scaled", "rate_at_beta", "rate_ball"]);
            for r in rows {
                t.push(vec![
                    r.n.into(),
                    r.beta.into(),
                    r.a_n.into(),
                    r.lo.into(),
                    r.hi.into(),
                    r.log_prob.into(),
                    r.scaled.into(),
                    r.rate_at_beta.into(),
                    r.rate_ball.into(),
                ]);
            }
            Ok((meta("mdp-scan", None), Body::Table(t), Format::Csv))
        }
    }
}

fn log_pmf_table(col: &str, values: &[f64], from: usize) -> Table {
    let mut t = Table::new(&[col, "log_prob"]);
    for (i, &lp) in values.iter().enumerate().skip(from) {
        t.push(vec![i.into(), lp.into()]);
    }
    t
}

fn panjer(meta: Meta, n: usize, c: f64, theta: ThetaArg, what: &str, an: gelation::mdpcheck::AnRule) -> Out {
    let (kind, arg) = match what.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (what, None),
    };
    let need = || arg.ok_or_else(|| CliError::Usage(format!("--what {kind} needs an argument")));
    // the fra identity is stated for θ = 1
    let theta = if kind == "fra" { 1.0 } else { theta.resolve(c)? };
    let ens = conditional_ensemble(n, c, theta)?;
    let t = match kind {
        "hit" => {
            let rhs = hit_log_closed_form(n, c, ens.law().log_z);
            let m = ens.law().max_jump();
            let cmax_le = if m >= n {
                0.0
            } else if n <= PARTITION_CAP {
                log_prob_cmax_le(n, c, m)?
            } else {
                f64::NAN
            };
            let mut t = Table::new(&["n", "c", "theta", "log_p_hit", "log_closed_form", "log_p_cmax_le", "residual"]);
            let residual = (ens.log_p_hit - rhs - cmax_le).abs();
            t.push(vec![n.into(), c.into(), theta.into(), ens.log_p_hit.into(), rhs.into(), cmax_le.into(), residual.into()]);
            t
        }
        "max" => log_pmf_table("k", &conditional_max_pmf(&ens), 1),
        "count" => {
            let k: usize = parse_arg(what, need()?)?;
            log_pmf_table("j", &conditional_count_pmf(&ens, k)?, 0)
        }
        "N" => log_pmf_table("j", &conditional_n_pmf(&ens)?, 0),
        "fra" => {
            let m: usize = parse_arg(what, need()?)?;
            if m > n {
                return Err(gelation::Error::invalid("m", format!("m = {m} exceeds n = {n}")).into());
            }
            let lhs = ens.table.logpmf(m) - ens.log_p_hit;
            let rhs = hit_ratio_closed_form(n, m, c);
            let mut t = Table::new(&["n", "m", "log_ratio", "log_closed_form", "residual"]);
            t.push(vec![n.into(), m.into(), lhs.into(), rhs.into(), (lhs - rhs).abs().into()]);
            t
        }
        "knbeta" => {
            let beta: f64 = parse_arg(what, need()?)?;
            let a = an.eval(n);
            let r = knbeta_from_ensemble(&ens, beta, a)?;
            let mut t = Table::new(&["n", "beta", "a_n", "k", "value", "limit"]);
            t.push(vec![n.into(), beta.into(), a.into(), r.k.into(), r.value.into(), r.limit.into()]);
            t
        }
        _ => return Err(CliError::Usage(format!("unknown --what {what:?}"))),
    };
    Ok((meta, Body::Table(t), Format::Csv))
}

fn rate_json(r: &QuadraticRate<f64>) -> Value {
    let mut m = object(vec![("name", r.name.as_str().into())]);
    if let Some(k) = r.k {
        m.insert("k".into(), k.into());
    }
    m.insert("kappa".into(), f(r.kappa));
    m.insert("variance".into(), f(r.variance()));
    if let Some(rf) = r.reciprocal_form {
        m.insert("reciprocal_form".into(), f(rf));
    }
    Value::Object(m)
}

fn rates(meta: Meta, c: f64, what: &str, k_max: usize, theta: ThetaArg) -> Out {
    let (kind, arg) = match what.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (what, None),
    };
    let need = || arg.ok_or_else(|| CliError::Usage(format!("--what {kind} needs an argument")));
    let mut body = object(vec![("c", f(c))]);
    match kind {
        "mdp" => {
            let mut list = Vec::new();
            for name in [RateName::IMax, RateName::JTotal, RateName::RandomSum, RateName::FixedCount] {
                // I_max only exists above criticality
                match mdp_rate(name, c, None) {
                    Ok(r) => list.push(rate_json(&r)),
                    Err(e) if e.is_validation() => {}
                    Err(e) => return Err(e.into()),
                }
            }
            for k in 1..=k_max {
                list.push(rate_json(&mdp_rate(RateName::IotaK, c, Some(k))?));
            }
            body.insert("rates".into(), Value::Array(list));
        }
        "grand" => {
            let theta = theta.resolve(c)?;
            let g = grand_rates(c, theta, None)?;
            body.insert("theta".into(), f(theta));
            body.insert("sum".into(), rate_json(&g.sum));
            body.insert("fixed".into(), rate_json(&g.fixed));
            let excl = (1..=k_max)
                .map(|k| Ok(rate_json(&grand_rates(c, theta, Some(k))?.excl_k.expect("k given"))))
                .collect::<Result<Vec<_>, CliError>>()?;
            body.insert("excl_k".into(), Value::Array(excl));
        }
        "ldp" => {
            let x: f64 = parse_arg(what, need()?)?;
            body.insert("x".into(), f(x));
            body.insert("rate".into(), f(ldp_rate(c, x)?));
        }
        "thresholds" => {
            let k: usize = parse_arg(what, need()?)?;
            let xs = ldp_thresholds(c, k)?;
            let list = xs
                .iter()
                .enumerate()
                .map(|(k, &x)| Value::Object(object(vec![("k", k.into()), ("x_k", f(x))])))
                .collect();
            body.insert("thresholds".into(), Value::Array(list));
        }
        "empirical" => {
            let path = need()?;
            let text = std::fs::read_to_string(path)?;
            let sigma = text
                .split(|ch: char| ch == ',' || ch.is_whitespace())
                .filter(|s| !s.is_empty() && !s.starts_with('#'))
                .map(|s| s.parse::<f64>().map_err(|_| CliError::Usage(format!("bad number {s:?} in {path}"))))
                .collect::<Result<Vec<f64>, _>>()?;
            let r = empirical_rates(&sigma, c)?;
            body.insert("len".into(), sigma.len().into());
            body.insert("lambda".into(), f(r.lambda));
            body.insert("H".into(), f(r.h));
            body.insert("I_Mi".into(), f(r.i_mi));
        }
        _ => return Err(CliError::Usage(format!("unknown --what {what:?}"))),
    }
    Ok((meta, Body::Object(body), Format::Json))
}
