//! Experiment drivers and their machine-readable reports.
//!
//! Every experiment is a pure function of its [`ExperimentSpec`]: trial `t`
//! runs on the configuration seeded by `derive(seed, t)`, trials are
//! evaluated in parallel but collected in trial order, and all reductions
//! run sequentially, so reruns produce identical bytes.

use crate::entropy;
use crate::error::{check_dim, Error, Result};
use crate::estimator::{self, constants};
use crate::lattice::{PercolatedHypercube, Side};
use crate::oracle;
use crate::rng::derive;
use crate::sampler;
use crate::stats;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Moments,
    Clt,
    Approx,
    Thresholds,
    Tv,
    Count,
    Estimate,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn one_or_many<'de, D, T>(de: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

fn default_trials() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: Kind,
    #[serde(deserialize_with = "one_or_many")]
    pub d: Vec<u32>,
    #[serde(deserialize_with = "one_or_many")]
    pub p: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default)]
    pub emit_sets: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(kind: Kind, d: u32, p: f64, trials: u64, seed: u64) -> Self {
        Self {
            kind,
            d: vec![d],
            p: vec![p],
            trials,
            seed,
            method: None,
            side: None,
            emit_sets: false,
            out: None,
            format: Format::Json,
            threads: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn grid(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.d.iter().flat_map(move |&d| self.p.iter().map(move |&p| (d, p)))
    }
}

/// Seed of the configuration used by trial `t`.
pub fn trial_seed(master: u64, t: u64) -> u64 {
    derive(master, t)
}

/// Rows, a closing summary, and the verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<Value>,
    pub summary: Value,
    pub pass: bool,
}

impl Report {
    fn merge(parts: Vec<Report>) -> Report {
        if parts.len() == 1 {
            return parts.into_iter().next().unwrap();
        }
        let pass = parts.iter().all(|r| r.pass);
        let mut rows = Vec::new();
        let mut summaries = Vec::new();
        for r in parts {
            rows.extend(r.rows);
            summaries.push(r.summary);
        }
        Report {
            rows,
            summary: json!({ "summary": summaries, "pass": pass }),
            pass,
        }
    }

    /// One JSON object per line, rows first, then the summary unless it is null.
    pub fn write_jsonl(&self, w: &mut dyn Write) -> Result<()> {
        for r in &self.rows {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        if !self.summary.is_null() {
            writeln!(w, "{}", serde_json::to_string(&self.summary)?)?;
        }
        Ok(())
    }

    /// Rows as CSV. The header is the union of row keys in first-seen order
    /// (keys within a row come sorted); nested values are written as JSON text.
    pub fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        let mut header: Vec<String> = Vec::new();
        for r in &self.rows {
            if let Value::Object(m) = r {
                for k in m.keys() {
                    if !header.contains(k) {
                        header.push(k.clone());
                    }
                }
            }
        }
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Contract(format!("csv: {e}"));
        out.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let cells: Vec<String> = header
                .iter()
                .map(|k| match r.get(k) {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                })
                .collect();
            out.write_record(&cells).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write(&self, format: Format, w: &mut dyn Write) -> Result<()> {
        match format {
            Format::Json => self.write_jsonl(w),
            Format::Csv => self.write_csv(w),
        }
    }
}

fn regime(p: f64) -> Value {
    let m: Map<String, Value> = entropy::regime_flags(p).into_iter().map(|(k, v)| (k, Value::Bool(v))).collect();
    Value::Object(m)
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("p={p} outside [0,1]")))
    }
}

fn check_trials(trials: u64, min: u64) -> Result<()> {
    if trials < min {
        return Err(Error::Contract(format!("needs at least {min} trials, got {trials}")));
    }
    Ok(())
}

/// Mean, standard error and `z` against `target`; a zero standard error
/// counts as `z = 0` when the mean is the target up to rounding.
fn z_row(name: &str, xs: &[f64], target: f64) -> Value {
    let mean = stats::mean(xs);
    let se = if xs.len() > 1 { stats::std_error(xs) } else { 0.0 };
    let diff = mean - target;
    let z = if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-9 * target.abs().max(1.0) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    json!({
        "statistic": name,
        "mean": mean,
        "se": se,
        "target": target,
        "z": z,
        "pass": z.abs() <= 4.0,
    })
}

fn per_trial<T: Send>(d: u32, p: f64, spec_seed: u64, trials: u64, f: impl Fn(&PercolatedHypercube) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..trials)
        .into_par_iter()
        .map(|t| f(&PercolatedHypercube::build(d, p, trial_seed(spec_seed, t))?))
        .collect()
}

/// Monte Carlo means of the singleton and dimer sums of the even side
/// against their closed forms, plus the variance of `Φ_log` against `σ²`.
pub fn run_moment_experiment(spec: &ExperimentSpec) -> Result<Report> {
    let parts = spec
        .grid()
        .map(|(d, p)| moment_experiment(d, p, spec.trials, spec.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::merge(parts))
}

fn moment_experiment(d: u32, p: f64, trials: u64, seed: u64) -> Result<Report> {
    check_dim("run_moment_experiment", d, 2, 16)?;
    check_p(p)?;
    check_trials(trials, 2)?;
    let c = constants(d, p)?;
    let sides = per_trial(d, p, seed, trials, |h| estimator::psi(h, Side::Even))?;
    let col = |f: fn(&estimator::SidePsi) -> f64| sides.iter().map(f).collect::<Vec<f64>>();
    let phi_log = col(|s| s.phi_log);
    let delta = col(|s| s.delta);

    let mut rows = vec![
        z_row("phi1", &col(|s| s.phi1), c.mu1_k[0]),
        z_row("phi2", &col(|s| s.phi2), c.mu1_k[1]),
        z_row("phi_log", &phi_log, c.phi_log_mean),
        z_row("delta_tilde", &col(|s| s.delta_tilde), c.mu2_tilde),
        z_row("delta", &delta, c.mu2_half),
        z_row("delta_exact_mean", &delta, c.mu2),
    ];
    let var = stats::variance(&phi_log);
    let ratio = var / c.sigma2;
    rows.push(json!({
        "statistic": "phi_log_variance",
        "mean": var,
        "target": c.sigma2,
        "ratio": ratio,
        "exact": c.phi_log_variance,
        "pass": (ratio - 1.0).abs() <= 0.10,
    }));
    for r in rows.iter_mut() {
        r["d"] = json!(d);
        r["p"] = json!(p);
    }
    let pass = rows.iter().all(|r| r["pass"] == json!(true));
    let summary = json!({
        "kind": "moments",
        "d": d,
        "p": p,
        "trials": trials,
        "seed": seed,
        "pass": pass,
        "regime": regime(p),
    });
    Ok(Report { rows, summary, pass })
}

/// Joint law of the normalised estimators `((Ψ^Even - μ)/σ, (Ψ^Odd - μ)/σ)`.
pub fn run_clt_experiment(spec: &ExperimentSpec) -> Result<Report> {
    let parts = spec
        .grid()
        .map(|(d, p)| clt_experiment(d, p, spec.trials, spec.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::merge(parts))
}

fn clt_experiment(d: u32, p: f64, trials: u64, seed: u64) -> Result<Report> {
    check_dim("run_clt_experiment", d, 12, 20)?;
    check_p(p)?;
    check_trials(trials, 1000)?;
    if p == 0.0 || p == 1.0 {
        return Err(Error::Regime(format!(
            "p={p}: the estimator is deterministic and has no fluctuations to normalise"
        )));
    }
    let c = constants(d, p)?;
    let sigma = c.sigma2.sqrt();
    let pairs = per_trial(d, p, seed, trials, |h| {
        let (e, o) = estimator::psi_both(h)?;
        Ok((e.psi, o.psi))
    })?;
    let even: Vec<f64> = pairs.iter().map(|x| (x.0 - c.mu) / sigma).collect();
    let odd: Vec<f64> = pairs.iter().map(|x| (x.1 - c.mu) / sigma).collect();
    let margin = |name: &str, xs: &[f64]| {
        json!({
            "margin": name,
            "d": d,
            "p": p,
            "mean": stats::mean(xs),
            "variance": stats::variance(xs),
            "skewness": stats::skewness(xs),
            "excess_kurtosis": stats::excess_kurtosis(xs),
            "ks": stats::ks_standard_normal(xs),
        })
    };
    let rows = vec![margin("even", &even), margin("odd", &odd)];
    let ks_even = rows[0]["ks"].as_f64().unwrap_or(f64::NAN);
    let ks_odd = rows[1]["ks"].as_f64().unwrap_or(f64::NAN);
    let corr = stats::correlation(&even, &odd);
    let pass = ks_even <= 0.10 && ks_odd <= 0.10 && corr.abs() <= 0.10;
    let half_shift = (c.mu2_half - c.mu2) / sigma;
    let summary = json!({
        "kind": "clt",
        "d": d,
        "p": p,
        "trials": trials,
        "seed": seed,
        "mu": c.mu,
        "sigma": sigma,
        "mu_half_convention_shift": half_shift,
        "phi_log_correlation_exact": c.phi_log_covariance / c.phi_log_variance,
        "ks_even": ks_even,
        "ks_odd": ks_odd,
        "correlation": corr,
        "pass": pass,
        "regime": regime(p),
    });
    Ok(Report { rows, summary, pass })
}

/// `log2 î` against `log2 i` on shared seeds, median gap per `(p, d)`.
pub fn run_approx_experiment(spec: &ExperimentSpec) -> Result<Report> {
    check_trials(spec.trials, 1)?;
    let mut ds = spec.d.clone();
    ds.sort_unstable();
    ds.dedup();
    for &d in &ds {
        check_dim("run_approx_experiment", d, 3, 6)?;
    }
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    let mut pass = true;
    for &p in &spec.p {
        check_p(p)?;
        let mut prev = f64::INFINITY;
        for &d in &ds {
            let gaps: Vec<(u64, f64, f64)> = (0..spec.trials)
                .map(|t| {
                    let seed = trial_seed(spec.seed, t);
                    let h = PercolatedHypercube::build(d, p, seed)?;
                    Ok((seed, oracle::count_evensum(&h)?.log2(), estimator::estimate_log2_count(&h)?))
                })
                .collect::<Result<_>>()?;
            let mut abs: Vec<f64> = Vec::with_capacity(gaps.len());
            for &(seed, exact, est) in &gaps {
                rows.push(json!({
                    "d": d, "p": p, "seed": seed,
                    "log2_exact": exact, "log2_estimate": est, "gap": est - exact,
                }));
                abs.push((est - exact).abs());
            }
            let median = median(&mut abs);
            let step_ok = if p == 0.0 {
                abs.iter().all(|g| (g - 1.0).abs() < 1e-9)
            } else {
                median <= prev
            };
            pass &= step_ok;
            prev = median;
            medians.push(json!({ "d": d, "p": p, "median_abs_gap": median, "ok": step_ok }));
        }
    }
    let summary = json!({
        "kind": "approx",
        "trials": spec.trials,
        "seed": spec.seed,
        "medians": medians,
        "pass": pass,
        "regime": spec.p.iter().map(|&p| regime(p)).collect::<Vec<_>>(),
    });
    Ok(Report { rows, summary, pass })
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn run_thresholds() -> Result<Report> {
    let table = entropy::thresholds()?;
    let rows: Vec<Value> = table
        .entries
        .iter()
        .map(|t| {
            let mut v = serde_json::to_value(t).unwrap_or(Value::Null);
            v["in_expected"] = json!(t.in_expected());
            v
        })
        .collect();
    let pass = table.entries.iter().all(|t| t.in_expected());
    let constants: Map<String, Value> = table.entries.iter().map(|t| (t.name.to_string(), json!(t.value))).collect();
    let summary = json!({ "kind": "thresholds", "constants": constants, "pass": pass });
    Ok(Report { rows, summary, pass })
}

/// Empirical defect law of the sampler against the exact conditional law.
pub fn run_tv(spec: &ExperimentSpec) -> Result<Report> {
    let side = spec.side.unwrap_or(Side::Even);
    let parts = spec
        .grid()
        .map(|(d, p)| {
            check_p(p)?;
            let h = PercolatedHypercube::build(d, p, spec.seed)?;
            let r = sampler::empirical_tv_defect(&h, side, spec.trials, spec.seed)?;
            let exact = if d <= 4 { Some(sampler::exact_defect_tv(&h, side)?) } else { None };
            let pass = r.tv <= 0.05 + r.noise_floor;
            let mut row = serde_json::to_value(&r)?;
            row["exact_tv"] = json!(exact);
            row["pass"] = json!(pass);
            let summary = json!({ "kind": "tv", "d": d, "p": p, "pass": pass, "regime": regime(p) });
            Ok(Report { rows: vec![row], summary, pass })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::merge(parts))
}

/// Exact counts; `method` is `evensum` (default), `bruteforce` or `sidesum`.
pub fn run_count(spec: &ExperimentSpec) -> Result<Report> {
    let many = spec.d.len() * spec.p.len() > 1;
    let rows = spec
        .grid()
        .map(|(d, p)| {
            check_p(p)?;
            let h = PercolatedHypercube::build(d, p, spec.seed)?;
            let c = match spec.method.as_deref().unwrap_or("evensum") {
                "evensum" => oracle::count_evensum(&h)?,
                "bruteforce" => oracle::count_bruteforce(&h)?,
                "sidesum" => oracle::count_sidesum(&h, Side::Odd)?,
                m => return Err(Error::Contract(format!("unknown counting method {m:?}"))),
            };
            let mut row = json!({ "count": c.value.to_string() });
            if many {
                row["d"] = json!(d);
                row["p"] = json!(p);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report { rows, summary: Value::Null, pass: true })
}

pub fn run_estimate(spec: &ExperimentSpec) -> Result<Report> {
    let rows = spec
        .grid()
        .map(|(d, p)| {
            let h = PercolatedHypercube::build(d, p, spec.seed)?;
            Ok(serde_json::to_value(estimator::psi_report(&h)?)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report { rows, summary: Value::Null, pass: true })
}

/// Sampler runs on one configuration per `(d, p)`; with `emit_sets` every
/// outcome is a row, otherwise only the failure summary is.
pub fn run_sample(spec: &ExperimentSpec) -> Result<Report> {
    check_trials(spec.trials, 1)?;
    let parts = spec
        .grid()
        .map(|(d, p)| {
            check_p(p)?;
            let h = PercolatedHypercube::build(d, p, spec.seed)?;
            let mut rows = Vec::new();
            if spec.emit_sets {
                let s = sampler::ApproxSampler::new(&h, spec.seed)?;
                let outs: Vec<sampler::SampleOutcome> = (0..spec.trials).into_par_iter().map(|t| s.sample(t)).collect();
                for (t, o) in outs.iter().enumerate() {
                    let mut v = serde_json::to_value(o)?;
                    v["trial"] = json!(t);
                    rows.push(v);
                }
            }
            let fr = sampler::failure_rate(&h, spec.trials, spec.seed)?;
            let pass = fr.invalid_outputs == 0;
            let mut summary = serde_json::to_value(&fr)?;
            summary["kind"] = json!("sample");
            summary["d"] = json!(d);
            summary["p"] = json!(p);
            summary["pass"] = json!(pass);
            summary["regime"] = regime(p);
            Ok(Report { rows, summary, pass })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::merge(parts))
}

pub fn run(spec: &ExperimentSpec) -> Result<Report> {
    match spec.kind {
        Kind::Moments => run_moment_experiment(spec),
        Kind::Clt => run_clt_experiment(spec),
        Kind::Approx => run_approx_experiment(spec),
        Kind::Thresholds => run_thresholds(),
        Kind::Tv => run_tv(spec),
        Kind::Count => run_count(spec),
        Kind::Estimate => run_estimate(spec),
        Kind::Sample => run_sample(spec),
    }
}

/// Writes a report in the spec's format to its output path, or to `out` when
/// it has none.
pub fn emit(spec: &ExperimentSpec, report: &Report, out: &mut dyn Write) -> Result<()> {
    match &spec.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            report.write(spec.format, &mut f)?;
            f.flush()?;
        }
        None => report.write(spec.format, out)?,
    }
    Ok(())
}

/// Per-statistic verdicts keyed by name, for callers that only want the table.
pub fn verdicts(report: &Report) -> BTreeMap<String, bool> {
    report
        .rows
        .iter()
        .filter_map(|r| Some((r.get("statistic")?.as_str()?.to_string(), r.get("pass")?.as_bool()?)))
        .collect()
}
