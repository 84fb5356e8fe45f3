//! Command-line front end: argument parsing, thread pool setup, and exit codes.
//!
//! Exit status is 0 when every verdict passes, 1 when an experiment runs but
//! some verdict fails, and 2 for usage errors.

use crate::harness::{self, ExperimentSpec, Format, Kind, Report};
use crate::lattice::Side;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hcq", version, about = "Independent sets in percolated hypercubes", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact number of independent sets.
    CountExact(Common),
    /// Ψ for both sides, the log2 estimate and the centring constants.
    Estimate(Common),
    /// Runs the approximate sampler and reports its failure rate.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Emit every outcome as a JSON line.
        #[arg(long)]
        emit_sets: bool,
    },
    /// Monte Carlo means of the singleton and dimer sums against closed forms.
    VerifyMoments(Common),
    /// Normality and independence of the normalised estimators.
    Clt(Common),
    /// Threshold constants in p.
    Thresholds(Common),
    /// Total variation between the sampler's defect law and the exact one.
    Tv {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_side)]
        side: Option<Side>,
    },
    /// Estimate against exact count across dimensions.
    Approx(Common),
}

#[derive(Debug, Args, Default)]
struct Common {
    /// Dimension, or a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    d: Vec<u32>,
    /// Retention probability, or a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Counting method: evensum, bruteforce or sidesum.
    #[arg(long)]
    method: Option<String>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
    /// Worker threads; falls back to HC_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// JSON experiment spec; flags given alongside override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
}

fn parse_side(s: &str) -> Result<Side, String> {
    match s.to_ascii_lowercase().as_str() {
        "even" => Ok(Side::Even),
        "odd" => Ok(Side::Odd),
        _ => Err(format!("expected even or odd, got {s:?}")),
    }
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "json" => Ok(Format::Json),
        "csv" => Ok(Format::Csv),
        _ => Err(format!("expected json or csv, got {s:?}")),
    }
}

struct Usage(String);

fn build_spec(kind: Kind, c: &Common, default_trials: u64) -> Result<ExperimentSpec, Usage> {
    let mut spec = match &c.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
            ExperimentSpec::from_json(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentSpec::new(kind, 0, 0.0, default_trials, 0),
    };
    let from_file = c.spec.is_some();
    spec.kind = kind;
    if !c.d.is_empty() {
        spec.d = c.d.clone();
    }
    if !c.p.is_empty() {
        spec.p = c.p.clone();
    }
    if kind != Kind::Thresholds && !from_file && (c.d.is_empty() || c.p.is_empty()) {
        return Err(Usage("--d and --p are required".into()));
    }
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if let Some(t) = c.trials {
        spec.trials = t;
    }
    if c.method.is_some() {
        spec.method = c.method.clone();
    }
    if c.out.is_some() {
        spec.out = c.out.clone();
    }
    if let Some(f) = c.format {
        spec.format = f;
    }
    if c.threads.is_some() {
        spec.threads = c.threads;
    }
    Ok(spec)
}

fn threads(spec: &ExperimentSpec) -> Result<Option<usize>, Usage> {
    if let Some(n) = spec.threads {
        return Ok(Some(n));
    }
    match std::env::var("HC_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Usage(format!("HC_THREADS={v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn num(v: &Value, key: &str) -> String {
    match v.get(key) {
        Some(Value::Number(n)) => n
            .as_f64()
            .map(|x| format!("{x:.6}"))
            .unwrap_or_else(|| n.to_string()),
        Some(other) => other.to_string(),
        None => "-".into(),
    }
}

fn human_summary(kind: Kind, r: &Report, err: &mut dyn Write) {
    for row in &r.rows {
        let line = if let Some(s) = row.get("statistic").and_then(Value::as_str) {
            format!(
                "{s:<18} mean={} target={} z={} {}",
                num(row, "mean"),
                num(row, "target"),
                num(row, "z"),
                verdict(row)
            )
        } else if let Some(m) = row.get("margin").and_then(Value::as_str) {
            format!("margin {m:<5} ks={} var={} skew={}", num(row, "ks"), num(row, "variance"), num(row, "skewness"))
        } else if let Some(n) = row.get("name").and_then(Value::as_str) {
            format!("{n:<18} {}  {}", num(row, "value"), if row["in_expected"] == Value::Bool(true) { "in range" } else { "OUT OF RANGE" })
        } else if kind == Kind::Tv {
            format!("tv={} noise_floor={} exact_tv={} {}", num(row, "tv"), num(row, "noise_floor"), num(row, "exact_tv"), verdict(row))
        } else {
            continue;
        };
        let _ = writeln!(err, "{line}");
    }
    if kind == Kind::Sample {
        let _ = writeln!(err, "failure rate {} ± {}", num(&r.summary, "rate"), num(&r.summary, "se"));
    }
    let _ = writeln!(err, "{}", if r.pass { "PASS" } else { "FAIL" });
}

fn verdict(row: &Value) -> &'static str {
    match row.get("pass") {
        Some(Value::Bool(true)) => "ok",
        Some(Value::Bool(false)) => "FAIL",
        _ => "",
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            let text = e.render().ansi().to_string();
            return match e.kind() {
                DisplayHelp | DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_PASS
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let (kind, common, default_trials) = match &cli.command {
        Command::CountExact(c) => (Kind::Count, c, 1),
        Command::Estimate(c) => (Kind::Estimate, c, 1),
        Command::Sample { common, .. } => (Kind::Sample, common, 1000),
        Command::VerifyMoments(c) => (Kind::Moments, c, 10_000),
        Command::Clt(c) => (Kind::Clt, c, 2000),
        Command::Thresholds(c) => (Kind::Thresholds, c, 1),
        Command::Tv { common, .. } => (Kind::Tv, common, 100_000),
        Command::Approx(c) => (Kind::Approx, c, 20),
    };
    let mut spec = match build_spec(kind, common, default_trials) {
        Ok(s) => s,
        Err(Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_USAGE;
        }
    };
    match &cli.command {
        Command::Sample { emit_sets: true, .. } => spec.emit_sets = true,
        Command::Tv { side: Some(s), .. } => spec.side = Some(*s),
        _ => {}
    }
    let n_threads = match threads(&spec) {
        Ok(n) => n,
        Err(Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_USAGE;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n_threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = pool
        .install(|| harness::run(&spec))
        .and_then(|r| harness::emit(&spec, &r, out).map(|_| r));
    match result {
        Ok(report) => {
            human_summary(kind, &report, err);
            if report.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("hcq").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn count_exact_small() {
        let (code, out, _) = call(&["count-exact", "--d", "2", "--p", "1", "--seed", "0"]);
        assert_eq!(code, 0);
        assert_eq!(out, "{\"count\":\"7\"}\n");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert!(call(&[]).2.contains("Usage"));
        assert_eq!(call(&["count-exact", "--d", "2", "--p", "1", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(call(&["estimate", "--d", "4"]).0, EXIT_USAGE);
        assert_eq!(call(&["count-exact", "--d", "9", "--p", "0.5"]).0, EXIT_USAGE);
        assert_eq!(call(&["clt", "--d", "12", "--p", "1", "--trials", "1000"]).0, EXIT_USAGE);
        assert_eq!(call(&["help"]).0, EXIT_PASS);
    }

    #[test]
    fn thresholds_lists_every_constant() {
        let (code, out, _) = call(&["thresholds"]);
        assert_eq!(code, 0);
        let last: Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
        assert_eq!(last["constants"].as_object().unwrap().len(), 10);
    }

    #[test]
    fn spec_file_with_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        std::fs::write(&path, r#"{"kind":"count","d":3,"p":0.5,"seed":4}"#).unwrap();
        let (code, a, _) = call(&["count-exact", "--spec", path.to_str().unwrap()]);
        assert_eq!(code, 0);
        let (_, b, _) = call(&["count-exact", "--d", "3", "--p", "0.5", "--seed", "4", "--method", "bruteforce"]);
        assert_eq!(a, b);
        let out = dir.path().join("r.csv");
        let (code, stdout, _) = call(&["verify-moments", "--d", "6", "--p", "1", "--trials", "10", "--format", "csv", "--out", out.to_str().unwrap(), "--threads", "2"]);
        assert_ne!(code, EXIT_USAGE);
        assert!(stdout.is_empty());
        assert!(std::fs::read_to_string(out).unwrap().lines().count() > 1);
    }

    #[test]
    fn failing_verdict_exits_1() {
        // at d=4 polymers of size 3 or more carry real mass, out of reach of the sampler
        let (code, out, _) = call(&["tv", "--d", "4", "--p", "0.5", "--trials", "20000", "--seed", "1"]);
        assert_eq!(code, EXIT_FAIL);
        assert!(out.contains("exact_tv"));
    }
}
