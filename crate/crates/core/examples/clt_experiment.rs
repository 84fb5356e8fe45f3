//! Small version of the normal-fluctuation experiment: normalised estimators
//! over independent configurations.
//!
//! cargo run --release --example clt_experiment -- 14 0.6 1000

use hypercube_hardcore::harness::{self, ExperimentSpec, Kind};

fn main() -> hypercube_hardcore::error::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d = args.first().and_then(|s| s.parse().ok()).unwrap_or(12);
    let p = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.6);
    let trials = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);

    let r = harness::run(&ExperimentSpec::new(Kind::Clt, d, p, trials, 2024))?;
    for row in &r.rows {
        println!(
            "{:>4}: mean {:+.3}  var {:.3}  skew {:+.3}  KS {:.4}",
            row["margin"].as_str().unwrap_or("?"),
            row["mean"].as_f64().unwrap_or(f64::NAN),
            row["variance"].as_f64().unwrap_or(f64::NAN),
            row["skewness"].as_f64().unwrap_or(f64::NAN),
            row["ks"].as_f64().unwrap_or(f64::NAN),
        );
    }
    println!("corr {:+.4}", r.summary["correlation"].as_f64().unwrap_or(f64::NAN));
    Ok(())
}
