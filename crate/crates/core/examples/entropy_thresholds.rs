//! Binomial tail bounds and the threshold constants in p.

use hypercube_hardcore::entropy;
use num_rational::BigRational;
use num_traits::ToPrimitive;

fn main() -> hypercube_hardcore::error::Result<()> {
    let n = 30;
    let p = 0.5;
    println!("P[Bin({n}, {p}) >= qn]:");
    let tenths = |k: i64| BigRational::new(k.into(), 10.into());
    for k in 6..=9 {
        let q = k as f64 / 10.0;
        let exact = entropy::exact_binomial_tail(n, &tenths(5), &tenths(k));
        println!(
            "  q={q}: exact {:.3e}  bound {:.3e}",
            exact.to_f64().unwrap_or(f64::NAN),
            entropy::binomial_tail_bound(n, p, q)?
        );
    }
    for m in 1..=4 {
        let (v, s) = entropy::f_min(m, 0.5)?;
        println!("f_{m}(1/2) = {v:.6} at s = {s:.4}");
    }
    println!();
    for t in entropy::thresholds()?.entries {
        let companion = t.companion.map(|c| format!("  (other root {c:.4})")).unwrap_or_default();
        println!("{:<18} {:.6}{companion}", t.name, t.value);
    }
    Ok(())
}
