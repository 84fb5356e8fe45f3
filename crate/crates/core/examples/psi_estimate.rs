//! The explicit estimate of log2 i(Q_{d,p}) next to the exact count.

use hypercube_hardcore::estimator;
use hypercube_hardcore::lattice::PercolatedHypercube;
use hypercube_hardcore::oracle;

fn main() -> hypercube_hardcore::error::Result<()> {
    let p = 0.8;
    for d in 3..=6 {
        let h = PercolatedHypercube::build(d, p, 7)?;
        let est = estimator::estimate_log2_count(&h)?;
        let exact = oracle::count_evensum(&h)?.log2();
        println!("d={d}  estimate {est:10.5}  exact {exact:10.5}  gap {:+.5}", est - exact);
    }

    // larger cubes only have the estimate
    let h = PercolatedHypercube::build(14, p, 7)?;
    let r = estimator::psi_report(&h)?;
    println!("d=14  Psi_even {:.5}  Psi_odd {:.5}  log2 estimate {:.3}", r.even.psi, r.odd.psi, r.log2_estimate);
    println!("      mu {:.5}  sigma^2 {:.5}", r.constants.mu, r.constants.sigma2);
    Ok(())
}
