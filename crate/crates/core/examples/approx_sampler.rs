//! Draws from the approximate sampler, its failure rate, and the distance of
//! its defect law to the exact one on a small cube.

use hypercube_hardcore::lattice::{PercolatedHypercube, Side};
use hypercube_hardcore::sampler::{self, ApproxSampler, Outcome};

fn main() -> hypercube_hardcore::error::Result<()> {
    let h = PercolatedHypercube::build(8, 0.9, 3)?;
    let s = ApproxSampler::new(&h, 1)?;
    println!("q_even = {:.4}", s.q_even());
    for t in 0..5 {
        let o = s.sample(t);
        match &o.outcome {
            Outcome::Success { defect, set } => {
                println!("run {t}: {} side, defect {:?}, |I| = {}", o.side.name(), defect, set.len())
            }
            Outcome::Failure { step, reason } => println!("run {t}: failed at step {step} ({})", reason.name()),
        }
    }

    for p in [0.6, 0.8, 1.0] {
        let h = PercolatedHypercube::build(10, p, 3)?;
        let r = sampler::failure_rate(&h, 20_000, 1)?;
        println!("d=10 p={p}: failure rate {:.4} +- {:.4}  {:?}", r.rate, r.se, r.by_reason);
    }

    let h = PercolatedHypercube::build(4, 0.8, 1)?;
    let tv = sampler::empirical_tv_defect(&h, Side::Even, 100_000, 5)?;
    let exact = sampler::exact_defect_tv(&h, Side::Even)?;
    println!("d=4 p=0.8: empirical TV {:.4} (noise {:.4}), exact TV {exact:.4}", tv.tv, tv.noise_floor);
    Ok(())
}
