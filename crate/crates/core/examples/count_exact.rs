//! Exact independent-set counts for a few small percolated hypercubes, by
//! brute force and by summing over one side.

use hypercube_hardcore::lattice::PercolatedHypercube;
use hypercube_hardcore::oracle;

fn main() -> hypercube_hardcore::error::Result<()> {
    println!("{:>2} {:>4} {:>5} {:>24} {:>9}", "d", "p", "seed", "i(Q)", "log2 i");
    for d in 2..=5 {
        for p in [0.5, 1.0] {
            let h = PercolatedHypercube::build(d, p, 1)?;
            let c = oracle::count_evensum(&h)?;
            if d <= oracle::MAX_D_BRUTE {
                assert_eq!(c.value, oracle::count_bruteforce(&h)?.value);
            }
            println!("{d:>2} {p:>4} {:>5} {:>24} {:>9.4}", 1, c.value, c.log2());
        }
    }
    Ok(())
}
