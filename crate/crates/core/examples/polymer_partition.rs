//! Polymer partition functions of one side of Q_{4,p}, and how close the
//! singleton product comes to them.

use hypercube_hardcore::lattice::{PercolatedHypercube, Side};
use hypercube_hardcore::polymer;

fn main() -> hypercube_hardcore::error::Result<()> {
    let h = PercolatedHypercube::build(4, 0.7, 42)?;
    for side in Side::BOTH {
        let z = polymer::partition_functions(&h, side, 2)?;
        let ds = polymer::delta_sums(&h, side)?;
        println!("{} side", side.name());
        println!("  Z        = {}", z.z.to_f64());
        println!("  Z_(<=2)  = {}", z.z_le_k.to_f64());
        println!("  Z~       = {}", z.z_tilde.to_f64());
        println!("  Delta    = {:.6}", ds.delta_f64());
        println!("  Delta~   = {:.6}", ds.delta_tilde_f64());
    }
    let layers = polymer::layer_partition(6, Side::Even)?;
    println!("d=6 dimers split into {} conflict-free layers", layers.classes.len());
    Ok(())
}
