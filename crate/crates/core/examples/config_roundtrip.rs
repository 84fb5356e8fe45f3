//! Saves a configuration in the binary format, reads it back, and runs a
//! JSON experiment spec against it.

use hypercube_hardcore::harness::{self, ExperimentSpec};
use hypercube_hardcore::lattice::PercolatedHypercube;

fn main() -> hypercube_hardcore::error::Result<()> {
    let h = PercolatedHypercube::build(10, 0.65, 99)?;
    let path = std::env::temp_dir().join("q10.qdpc");
    std::fs::write(&path, h.serialize())?;
    let back = PercolatedHypercube::deserialize(&std::fs::read(&path)?)?;
    assert_eq!(back, h);
    println!("{} bytes, {} retained edges", h.serialize().len(), back.retained_edges());

    let spec = ExperimentSpec::from_json(r#"{"kind": "estimate", "d": 10, "p": 0.65, "seed": 99}"#)?;
    let report = harness::run(&spec)?;
    report.write_jsonl(&mut std::io::stdout())?;
    Ok(())
}
