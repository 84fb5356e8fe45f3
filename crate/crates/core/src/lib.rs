//! Independent sets in percolated hypercubes.
//!
//! The crate counts independent sets of `Q_{d,p}` exactly at small `d`,
//! evaluates the polymer and dimer expansion of the count, computes the
//! explicit estimator `Ψ` with its centring constants, and samples
//! approximately uniform independent sets.
//!
//! - [`lattice`]: percolated cube configurations, sides, dimers, binary format
//! - [`oracle`]: exact counts, the exact law of one side, exact sampling
//! - [`polymer`]: 2-linked components, closures, polymer partition functions,
//!   dimer weights and adjacency
//! - [`estimator`]: `Ψ`, the log-count estimate and closed-form moments
//! - [`entropy`]: binomial tail bounds and threshold constants in `p`
//! - [`sampler`]: the approximate sampler and its comparison with exact laws
//! - [`harness`] and [`cli`]: experiment drivers and the `hcq` command
//!
//! ```
//! use hypercube_hardcore::{estimator, lattice::PercolatedHypercube, oracle};
//!
//! let h = PercolatedHypercube::build(4, 0.8, 1).unwrap();
//! let exact = oracle::count_evensum(&h).unwrap().log2();
//! let est = estimator::estimate_log2_count(&h).unwrap();
//! assert!((exact - est).abs() < 1.0);
//! ```

pub mod cli;
pub mod dyadic;
pub mod entropy;
pub mod error;
pub mod estimator;
pub mod gray;
pub mod harness;
pub mod lattice;
pub mod oracle;
pub mod polymer;
pub mod rng;
pub mod sampler;
pub mod stats;
