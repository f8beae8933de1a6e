//! Fixtures shared by the criterion benchmarks.

use pcp_core::harness::bench::{make_replicate, Replicate};
use pcp_core::graph::true_cpdag;
use pcp_core::MixedGraph;

/// A simulated problem with degree caps 2/2 and its CPDAG.
pub fn fixture(seed: u64, vertices: usize, samples: usize) -> (Replicate, MixedGraph) {
    let rep = make_replicate(seed, vertices, samples, 2, 2);
    let truth = true_cpdag(&rep.dag);
    (rep, truth)
}
