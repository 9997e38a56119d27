//! Disentangled graph condensation.
//!
//! This crate condenses a large attributed graph into a small synthetic one
//! that trains graph neural networks to nearly the same accuracy as the
//! original. The pipeline is deliberately split into two independent stages:
//!
//! 1. **Node condensation** ([`condense`]): learn a small feature matrix and
//!    label vector by distilling a pre-trained MLP classifier's view of the
//!    training nodes — no GNN in the loop, so no bi-level optimization.
//! 2. **Edge translation** ([`translate`]): give the condensed nodes a
//!    topology by scoring node pairs with a link predictor pre-trained on the
//!    original graph, using nearest training nodes ("anchors") to stand in
//!    for the missing neighborhoods of the synthetic nodes.
//!
//! Around those two stages the crate provides the supporting cast: a CSR
//! sparse graph type and dataset IO ([`graph`], [`data`]), a small f64 neural
//! toolkit with manual backprop ([`neural`], [`matrix`]), coreset baselines
//! ([`coreset`]), and GNN evaluation plus graph/cluster metrics
//! ([`evaluate`]).
//!
//! Everything is deterministic given a seed: RNG is ChaCha-based and
//! explicitly threaded through every operation, and the parallel code paths
//! are row-partitioned so they produce bitwise-identical results to the
//! serial ones.

pub mod condense;
pub mod coreset;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod graph;
pub mod matrix;
pub mod neural;
#[cfg(test)]
pub(crate) mod testutil;
pub mod translate;

/// Derive an independent RNG seed for a named stream (splitmix64 step).
/// Keeps the sub-components of a pipeline decorrelated while everything
/// stays a pure function of the user-facing seed.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub use condense::{condense, CondenseConfig, CondenseResult};
pub use data::{load_dataset, save_condensed, CondensedGraph, DataSplit, Dataset, LabelVector};
pub use error::{Error, Result};
pub use evaluate::{homophily, train_and_test, GnnConfig};
pub use graph::SparseGraph;
pub use matrix::Matrix;
pub use translate::{pretrain_link_predictor, translate, LinkPredictor, TranslateConfig};

/// Cap rayon's global pool at `threads` workers (0 keeps the default). Must
/// run before the first parallel operation; later calls are ignored, which is
/// fine for a CLI that configures the pool once at startup.
pub fn configure_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}
