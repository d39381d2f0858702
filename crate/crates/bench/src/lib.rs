//! Seeded inputs for the kernel benchmarks.

use ndarray::Array2;
use novelty_core::netmet::Snapshot;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` rows in `d` dimensions drawn around `clusters` uniform centers.
pub fn clustered_rows(n: usize, d: usize, clusters: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = Array2::from_shape_fn((clusters, d), |_| rng.random_range(-5.0..5.0));
    Array2::from_shape_fn((n, d), |(r, c)| {
        centers[[r % clusters, c]] + rng.random_range(-1.0..1.0)
    })
}

/// Quantized gray levels in `0..levels`, smooth enough to give a sparse GLCM.
pub fn gray_levels(side: usize, levels: usize, seed: u64) -> Array2<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((side, side), |(r, c)| {
        ((r + c) / 4 + rng.random_range(0..3)) % levels
    })
}

/// Random directed graph with `n` nodes and about `edges_per_node * n` edges.
pub fn random_graph(n: usize, edges_per_node: usize, seed: u64) -> Snapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(usize, usize)> = (0..n * edges_per_node)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    Snapshot::from_edges(n, &edges)
}
