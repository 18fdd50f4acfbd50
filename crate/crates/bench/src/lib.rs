//! Workloads shared by the benchmarks.

use adamlab::lemma::TraceCell;
use adamlab::{BoundKind, FuzzFamily, FuzzSearch};

/// `n` cells on a fixed in-region pair, one seed each.
pub fn lemma_cells(n: usize, horizon: usize) -> Vec<TraceCell> {
    (0..n as u64)
        .map(|seed| TraceCell {
            beta1: 0.9,
            beta2: 0.995,
            seed,
            horizon,
            family: FuzzFamily::Nonnegative,
        })
        .collect()
}

/// A small Kingma-Ba search around beta1 = beta2 = 0.1, lambda near 1.
pub fn small_search(budget: usize) -> FuzzSearch {
    FuzzSearch {
        beta1: (0.05, 0.3),
        beta2: (0.05, 0.3),
        lambda: (1.0 - 1e-6, 1.0 - 1e-9),
        family: FuzzFamily::InvSqrt,
        seeds: vec![0],
        budget,
        t_max: 1000,
        bound_kind: BoundKind::KingmaBa,
    }
}
