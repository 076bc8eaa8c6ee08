//! Order-preserving parallel sample map.
//!
//! Per-sample work is embarrassingly parallel and each sample draws from its
//! own stream, so results are identical for any thread count; the collected
//! vector keeps sample order, and all reductions downstream run sequentially
//! over it.

use rayon::prelude::*;

pub(crate) fn map_samples<T: Send, F: Fn(u64) -> T + Sync + Send>(n: u64, f: F) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}
