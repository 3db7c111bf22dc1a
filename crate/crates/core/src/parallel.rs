//! Replica-level parallelism with results independent of the worker count.
//!
//! Replicas are cut into fixed chunks; each chunk folds its replicas in order,
//! and chunk results are merged in chunk order on the calling thread.

use rayon::prelude::*;

use crate::error::Result;

/// Replicas per chunk.
pub const CHUNK: u64 = 64;

/// Folds `body` over replicas `0..replicas` and merges chunk accumulators in order.
pub fn fold_replicas<A, Make, Body, Merge>(replicas: u64, make: Make, body: Body, mut merge: Merge) -> Result<A>
where
    A: Send,
    Make: Fn() -> A + Sync,
    Body: Fn(&mut A, u64) -> Result<()> + Sync,
    Merge: FnMut(&mut A, A),
{
    let chunks = replicas.div_ceil(CHUNK);
    let parts: Vec<Result<A>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = make();
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicas) {
                body(&mut acc, r)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = make();
    for part in parts {
        merge(&mut total, part?);
    }
    Ok(total)
}
