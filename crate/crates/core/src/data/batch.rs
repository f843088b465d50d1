use crate::numerics::Prng;

/// Stream offset separating batch shuffles from other uses of the seed.
const BATCH_STREAM: u64 = 1 << 32;

/// Shuffled mini-batches of record indices for one epoch. The order is a
/// function of `(seed, epoch)` only; the last batch may be short.
pub fn batch_iter(num_records: usize, batch_size: usize, epoch: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..num_records).collect();
    Prng::with_stream(seed, BATCH_STREAM + epoch as u64).shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
