//! Thin parallelism shim.
//!
//! Heavy per-voxel loops go through these helpers so the crate builds with
//! or without rayon (the `parallel` feature). Outputs are always written to
//! disjoint, index-addressed slots and scalar reductions run over buffers in
//! a fixed order, so results are bit-identical for any worker count.

#[cfg(feature = "parallel")]
pub(crate) fn par_map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn par_for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    use rayon::prelude::*;
    items
        .par_iter_mut()
        .enumerate()
        .for_each(|(i, item)| f(i, item));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    for (i, item) in items.iter_mut().enumerate() {
        f(i, item);
    }
}

/// Fixed-order pairwise summation. Deterministic for a given input order and
/// substantially more accurate than a running sum on long buffers.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
