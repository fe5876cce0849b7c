//! Execution policy: data-parallel loops with a sequential fallback.
//!
//! All parallelism in this crate is order-preserving map/collect over
//! independent work items, so results are identical whichever policy runs
//! them. When the `parallel` cargo feature is disabled, [`Parallelism::Rayon`]
//! silently degrades to the sequential path and the rayon dependency is
//! dropped entirely.

/// Mixes two seeds into one, decorrelating derived RNG streams
/// (splitmix64-style finalizer).
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// How a data-parallel loop should execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Plain sequential iteration.
    Sequential,
    /// Rayon work-stealing iteration (sequential when the `parallel` feature
    /// is off).
    #[default]
    Rayon,
}

/// Maps `f` over `0..len`, preserving index order in the output.
pub fn map_indexed<U, F>(mode: Parallelism, len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        Parallelism::Sequential => (0..len).map(f).collect(),
        Parallelism::Rayon => rayon_map_indexed(len, f),
    }
}

/// Maps `f` over a slice, preserving item order in the output.
pub fn map_slice<'a, T, U, F>(mode: Parallelism, items: &'a [T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> U + Sync + Send,
{
    match mode {
        Parallelism::Sequential => items.iter().map(f).collect(),
        Parallelism::Rayon => rayon_map_slice(items, f),
    }
}

#[cfg(feature = "parallel")]
fn rayon_map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn rayon_map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..len).map(f).collect()
}

#[cfg(feature = "parallel")]
fn rayon_map_slice<'a, T, U, F>(items: &'a [T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn rayon_map_slice<'a, T, U, F>(items: &'a [T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Runs `body` inside a rayon pool with `workers` threads (0 = rayon default).
/// Without the `parallel` feature `workers` is ignored and `body` runs on the
/// calling thread.
pub fn with_workers<R: Send>(workers: usize, body: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if workers == 0 {
            return body();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool");
        pool.install(body)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        body()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let squares_seq = map_indexed(Parallelism::Sequential, 100, |i| i * i);
        let squares_par = map_indexed(Parallelism::Rayon, 100, |i| i * i);
        assert_eq!(squares_seq, squares_par);
        assert_eq!(squares_seq[7], 49);
    }

    #[test]
    fn slice_map_matches_iterator() {
        let items: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let doubled = map_slice(Parallelism::Rayon, &items, |x| 2.0 * x);
        assert_eq!(doubled, items.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
    }
}
