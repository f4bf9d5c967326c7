//! Deterministic execution helpers.
//!
//! Heavy loops in this crate are expressed as indexed maps followed by a
//! fixed-order reduction, so results are bit-identical whether the `parallel`
//! feature is on, off, or running on any number of threads. Stochastic work
//! derives one child seed per item index, never per worker.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, in parallel when the `parallel` feature is enabled.
/// Output order is always by index.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`], always compiled; the criterion bench
/// suite compares the two on identical workloads.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Pin the global worker count. Errors when the pool is already built or
/// the `parallel` feature is disabled. Results never depend on the thread
/// count: every reduction is a fixed-order pairwise sum over an indexed map.
pub fn configure_threads(n: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Err("built without the `parallel` feature; running sequentially".into())
    }
}

/// SplitMix64 finalizer used for indexed child-seed derivation.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reproducible RNG for item `index` of a run seeded with `master`.
pub fn rng_for(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_indexed(1000, |i| (i as f64).sqrt().sin());
        let b = map_indexed_seq(1000, |i| (i as f64).sqrt().sin());
        assert_eq!(a, b);
    }

    #[test]
    fn derived_seeds_differ_by_index() {
        let s0 = derive_seed(42, 0);
        let s1 = derive_seed(42, 1);
        assert_ne!(s0, s1);
        assert_eq!(s0, derive_seed(42, 0));
    }
}
