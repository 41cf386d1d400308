//! Deterministic random number generation helpers.
//!
//! Every simulation entry point takes a `u64` seed. Independent trials (or
//! grid points) derive their own generator from `(seed, stream)` so results
//! are bit-reproducible no matter how trials are scheduled across workers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Generator for `(seed, stream)`. Streams never collide for distinct ids.
pub fn derive_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Convenience for single-stream use.
pub fn seed_rng(seed: u64) -> SimRng {
    derive_rng(seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: Vec<u64> = derive_rng(7, 0).random_iter().take(4).collect();
        let b: Vec<u64> = derive_rng(7, 1).random_iter().take(4).collect();
        let a2: Vec<u64> = derive_rng(7, 0).random_iter().take(4).collect();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn _rng_trait_bound() {
        fn takes_rng<R: Rng>(_r: &mut R) {}
        takes_rng(&mut seed_rng(1));
    }
}
