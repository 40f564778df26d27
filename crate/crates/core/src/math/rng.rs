//! Seeded random streams.
//!
//! Every experiment unit (dataset replicate, bootstrap replicate, criteria
//! draw) gets its own ChaCha stream keyed by `(master seed, unit index)`, so
//! results do not depend on scheduling or thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used throughout.
pub type SimRng = ChaCha8Rng;

/// Independent stream number `unit` under `master`.
pub fn substream(master: u64, unit: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(master);
    rng.set_stream(unit);
    rng
}

/// A child seed for nesting substreams, e.g. bootstrap replicates inside a
/// simulated dataset.
pub fn derive_seed(master: u64, unit: u64) -> u64 {
    substream(master, unit).next_u64()
}
