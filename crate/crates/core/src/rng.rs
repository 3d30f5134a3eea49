//! Counter-based random streams.
//!
//! Every Monte-Carlo sample owns its own ChaCha stream keyed by
//! `(seed, sample index)`, so a batch is the same no matter how many workers
//! generate it or in which order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator for sample `index` of the batch keyed by `seed`.
pub fn sample_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A uniform draw strictly inside (0, 1).
pub fn open_uniform(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed namespaces; optimisation and evaluation batches never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPurpose {
    Optimise,
    Evaluate,
    Oracle,
}

impl SeedPurpose {
    fn tag(self) -> u64 {
        match self {
            SeedPurpose::Optimise => 0x6f70_7469,
            SeedPurpose::Evaluate => 0x6576_616c,
            SeedPurpose::Oracle => 0x6f72_636c,
        }
    }
}

/// Mixes a root seed with a purpose and a configuration index into the seed
/// of one batch.
pub fn derive_seed(root: u64, purpose: SeedPurpose, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ splitmix64(purpose.tag())) ^ index)
}
