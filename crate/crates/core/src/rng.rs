//! Counter-based random streams: every sample draws from its own ChaCha stream keyed by
//! (seed, domain, index), so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream `index` within `domain`. Domains separate the uses of one seed
    /// (start points, targets, ...); indices are sample ids.
    pub fn get(&self, domain: u32, index: u64) -> Stream {
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ (u64::from(domain)).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        rng.set_stream(index);
        rng
    }

    /// Derived family for a sub-experiment.
    pub fn child(&self, tag: u64) -> Streams {
        Streams {
            seed: splitmix(self.seed ^ splitmix(tag)),
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
