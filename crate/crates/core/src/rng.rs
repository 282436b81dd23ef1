//! Counter-based random substreams.
//!
//! Every sample draws from its own ChaCha stream keyed by `(seed, stream)`
//! and positioned by the sample index, so a result never depends on how
//! samples are spread over workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key material for one `(seed, stream)` pair.
#[derive(Clone, Copy, Debug)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut state = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self(key)
    }

    /// Generator for sample `index` of this stream.
    pub fn rng(&self, index: u64) -> SampleRng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(index);
        rng
    }
}

/// Shorthand for `StreamKey::new(seed, stream).rng(index)`.
pub fn substream(seed: u64, stream: u64, index: u64) -> SampleRng {
    StreamKey::new(seed, stream).rng(index)
}
