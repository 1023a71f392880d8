//! Seeded, counter-style random streams.
//!
//! Every page gets a ChaCha8 key derived from `(seed, page_id)`; each token
//! reads from its own stream (the token index), so changing which tokens are
//! masked never shifts the noise drawn for any other token.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a run seed with a page id into a page key.
pub fn page_key(seed: u64, page_id: u64) -> u64 {
    splitmix64(seed ^ splitmix64(page_id.wrapping_add(0x5EED)))
}

/// Stable 64-bit key for a text label.
pub fn label_key(label: &str, seed: u64) -> u64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(label.as_bytes())
        .finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Generator for substream `stream` under `key`.
pub fn stream(key: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

/// Fills `out` with standard normal draws from substream `stream` of `key`.
pub fn fill_normal(key: u64, stream_id: u64, out: &mut [f64]) {
    let mut rng = stream(key, stream_id);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}
