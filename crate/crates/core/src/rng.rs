//! Deterministic random streams keyed by `(seed, purpose tag, ids)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut hash: u64) -> u64 {
    for b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Independent stream for one purpose. Streams with different tags or ids
/// never share state, so evaluation order cannot change results.
pub(crate) fn stream(seed: u64, tag: &str, ids: &[u64]) -> ChaCha8Rng {
    let mut h = fnv1a(tag.bytes(), FNV_OFFSET);
    for id in ids {
        h = fnv1a(id.to_le_bytes(), h);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}
