//! Deterministic derivation of independent RNG streams.
//!
//! Every episode, training run, and experiment cell owns its own stream,
//! derived from a master seed plus a list of string/integer tags. Identical
//! tags always yield the identical stream, so runs are reproducible and
//! cells can execute in any order or in parallel.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice, chained from `state`.
pub fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    let mut h = state;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash of a tag path, used both for stream derivation and artifact hashes.
pub fn tag_hash(master: u64, tags: &[Tag]) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &master.to_le_bytes());
    for t in tags {
        match t {
            Tag::S(s) => {
                h = fnv1a(h, &[0x01]);
                h = fnv1a(h, s.as_bytes());
            }
            Tag::U(v) => {
                h = fnv1a(h, &[0x02]);
                h = fnv1a(h, &v.to_le_bytes());
            }
        }
    }
    h
}

/// A component of a stream-derivation path.
#[derive(Debug, Clone)]
pub enum Tag {
    S(&'static str),
    U(u64),
}

/// Derives an independent ChaCha stream from `master` and a tag path.
pub fn derive_rng(master: u64, tags: &[Tag]) -> ChaCha12Rng {
    let h = tag_hash(master, tags);
    // Expand the 64-bit tag hash into a full 256-bit seed with splitmix64.
    let mut seed = [0u8; 32];
    let mut x = h;
    for chunk in seed.chunks_exact_mut(8) {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
