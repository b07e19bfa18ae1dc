//! Deterministic derivation of independent random streams.
//!
//! Every stochastic step draws from a ChaCha stream keyed by a master seed, a
//! domain tag and a cell index, so results never depend on scheduling order or
//! worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Domain tags keep calibration, deployment and channel streams separate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    MaliciousOrigin = 0x6f72_6967,
    GenuineLayout = 0x6c61_796f,
    Deployment = 0x6465_706c,
    Channel = 0x6368_616e,
    Trial = 0x7472_6961,
    Calibration = 0x6361_6c69,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a domain tag and a path of indices.
pub fn derive(master: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(stream as u64));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn rng(master: u64, stream: Stream, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(master, stream, path))
}
