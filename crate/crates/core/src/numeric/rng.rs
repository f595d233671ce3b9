use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Counter-based generator keyed by `(seed, stream)`.
///
/// The stream components are folded into ChaCha's 64-bit stream id, so any
/// sampled quantity can be regenerated from the seed and its coordinates
/// (for example `[DROPOUT, epoch, example]`) without replaying earlier draws.
pub fn stream_rng(seed: u64, stream: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = stream
        .iter()
        .fold(0x9e37_79b9_7f4a_7c15u64, |acc, &s| splitmix(acc ^ splitmix(s)));
    rng.set_stream(id);
    rng
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream tags used across the crate.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const NEGATIVES: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SYNTHETIC: u64 = 6;
    pub const BPR: u64 = 7;
}
