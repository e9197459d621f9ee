//! Named, splittable random streams.
//!
//! Every consumer (environment, each agent, evaluation, ...) draws from its own
//! ChaCha stream keyed by the master seed and a stream name, so adding or
//! reordering consumers never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Opens stream `(name, index)` of the master seed.
pub fn stream(master_seed: u64, name: &str, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let id = fnv1a(name) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    rng.set_stream(id);
    rng
}

/// Serializable position of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &Rng) -> Self {
        Self { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }

    /// Packs the state into 64-bit words: 4 seed words, stream, word position (lo, hi).
    pub fn to_words(&self) -> Vec<u64> {
        let mut out: Vec<u64> = self.seed.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push(self.stream);
        out.push(self.word_pos as u64);
        out.push((self.word_pos >> 64) as u64);
        out
    }

    pub fn from_words(words: &[u64]) -> Option<Self> {
        if words.len() != 7 {
            return None;
        }
        let mut seed = [0u8; 32];
        for (i, w) in words[..4].iter().enumerate() {
            seed[i * 8..i * 8 + 8].copy_from_slice(&w.to_le_bytes());
        }
        Some(Self { seed, stream: words[4], word_pos: u128::from(words[5]) | (u128::from(words[6]) << 64) })
    }
}
