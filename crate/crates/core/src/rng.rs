//! Counter-based random substreams.
//!
//! Every random draw in a run comes from a ChaCha8 generator keyed by
//! `(master seed, purpose, node, episode)`. A node's draws therefore never
//! depend on how many other nodes ran before it, or on which thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. The tag is mixed into the key, so two
/// purposes never share a stream even for the same node and episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Init,
    Partition,
    Synthesize,
    Selection,
    Batches,
    Noise,
    Compromise,
    Rmd,
    Explore,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x01,
            Purpose::Partition => 0x02,
            Purpose::Synthesize => 0x03,
            Purpose::Selection => 0x04,
            Purpose::Batches => 0x05,
            Purpose::Noise => 0x06,
            Purpose::Compromise => 0x07,
            Purpose::Rmd => 0x08,
            Purpose::Explore => 0x09,
        }
    }
}

/// Identifies one substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master: u64,
    pub purpose: Purpose,
    pub node: u64,
    pub episode: u64,
}

impl StreamKey {
    pub fn new(master: u64, purpose: Purpose, node: u64, episode: u64) -> Self {
        Self {
            master,
            purpose,
            node,
            episode,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut state = splitmix64(self.master ^ self.purpose.tag().rotate_left(56));
        for (i, word) in [self.purpose.tag(), self.node, self.episode, 0x5eed]
            .into_iter()
            .enumerate()
        {
            state = splitmix64(state ^ word.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            seed[i * 8..(i + 1) * 8].copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// Shorthand for `StreamKey::new(..).rng()`.
pub fn substream(master: u64, purpose: Purpose, node: u64, episode: u64) -> ChaCha8Rng {
    StreamKey::new(master, purpose, node, episode).rng()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
