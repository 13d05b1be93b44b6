//! Seed derivation. Every random stream in a run is derived from the master
//! seed and a (stream, index) pair, so streams are independent of the order
//! in which other streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Network initialization of the global / center model.
    Init,
    /// Per-client training stream (episode seeds, exploration).
    Client,
    /// Per-round client selection.
    Selection,
    /// Held-out evaluation environments.
    EvalEnv,
    /// Evaluation-time policy sampling (only the random baseline uses it).
    EvalPolicy,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Client => 2,
            Stream::Selection => 3,
            Stream::EvalEnv => 4,
            Stream::EvalPolicy => 5,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream.tag())) ^ splitmix64(index.wrapping_add(0xA5A5)))
}

pub fn stream_rng(master: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, stream, index))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
