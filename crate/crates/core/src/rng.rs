//! Per-round random streams.
//!
//! Every random draw in a session comes from a ChaCha stream keyed by
//! `(master_seed, round_index, party)`, so the outcome of a round does not
//! depend on which thread executes it or in what order rounds run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Who consumes a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Party {
    Source = 1,
    Alice = 2,
    Bob = 3,
    ThirdParty = 4,
    CheckSelection = 5,
    PrivacyAmplification = 6,
    Trial = 7,
}

/// Round index used for session-level (not per-round) streams.
pub const SESSION_STREAM: u64 = u64::MAX;

pub fn stream(master_seed: u64, round: u64, party: Party) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&round.to_le_bytes());
    key[16..20].copy_from_slice(&(party as u32).to_le_bytes());
    key[20..32].copy_from_slice(b"lmsqkd-strm1");
    ChaCha8Rng::from_seed(key)
}
