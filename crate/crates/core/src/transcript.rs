//! Versioned JSON form of a [`SessionTranscript`].
//!
//! Keys are packed MSB-first into bytes and hex encoded; the bit lengths are
//! stored alongside so that trailing padding is unambiguous.

use serde::{Deserialize, Serialize};

use crate::adversary::AttackStrategy;
use crate::error::{contract, Result};
use crate::protocol::{AbortReason, OperatorChoice, RoundRecord, SessionConfig, SessionTranscript};

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub i: u64,
    pub a_op: OperatorChoice,
    pub b_op: OperatorChoice,
    pub a: u8,
    pub b: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp_a: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp_b: Option<u8>,
}

impl From<&RoundRecord> for RoundEntry {
    fn from(r: &RoundRecord) -> Self {
        RoundEntry {
            i: r.index,
            a_op: r.alice_op,
            b_op: r.bob_op,
            a: r.alice_bit,
            b: r.bob_bit,
            tp_a: r.tp_guess_alice,
            tp_b: r.tp_guess_bob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Efficiency {
    pub num: u64,
    pub den: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptDocument {
    pub version: u32,
    pub config: SessionConfig,
    pub strategy: AttackStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<RoundEntry>>,
    pub sifted: Vec<usize>,
    pub check: Vec<usize>,
    pub qber: Option<f64>,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort: Option<AbortReason>,
    pub raw_key: String,
    pub raw_key_len: usize,
    pub key_mismatch_rate: Option<f64>,
    pub final_key: String,
    pub final_key_len: usize,
    pub efficiency: Efficiency,
}

impl TranscriptDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TranscriptDocument = serde_json::from_str(text)?;
        if doc.version != TRANSCRIPT_VERSION {
            return Err(contract(format!("unsupported transcript version {}", doc.version)));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript values are finite")
    }

    pub fn final_key_bits(&self) -> Result<Vec<u8>> {
        decode_bits(&self.final_key, self.final_key_len)
    }

    pub fn raw_key_bits(&self) -> Result<Vec<u8>> {
        decode_bits(&self.raw_key, self.raw_key_len)
    }
}

impl SessionTranscript {
    /// Round records are included only when `include_rounds` is set.
    pub fn to_document(&self, include_rounds: bool) -> TranscriptDocument {
        TranscriptDocument {
            version: TRANSCRIPT_VERSION,
            config: self.config.clone(),
            strategy: self.strategy.clone(),
            rounds: include_rounds.then(|| self.rounds.iter().map(RoundEntry::from).collect()),
            sifted: self.sifted_indices.clone(),
            check: self.check_indices.clone(),
            qber: self.estimated_qber,
            accepted: self.accepted,
            abort: self.abort.clone(),
            raw_key: encode_bits(&self.raw_key),
            raw_key_len: self.raw_key.len(),
            key_mismatch_rate: self.key_mismatch_rate,
            final_key: encode_bits(&self.final_key),
            final_key_len: self.final_key.len(),
            efficiency: Efficiency {
                num: *self.qubit_efficiency.numer(),
                den: *self.qubit_efficiency.denom(),
            },
        }
    }

    pub fn to_json(&self, include_rounds: bool) -> String {
        self.to_document(include_rounds).to_json()
    }
}

pub fn encode_bits(bits: &[u8]) -> String {
    let bytes: Vec<u8> = bits
        .chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (k, &b)| acc | ((b & 1) << (7 - k)))
        })
        .collect();
    hex::encode(bytes)
}

pub fn decode_bits(text: &str, len: usize) -> Result<Vec<u8>> {
    let bytes = hex::decode(text).map_err(|e| contract(format!("bad hex key: {e}")))?;
    if bytes.len() != len.div_ceil(8) {
        return Err(contract(format!(
            "hex key holds {} bytes, expected {} for {len} bits",
            bytes.len(),
            len.div_ceil(8)
        )));
    }
    Ok((0..len).map(|t| (bytes[t / 8] >> (7 - t % 8)) & 1).collect())
}
