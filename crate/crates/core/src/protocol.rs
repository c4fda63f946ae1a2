//! Session orchestration: distribution rounds, sifting, public discussion of
//! check bits, the threshold decision and privacy amplification.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{emit_joint_state, guess_table, tp_measurement_basis, AttackStrategy, SourceInfo};
use crate::error::{contract, Error, Result};
use crate::privacy::{output_length, privacy_amplify, ToeplitzSeed};
use crate::quantum_sim::{hadamard, identity, measure_z, pauli_x, UnitaryGate};
use crate::rng::{stream, Party, SESSION_STREAM};

/// Operator a participant applies to its qubit before the Z measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorChoice {
    I,
    H,
}

impl OperatorChoice {
    fn gate(self) -> UnitaryGate {
        match self {
            OperatorChoice::I => identity(2),
            OperatorChoice::H => hadamard(),
        }
    }

    fn draw<R: Rng + ?Sized>(p_hadamard: f64, rng: &mut R) -> Self {
        if rng.random_bool(p_hadamard) {
            OperatorChoice::H
        } else {
            OperatorChoice::I
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub n_rounds: u64,
    /// Probability that Alice applies H.
    pub p_a: f64,
    /// Probability that Bob applies H.
    pub p_b: f64,
    pub check_fraction: f64,
    pub qber_threshold: f64,
    pub pa_security_margin: usize,
    pub master_seed: u64,
    pub min_check_bits: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_rounds: 4000,
            p_a: 0.5,
            p_b: 0.5,
            check_fraction: 0.5,
            qber_threshold: 0.08,
            pa_security_margin: 0,
            master_seed: 0,
            min_check_bits: 100,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(contract("n_rounds must be at least 1"));
        }
        for (name, p) in [("p_a", self.p_a), ("p_b", self.p_b), ("qber_threshold", self.qber_threshold)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(contract(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.check_fraction > 0.0 && self.check_fraction < 1.0) {
            return Err(contract(format!(
                "check_fraction = {} must lie strictly between 0 and 1",
                self.check_fraction
            )));
        }
        Ok(())
    }

    /// Probability that both participants pick the same operator.
    pub fn match_probability(&self) -> f64 {
        self.p_a * self.p_b + (1.0 - self.p_a) * (1.0 - self.p_b)
    }
}

/// Expected shared-key bits per transmitted qubit for a noiseless run:
/// `P(match) · (1 - check_fraction) / 2`.
pub fn theoretical_qubit_efficiency(p_a: f64, p_b: f64, check_fraction: f64) -> Result<f64> {
    for p in [p_a, p_b, check_fraction] {
        if !(0.0..=1.0).contains(&p) {
            return Err(contract(format!("{p} is not a probability")));
        }
    }
    let matched = p_a * p_b + (1.0 - p_a) * (1.0 - p_b);
    Ok(matched * (1.0 - check_fraction) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub index: u64,
    pub alice_op: OperatorChoice,
    pub bob_op: OperatorChoice,
    pub alice_bit: u8,
    pub bob_bit: u8,
    pub tp_guess_alice: Option<u8>,
    pub tp_guess_bob: Option<u8>,
}

impl RoundRecord {
    pub fn sifted(&self) -> bool {
        self.alice_op == self.bob_op
    }
}

/// Runs one round with operator choices drawn from the participants' streams.
pub fn run_round(index: u64, strategy: &AttackStrategy, config: &SessionConfig) -> Result<RoundRecord> {
    let mut alice_rng = stream(config.master_seed, index, Party::Alice);
    let mut bob_rng = stream(config.master_seed, index, Party::Bob);
    let alice_op = OperatorChoice::draw(config.p_a, &mut alice_rng);
    let bob_op = OperatorChoice::draw(config.p_b, &mut bob_rng);
    execute_round(index, strategy, config.master_seed, (alice_op, bob_op), &mut alice_rng, &mut bob_rng)
}

/// Runs one round with the operator choices fixed by the caller.
pub fn run_round_with_ops(
    index: u64,
    strategy: &AttackStrategy,
    master_seed: u64,
    ops: (OperatorChoice, OperatorChoice),
) -> Result<RoundRecord> {
    let mut alice_rng = stream(master_seed, index, Party::Alice);
    let mut bob_rng = stream(master_seed, index, Party::Bob);
    execute_round(index, strategy, master_seed, ops, &mut alice_rng, &mut bob_rng)
}

fn execute_round(
    index: u64,
    strategy: &AttackStrategy,
    master_seed: u64,
    (alice_op, bob_op): (OperatorChoice, OperatorChoice),
    alice_rng: &mut impl RngCore,
    bob_rng: &mut impl RngCore,
) -> Result<RoundRecord> {
    let mut source_rng = stream(master_seed, index, Party::Source);
    let (state, info) = emit_joint_state(strategy, &mut source_rng)?;

    let mut state = state.apply(&alice_op.gate(), 0)?.apply(&bob_op.gate(), 1)?;
    if info == SourceInfo::BobFlip(true) {
        state = state.apply(&pauli_x(), 1)?;
    }

    // The probe is rotated into the third party's measurement basis before the
    // participants measure; the rotation acts on a different subsystem and does
    // not change their outcome statistics.
    let probe = match strategy {
        AttackStrategy::Collective { params } => {
            let basis = tp_measurement_basis(params)?;
            state = state.apply(&basis, 2)?;
            Some(guess_table(&state))
        }
        _ => None,
    };

    let (alice_bit, post) = measure_z(&state, 0, alice_rng)?;
    let (bob_bit, post) = measure_z(&post, 1, bob_rng)?;

    let (tp_guess_alice, tp_guess_bob) = match (probe, info) {
        (Some(table), _) => {
            let mut tp_rng = stream(master_seed, index, Party::ThirdParty);
            let (outcome, _) = measure_z(&post, 2, &mut tp_rng)?;
            let (ga, gb) = table[outcome];
            (Some(ga), Some(gb))
        }
        (None, SourceInfo::FakePair(bit)) => (Some(bit), Some(bit)),
        _ => (None, None),
    };

    Ok(RoundRecord {
        index,
        alice_op,
        bob_op,
        alice_bit: alice_bit as u8,
        bob_bit: bob_bit as u8,
        tp_guess_alice,
        tp_guess_bob,
    })
}

/// Positions of the rounds in which both participants used the same operator.
pub fn sift(rounds: &[RoundRecord]) -> Vec<usize> {
    rounds
        .iter()
        .enumerate()
        .filter(|(_, r)| r.sifted())
        .map(|(i, _)| i)
        .collect()
}

/// Splits the sifted positions into (check, key), both sorted. The check set
/// has `round_half_up(check_fraction · |sifted|)` elements.
pub fn select_check_bits(sifted: &[usize], config: &SessionConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let wanted = ((config.check_fraction * sifted.len() as f64) + 0.5).floor() as usize;
    let wanted = wanted.min(sifted.len());
    if wanted < config.min_check_bits || wanted == 0 {
        return Err(Error::AbortInsufficientSample {
            available: wanted,
            required: config.min_check_bits.max(1),
        });
    }
    let mut shuffled = sifted.to_vec();
    let mut rng = stream(config.master_seed, SESSION_STREAM, Party::CheckSelection);
    shuffled.shuffle(&mut rng);
    let (check, key) = shuffled.split_at(wanted);
    let mut check = check.to_vec();
    let mut key = key.to_vec();
    check.sort_unstable();
    key.sort_unstable();
    Ok((check, key))
}

/// Fraction of check positions where the participants' bits disagree.
pub fn public_discussion(rounds: &[RoundRecord], check: &[usize]) -> Result<f64> {
    if check.is_empty() {
        return Err(Error::AbortInsufficientSample {
            available: 0,
            required: 1,
        });
    }
    let errors = check
        .iter()
        .filter(|&&i| rounds[i].alice_bit != rounds[i].bob_bit)
        .count();
    Ok(errors as f64 / check.len() as f64)
}

/// Why a session ended without a key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum AbortReason {
    InsufficientSample { available: usize, required: usize },
    QberAboveThreshold { qber: f64, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTranscript {
    pub config: SessionConfig,
    pub strategy: AttackStrategy,
    pub rounds: Vec<RoundRecord>,
    pub sifted_indices: Vec<usize>,
    pub check_indices: Vec<usize>,
    /// `None` when the session aborted before the check bits were compared.
    pub estimated_qber: Option<f64>,
    pub accepted: bool,
    pub abort: Option<AbortReason>,
    /// Alice's bits at the sifted, non-check positions.
    pub raw_key: Vec<u8>,
    /// Fraction of raw-key positions where Bob's bit differs from Alice's.
    pub key_mismatch_rate: Option<f64>,
    pub final_key: Vec<u8>,
    /// `|final_key| / (2 · n_rounds)`.
    pub qubit_efficiency: Ratio<u64>,
}

/// Runs a full session. Rounds execute on the current rayon pool; the result
/// does not depend on the pool size.
pub fn run_session(config: &SessionConfig, strategy: &AttackStrategy) -> Result<SessionTranscript> {
    config.validate()?;
    strategy.validate()?;

    let rounds = (0..config.n_rounds)
        .into_par_iter()
        .map(|i| run_round(i, strategy, config))
        .collect::<Result<Vec<_>>>()?;
    let sifted_indices = sift(&rounds);

    let mut transcript = SessionTranscript {
        config: config.clone(),
        strategy: strategy.clone(),
        rounds,
        sifted_indices,
        check_indices: Vec::new(),
        estimated_qber: None,
        accepted: false,
        abort: None,
        raw_key: Vec::new(),
        key_mismatch_rate: None,
        final_key: Vec::new(),
        qubit_efficiency: Ratio::new(0, 2 * config.n_rounds),
    };

    let split = select_check_bits(&transcript.sifted_indices, config)
        .and_then(|(check, key)| Ok((public_discussion(&transcript.rounds, &check)?, check, key)));
    let (qber, check, key) = match split {
        Ok(v) => v,
        Err(Error::AbortInsufficientSample { available, required }) => {
            transcript.abort = Some(AbortReason::InsufficientSample { available, required });
            return Ok(transcript);
        }
        Err(e) => return Err(e),
    };

    transcript.check_indices = check;
    transcript.estimated_qber = Some(qber);
    transcript.raw_key = key.iter().map(|&i| transcript.rounds[i].alice_bit).collect();
    if !key.is_empty() {
        let mismatched = key
            .iter()
            .filter(|&&i| transcript.rounds[i].alice_bit != transcript.rounds[i].bob_bit)
            .count();
        transcript.key_mismatch_rate = Some(mismatched as f64 / key.len() as f64);
    }

    if qber > config.qber_threshold {
        transcript.abort = Some(AbortReason::QberAboveThreshold {
            qber,
            threshold: config.qber_threshold,
        });
        return Ok(transcript);
    }
    transcript.accepted = true;

    if !transcript.raw_key.is_empty() {
        let len = output_length(transcript.raw_key.len(), qber, config.pa_security_margin)?;
        let mut rng = stream(config.master_seed, SESSION_STREAM, Party::PrivacyAmplification);
        let seed = ToeplitzSeed::random(transcript.raw_key.len(), len, &mut rng)?;
        transcript.final_key = privacy_amplify(&transcript.raw_key, qber, config, &seed)?;
    }
    transcript.qubit_efficiency = Ratio::new(transcript.final_key.len() as u64, 2 * config.n_rounds);
    Ok(transcript)
}

/// Monte-Carlo detection frequency of a fake-photon source. Each trial runs
/// rounds until `m` sifted results exist, compares all of them, and counts as
/// detected if any pair disagrees.
pub fn fake_photon_detection_frequency(
    strategy: &AttackStrategy,
    m: u32,
    trials: u64,
    config: &SessionConfig,
) -> Result<f64> {
    if !matches!(strategy, AttackStrategy::FakePhotonZ | AttackStrategy::FakePhotonX) {
        return Err(contract(format!("{} is not a fake-photon strategy", strategy.name())));
    }
    if trials == 0 {
        return Err(contract("at least one trial is required"));
    }
    if m > 0 && config.match_probability() <= 0.0 {
        return Err(contract("operator probabilities never produce sifted rounds"));
    }
    let detected = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let trial_seed = stream(config.master_seed, t, Party::Trial).next_u64();
            let trial_config = SessionConfig {
                master_seed: trial_seed,
                ..config.clone()
            };
            let mut compared = 0;
            let mut index = 0;
            while compared < m {
                let r = run_round(index, strategy, &trial_config)?;
                index += 1;
                if r.sifted() {
                    compared += 1;
                    if r.alice_bit != r.bob_bit {
                        return Ok(true);
                    }
                }
            }
            Ok(false)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&d| d)
        .count();
    Ok(detected as f64 / trials as f64)
}
