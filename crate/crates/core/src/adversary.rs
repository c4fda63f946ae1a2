//! Source and channel behaviours of a possibly dishonest third party.
//!
//! A strategy decides what joint state is handed to the two participants.
//! The collective attack entangles each pair with a 4-level probe,
//! `Σ a_i |b_i>|e_i>` over `b_i ∈ {00, 01, 10, 11}`; the fake-photon attacks
//! replace the Bell pair with a product pair; the noise strategy models a benign
//! channel by flipping Bob's measured bit.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::quantum_sim::{
    bell_phi_plus, hadamard, identity, measure_z, von_neumann_entropy, PureState, UnitaryGate,
};

/// Dimension of the third party's probe.
pub const ANCILLA_DIM: usize = 4;
/// Register layout used for every emitted state: Alice, Bob, probe.
pub const JOINT_DIMS: [usize; 3] = [2, 2, ANCILLA_DIM];

const PARAM_TOL: f64 = 1e-12;

/// Parameters of the entangling attack `Σ a_i |b_i>|e_i>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCollectiveParams", into = "RawCollectiveParams")]
pub struct CollectiveParams {
    a: [Complex64; 4],
    e: [[Complex64; ANCILLA_DIM]; 4],
}

/// JSON shape: `{"a": [[re, im]; 4], "e": [[[re, im]; 4]; 4]}`.
#[derive(Serialize, Deserialize)]
struct RawCollectiveParams {
    a: [[f64; 2]; 4],
    e: [[[f64; 2]; ANCILLA_DIM]; 4],
}

impl TryFrom<RawCollectiveParams> for CollectiveParams {
    type Error = crate::Error;

    fn try_from(raw: RawCollectiveParams) -> Result<Self> {
        let a = raw.a.map(|[re, im]| Complex64::new(re, im));
        let e = raw.e.map(|v| v.map(|[re, im]| Complex64::new(re, im)));
        CollectiveParams::new(a, e)
    }
}

impl From<CollectiveParams> for RawCollectiveParams {
    fn from(p: CollectiveParams) -> Self {
        RawCollectiveParams {
            a: p.a.map(|z| [z.re, z.im]),
            e: p.e.map(|v| v.map(|z| [z.re, z.im])),
        }
    }
}

impl CollectiveParams {
    /// Validates `Σ|a_i|² = 1` and that each `|e_i>` is normalized. The probe
    /// states need not be orthogonal.
    pub fn new(a: [Complex64; 4], e: [[Complex64; ANCILLA_DIM]; 4]) -> Result<Self> {
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !a.iter().all(finite) || !e.iter().flatten().all(finite) {
            return Err(contract("collective parameters must be finite"));
        }
        let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        if (total - 1.0).abs() > PARAM_TOL {
            return Err(contract(format!("sum of |a_i|^2 is {total}, expected 1")));
        }
        for (i, v) in e.iter().enumerate() {
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if (n - 1.0).abs() > PARAM_TOL {
                return Err(contract(format!("probe state e_{i} has norm^2 {n}")));
            }
        }
        Ok(Self { a, e })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain numeric structure serializes")
    }

    pub fn a(&self) -> &[Complex64; 4] {
        &self.a
    }

    pub fn e(&self) -> &[[Complex64; ANCILLA_DIM]; 4] {
        &self.e
    }

    /// The attack that leaves the pair untouched: `a_0 = a_3 = 1/√2`, both
    /// branches sharing the probe state `|0>`.
    pub fn no_disturbance() -> Self {
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::default();
        Self::new([r, z, z, r], unit_vectors()).expect("valid by construction")
    }

    /// Full-information attack: `a_0 = a_3 = 1/√2` with orthogonal `e_0`, `e_3`.
    pub fn full_information() -> Self {
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::default();
        let mut e = unit_vectors();
        e[3] = basis_vector(3);
        e[0] = basis_vector(0);
        Self::new([r, z, z, r], e).expect("valid by construction")
    }

    /// `Σ a_i |b_i>|e_i>` over Alice, Bob, probe.
    pub fn joint_state(&self) -> PureState {
        let mut amps = Vec::with_capacity(4 * ANCILLA_DIM);
        for (ai, ei) in self.a.iter().zip(&self.e) {
            amps.extend(ei.iter().map(|z| ai * z));
        }
        PureState::new(JOINT_DIMS.to_vec(), amps).expect("unit norm for valid parameters")
    }

    /// `Σ_i s_i a_i |e_i>` for a sign pattern `s`.
    fn branch(&self, signs: [f64; 4]) -> [Complex64; ANCILLA_DIM] {
        let mut out = [Complex64::default(); ANCILLA_DIM];
        for i in 0..4 {
            for (k, o) in out.iter_mut().enumerate() {
                *o += self.a[i] * self.e[i][k] * signs[i];
            }
        }
        out
    }
}

fn basis_vector(k: usize) -> [Complex64; ANCILLA_DIM] {
    let mut v = [Complex64::default(); ANCILLA_DIM];
    v[k] = Complex64::new(1.0, 0.0);
    v
}

fn unit_vectors() -> [[Complex64; ANCILLA_DIM]; 4] {
    [basis_vector(0); 4]
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// What the source does each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackStrategy {
    Honest,
    /// `|00>` or `|11>` in place of the Bell pair.
    FakePhotonZ,
    /// `|++>` or `|-->` in place of the Bell pair.
    FakePhotonX,
    Collective { params: CollectiveParams },
    /// Flips Bob's measured bit with the given probability.
    Noise { flip_prob: f64 },
}

impl AttackStrategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            AttackStrategy::Noise { flip_prob } if !(0.0..=1.0).contains(flip_prob) => Err(contract(
                format!("noise flip probability {flip_prob} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackStrategy::Honest => "honest",
            AttackStrategy::FakePhotonZ => "fake-z",
            AttackStrategy::FakePhotonX => "fake-x",
            AttackStrategy::Collective { .. } => "collective",
            AttackStrategy::Noise { .. } => "noise",
        }
    }

    /// Whether the third party ends a round holding a guess of the bits.
    pub fn guesses(&self) -> bool {
        matches!(
            self,
            AttackStrategy::FakePhotonZ | AttackStrategy::FakePhotonX | AttackStrategy::Collective { .. }
        )
    }
}

/// Side information the source keeps about what it emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceInfo {
    None,
    /// Which fake pair was sent: 0 for `|00>`/`|++>`, 1 for `|11>`/`|-->`.
    FakePair(u8),
    /// Whether Bob's bit is flipped in transit.
    BobFlip(bool),
}

/// Draws the joint Alice/Bob/probe state for one round.
pub fn emit_joint_state<R: Rng + ?Sized>(
    strategy: &AttackStrategy,
    rng: &mut R,
) -> Result<(PureState, SourceInfo)> {
    strategy.validate()?;
    let probe = PureState::basis(vec![ANCILLA_DIM], 0)?;
    Ok(match strategy {
        AttackStrategy::Honest => (bell_phi_plus().tensor(&probe), SourceInfo::None),
        AttackStrategy::Noise { flip_prob } => {
            let flip = rng.random_bool(*flip_prob);
            (bell_phi_plus().tensor(&probe), SourceInfo::BobFlip(flip))
        }
        AttackStrategy::FakePhotonZ => {
            let bit = u8::from(rng.random_bool(0.5));
            let pair = PureState::basis(vec![2, 2], if bit == 0 { 0 } else { 3 })?;
            (pair.tensor(&probe), SourceInfo::FakePair(bit))
        }
        AttackStrategy::FakePhotonX => {
            let bit = u8::from(rng.random_bool(0.5));
            // H⊗H maps |00> to |++> and |11> to |-->.
            let pair = PureState::basis(vec![2, 2], if bit == 0 { 0 } else { 3 })?
                .apply(&hadamard(), 0)?
                .apply(&hadamard(), 1)?;
            (pair.tensor(&probe), SourceInfo::FakePair(bit))
        }
        AttackStrategy::Collective { params } => (params.joint_state(), SourceInfo::None),
    })
}

/// The two operator pairs that survive sifting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiftedMode {
    /// Both participants apply I.
    Identity,
    /// Both participants apply H.
    Hadamard,
}

impl SiftedMode {
    pub const ALL: [SiftedMode; 2] = [SiftedMode::Identity, SiftedMode::Hadamard];

    fn gate(self) -> UnitaryGate {
        match self {
            SiftedMode::Identity => identity(2),
            SiftedMode::Hadamard => hadamard(),
        }
    }

    /// `state` with the mode's operator applied to both travel qubits.
    pub fn apply(self, state: &PureState) -> Result<PureState> {
        let g = self.gate();
        state.apply(&g, 0)?.apply(&g, 1)
    }
}

/// Probability that Alice's and Bob's bits differ in a sifted round of the
/// given mode, from the closed-form branch expansion.
pub fn collective_qber(params: &CollectiveParams, mode: SiftedMode) -> f64 {
    match mode {
        SiftedMode::Identity => {
            let p: Vec<f64> = params.a.iter().map(|z| z.norm_sqr()).collect();
            (p[1] + p[2]) / p.iter().sum::<f64>()
        }
        SiftedMode::Hadamard => {
            let b00 = norm_sqr(&params.branch([1.0, 1.0, 1.0, 1.0]));
            let b01 = norm_sqr(&params.branch([1.0, -1.0, 1.0, -1.0]));
            let b10 = norm_sqr(&params.branch([1.0, 1.0, -1.0, -1.0]));
            let b11 = norm_sqr(&params.branch([1.0, -1.0, -1.0, 1.0]));
            (b01 + b10) / (b00 + b01 + b10 + b11)
        }
    }
}

/// Holevo quantity between Alice's sifted bit and the probe, for one mode.
pub fn holevo_for_mode(params: &CollectiveParams, mode: SiftedMode) -> Result<f64> {
    let state = mode.apply(&params.joint_state())?;
    let average = state.reduced_density_matrix(2)?;
    let mut conditional = 0.0;
    for bit in 0..2 {
        let (p, post) = state.project(0, bit)?;
        if let Some(post) = post {
            conditional += p * von_neumann_entropy(&post.reduced_density_matrix(2)?);
        }
    }
    Ok((von_neumann_entropy(&average) - conditional).max(0.0))
}

/// Orthonormal probe basis obtained by Gram–Schmidt over `e_0..e_3` in index
/// order, completed with computational basis vectors. Rows of the returned
/// gate are the conjugated basis vectors, so applying it to the probe and
/// measuring in the computational basis realizes the projective measurement.
pub fn tp_measurement_basis(params: &CollectiveParams) -> Result<UnitaryGate> {
    let mut basis: Vec<[Complex64; ANCILLA_DIM]> = Vec::with_capacity(ANCILLA_DIM);
    let candidates = params.e.iter().copied().chain((0..ANCILLA_DIM).map(basis_vector));
    for v in candidates {
        if basis.len() == ANCILLA_DIM {
            break;
        }
        let mut w = v;
        // Two passes keep the result orthogonal to working precision.
        for _ in 0..2 {
            for u in &basis {
                let overlap: Complex64 = u.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                for (wk, uk) in w.iter_mut().zip(u) {
                    *wk -= overlap * uk;
                }
            }
        }
        let n = norm_sqr(&w).sqrt();
        if n > 1e-6 {
            basis.push(w.map(|z| z / n));
        }
    }
    let entries = basis.iter().flat_map(|u| u.iter().map(|z| z.conj())).collect();
    UnitaryGate::new(ANCILLA_DIM, entries)
}

/// Maximum-a-posteriori guesses of (Alice's bit, Bob's bit) for each probe
/// outcome, given the joint state with the probe already rotated into the
/// measurement basis. Ties resolve to 0.
pub fn guess_table(rotated: &PureState) -> [(u8, u8); ANCILLA_DIM] {
    let mut alice = [[0.0f64; 2]; ANCILLA_DIM];
    let mut bob = [[0.0f64; 2]; ANCILLA_DIM];
    for (idx, amp) in rotated.amps().iter().enumerate() {
        let j = idx % ANCILLA_DIM;
        let b = (idx / ANCILLA_DIM) % 2;
        let a = idx / (2 * ANCILLA_DIM);
        alice[j][a] += amp.norm_sqr();
        bob[j][b] += amp.norm_sqr();
    }
    let pick = |p: [f64; 2]| u8::from(p[1] > p[0]);
    std::array::from_fn(|j| (pick(alice[j]), pick(bob[j])))
}

/// Information the third party can extract from the collective attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub qber_ii: f64,
    pub qber_hh: f64,
    /// Mean of the two per-mode Holevo quantities.
    pub holevo_bits: f64,
    pub holevo_ii: f64,
    pub holevo_hh: f64,
    /// Fraction of sampled sifted rounds in which the probe measurement
    /// guessed Alice's bit correctly.
    pub empirical_guess_accuracy: f64,
}

pub fn leakage_report<R: Rng + ?Sized>(
    params: &CollectiveParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<LeakageReport> {
    let holevo_ii = holevo_for_mode(params, SiftedMode::Identity)?;
    let holevo_hh = holevo_for_mode(params, SiftedMode::Hadamard)?;

    let basis = tp_measurement_basis(params)?;
    let mut prepared = Vec::with_capacity(2);
    for mode in SiftedMode::ALL {
        let rotated = mode.apply(&params.joint_state())?.apply(&basis, 2)?;
        let table = guess_table(&rotated);
        prepared.push((rotated, table));
    }
    let mut correct = 0usize;
    for _ in 0..n_samples {
        let (state, table) = &prepared[usize::from(rng.random_bool(0.5))];
        let (alice_bit, post) = measure_z(state, 0, rng)?;
        let (_, post) = measure_z(&post, 1, rng)?;
        let (outcome, _) = measure_z(&post, 2, rng)?;
        if usize::from(table[outcome].0) == alice_bit {
            correct += 1;
        }
    }
    let empirical_guess_accuracy = if n_samples == 0 {
        0.5
    } else {
        correct as f64 / n_samples as f64
    };

    Ok(LeakageReport {
        qber_ii: collective_qber(params, SiftedMode::Identity),
        qber_hh: collective_qber(params, SiftedMode::Hadamard),
        holevo_bits: 0.5 * (holevo_ii + holevo_hh),
        holevo_ii,
        holevo_hh,
        empirical_guess_accuracy,
    })
}

/// Detection probability `1 - (1/4)^m` for a fake-photon source when `m`
/// measurement results are compared.
pub fn fake_photon_detection_prob(m: u32) -> f64 {
    1.0 - 0.25f64.powi(m as i32)
}

/// Detection probability when each of `m` sifted check bits independently
/// exposes a fake pair with probability 1/4 (revealing basis with
/// probability 1/2, then a mismatch with probability 1/2): `1 - (3/4)^m`.
pub fn fake_photon_detection_prob_per_check(m: u32) -> f64 {
    1.0 - 0.75f64.powi(m as i32)
}
