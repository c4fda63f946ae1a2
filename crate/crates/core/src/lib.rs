//! Exact simulator and security analysis for a lightweight mediated
//! semi-quantum key distribution protocol.
//!
//! A possibly dishonest third party distributes `|Φ+>` pairs; Alice and Bob
//! can only apply H or I and measure in the Z basis. Rounds where their
//! operators agree give correlated bits, part of which are compared publicly
//! to estimate the error rate before privacy amplification.
//!
//! * [`quantum_sim`]: state vectors, gates, density matrices and entropies.
//! * [`adversary`]: source strategies (honest, fake photons, collective
//!   entangling attack, noise) and leakage quantification.
//! * [`protocol`]: rounds, sifting, check-bit selection, sessions.
//! * [`privacy`]: Toeplitz-hash privacy amplification.
//! * [`keyrate`]: the collective-attack key-rate bound and its threshold.
//! * [`transcript`]: JSON session transcripts.

pub mod adversary;
pub mod error;
pub mod keyrate;
pub mod privacy;
pub mod protocol;
pub mod quantum_sim;
pub mod rng;
pub mod transcript;

pub use adversary::{AttackStrategy, CollectiveParams, LeakageReport, SiftedMode};
pub use error::{Error, Result};
pub use keyrate::{KeyRatePoint, LambdaVector};
pub use protocol::{OperatorChoice, RoundRecord, SessionConfig, SessionTranscript};
pub use transcript::TranscriptDocument;
