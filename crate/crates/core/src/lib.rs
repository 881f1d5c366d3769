//! Time-bracketed authentication of recordings.
//!
//! A recording is bracketed in time from both sides. Unpredictable beacon
//! output bound into every chunk shows the chunk was made *after* that output
//! appeared; the chunk's chain digest, published to independent
//! hash-and-publish logs, shows it existed *before* publication.
//!
//! - [`hash`], [`chain`], [`frame`]: digests, hash chain, canonical chunk bytes
//! - [`beacon`], [`combiner`]: precommitting beacons and challenge combining
//! - [`repository`]: hash-and-publish logs with majority verification
//! - [`recorder`], [`verifier`]: the recording pipeline and its checker
//! - [`discretion`]: per-segment encryption with unanimous-consent key shares
//! - [`simnet`]: deterministic discrete-event scenarios with adversaries

pub mod beacon;
pub mod chain;
pub mod combiner;
pub mod discretion;
pub mod entropy;
pub mod frame;
pub mod hash;
pub mod id;
pub mod recorder;
pub mod repository;
pub mod simnet;
pub mod verifier;

/// Simulator ticks in simulations, Unix-epoch milliseconds otherwise.
pub type Timestamp = u64;

pub use beacon::{verify_emission, Beacon, BeaconArchive, BeaconEmission, BeaconFault, Gap};
pub use chain::{chain_extend, ChainHead};
pub use combiner::{challenge_of_record, combine_challenge, Challenge, ExclusionReason};
pub use entropy::{ChallengeBits, Entropy, TrgSource};
pub use frame::{canonical_chunk_bytes, parse_chunk_bytes, Chunk};
pub use hash::{digest, truncate_hex64, Digest};
pub use id::{BeaconId, HapId, ParticipantId, SessionId};
pub use recorder::{Recorder, Recording, SessionConfig};
pub use repository::{hap_lookup, prepare_submission, verify_majority, HapLog, HapRecord};
pub use verifier::{bracket_report, BracketReport, Overall, TimeBracket};
