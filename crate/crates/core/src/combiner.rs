//! Combines several beacons' reveals into one challenge.
//!
//! Each beacon's reveal is checked against its earlier commitment and the
//! passing reveals are XORed. The result is unpredictable as long as one
//! contributing beacon is honest. Exclusion is decided per tick.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::beacon::{verify_against, BeaconArchive, BeaconEmission};
use crate::entropy::ChallengeBits;
use crate::hash::hex_bytes;
use crate::id::BeaconId;
use crate::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    /// The reveal does not hash to the earlier commitment.
    BadCommitment,
    /// The emission, or the one `delta` ticks before it, was never published.
    Gap,
    /// No reveal yet (warm-up), or a reveal withheld.
    NoReveal,
}

/// The combined challenge for one tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    pub t: Timestamp,
    #[serde(with = "hex_bytes")]
    pub value: Vec<u8>,
    pub contributors: BTreeSet<BeaconId>,
    pub excluded: BTreeMap<BeaconId, ExclusionReason>,
}

impl Challenge {
    /// The value zero-padded to the 32-byte chunk field.
    pub fn padded(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out[..self.value.len()].copy_from_slice(&self.value);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CombineError {
    #[error("no trustworthy challenge at tick {t}: every beacon was excluded")]
    NoTrustworthyChallenge {
        t: Timestamp,
        excluded: BTreeMap<BeaconId, ExclusionReason>,
    },
    #[error("archive of beacon {beacon} does not reach tick {t}")]
    InsufficientArchive { beacon: BeaconId, t: Timestamp },
    #[error("emission for tick {got} offered at tick {t}")]
    WrongTick { t: Timestamp, got: Timestamp },
}

/// One beacon's contribution at a tick: what arrived live (if anything) and
/// its archive for the commitment lookup.
#[derive(Debug, Clone, Copy)]
pub struct BeaconView<'a> {
    pub archive: &'a BeaconArchive,
    pub current: Option<&'a BeaconEmission>,
}

impl<'a> BeaconView<'a> {
    /// View whose current emission is read back from the archive.
    pub fn archived(archive: &'a BeaconArchive, t: Timestamp) -> Self {
        BeaconView {
            archive,
            current: archive.at(t),
        }
    }
}

fn assess(view: &BeaconView<'_>, width: ChallengeBits) -> Result<Vec<u8>, ExclusionReason> {
    let current = view.current.ok_or(ExclusionReason::Gap)?;
    let ok = verify_against(view.archive, current).map_err(|_| ExclusionReason::Gap)?;
    let reveal = current.reveal.as_ref().ok_or(ExclusionReason::NoReveal)?;
    if !ok || reveal.len() != width.bytes() {
        return Err(ExclusionReason::BadCommitment);
    }
    Ok(reveal.clone())
}

/// XOR of every reveal at `t` that matches its commitment.
pub fn combine_challenge(
    t: Timestamp,
    width: ChallengeBits,
    views: &[BeaconView<'_>],
) -> Result<Challenge, CombineError> {
    let mut value = vec![0u8; width.bytes()];
    let mut contributors = BTreeSet::new();
    let mut excluded = BTreeMap::new();
    for view in views {
        if let Some(e) = view.current {
            if e.t != t {
                return Err(CombineError::WrongTick { t, got: e.t });
            }
        }
        match assess(view, width) {
            Ok(reveal) => {
                value.iter_mut().zip(&reveal).for_each(|(v, r)| *v ^= r);
                contributors.insert(view.archive.id);
            }
            Err(reason) => {
                excluded.insert(view.archive.id, reason);
            }
        }
    }
    if contributors.is_empty() {
        return Err(CombineError::NoTrustworthyChallenge { t, excluded });
    }
    Ok(Challenge {
        t,
        value,
        contributors,
        excluded,
    })
}

/// Recomputes the challenge at `t` purely from published archives.
///
/// An archive that ends before `t` is insufficient; a hole inside an archive
/// is a stall and excludes that beacon, exactly as it did live.
pub fn challenge_of_record(
    t: Timestamp,
    width: ChallengeBits,
    archives: &[&BeaconArchive],
) -> Result<Challenge, CombineError> {
    for a in archives {
        if a.latest().is_none_or(|e| e.t < t) {
            return Err(CombineError::InsufficientArchive { beacon: a.id, t });
        }
    }
    let views: Vec<_> = archives
        .iter()
        .map(|a| BeaconView::archived(a, t))
        .collect();
    combine_challenge(t, width, &views)
}
