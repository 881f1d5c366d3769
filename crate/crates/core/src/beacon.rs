//! Precommitting random beacon.
//!
//! At each tick `t` the beacon draws a fresh secret `r(t)`, publishes its
//! digest, and releases the secret it committed to `delta` ticks earlier. One
//! emission is the triple `(t, digest(r(t)), r(t - delta))`; the reveal is
//! absent while nothing has been committed long enough.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::entropy::{EntropyError, TrgSource};
use crate::hash::{digest, hex_bytes_opt, Digest};
use crate::id::BeaconId;
use crate::Timestamp;

pub const DEFAULT_DELTA: u64 = 3;

/// One published triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeaconEmission {
    pub t: Timestamp,
    #[serde(rename = "commit")]
    pub commitment: Digest,
    #[serde(with = "hex_bytes_opt")]
    pub reveal: Option<Vec<u8>>,
}

/// Everything a beacon has published, in strictly increasing time order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconArchive {
    pub id: BeaconId,
    pub delta: u64,
    emissions: Vec<BeaconEmission>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BeaconError {
    #[error("tick {t} is not after the last step {last}")]
    NonMonotone { t: Timestamp, last: Timestamp },
    #[error("delta must be at least one tick")]
    ZeroDelta,
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("archive line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A required emission is missing from the archive: the beacon stalled, or
/// the archive is incomplete. Distinct from a failed commitment check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no emission archived at tick {missing}")]
pub struct Gap {
    pub missing: Timestamp,
}

impl BeaconArchive {
    pub fn new(id: BeaconId, delta: u64) -> Self {
        BeaconArchive {
            id,
            delta,
            emissions: Vec::new(),
        }
    }

    /// Builds an archive from already-published emissions, checking order.
    pub fn from_emissions(
        id: BeaconId,
        delta: u64,
        emissions: Vec<BeaconEmission>,
    ) -> Result<Self, BeaconError> {
        if delta == 0 {
            return Err(BeaconError::ZeroDelta);
        }
        for (i, w) in emissions.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(BeaconError::Parse {
                    line: i + 2,
                    msg: format!("timestamp {} not after {}", w[1].t, w[0].t),
                });
            }
        }
        Ok(BeaconArchive {
            id,
            delta,
            emissions,
        })
    }

    pub fn emissions(&self) -> &[BeaconEmission] {
        &self.emissions
    }

    pub fn at(&self, t: Timestamp) -> Option<&BeaconEmission> {
        self.emissions
            .binary_search_by_key(&t, |e| e.t)
            .ok()
            .map(|i| &self.emissions[i])
    }

    pub fn latest(&self) -> Option<&BeaconEmission> {
        self.emissions.last()
    }

    pub fn first_t(&self) -> Option<Timestamp> {
        self.emissions.first().map(|e| e.t)
    }

    /// Drops every emission after `t` (models an archive that ends early).
    pub fn truncate_after(&mut self, t: Timestamp) {
        self.emissions.retain(|e| e.t <= t);
    }

    /// Mutable access for fault injection in tests and simulations. Honest
    /// code paths never call this.
    pub fn emissions_mut(&mut self) -> &mut Vec<BeaconEmission> {
        &mut self.emissions
    }

    /// Serializes as JSON Lines, one emission per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.emissions {
            out.push_str(&serde_json::to_string(e).expect("emission serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(id: BeaconId, delta: u64, text: &str) -> Result<Self, BeaconError> {
        let emissions = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| BeaconError::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        BeaconArchive::from_emissions(id, delta, emissions)
    }

    /// Answers a service request against the archive.
    pub fn answer(&self, req: &BeaconRequest) -> Option<&BeaconEmission> {
        match req {
            BeaconRequest::Latest => self.latest(),
            BeaconRequest::At { t } => self.at(*t),
        }
    }
}

/// Requests understood by a beacon in service mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "req", rename_all = "lowercase")]
pub enum BeaconRequest {
    Latest,
    At { t: Timestamp },
}

/// Checks the reveal published at `t` against the commitment published at
/// `t - delta`.
///
/// Warm-up emissions (nothing committed `delta` ticks earlier, no reveal)
/// pass vacuously. A reveal withheld after warm-up fails.
pub fn verify_emission(archive: &BeaconArchive, t: Timestamp) -> Result<bool, Gap> {
    let current = archive.at(t).ok_or(Gap { missing: t })?;
    verify_against(archive, current)
}

/// As [`verify_emission`], for an emission received live rather than read
/// back from `archive`.
pub fn verify_against(archive: &BeaconArchive, current: &BeaconEmission) -> Result<bool, Gap> {
    let t = current.t;
    let first = archive.first_t().unwrap_or(t).min(t);
    let committed_at = match t.checked_sub(archive.delta) {
        Some(c) if c >= first => c,
        // Nothing could have been committed delta ticks ago.
        _ => return Ok(current.reveal.is_none()),
    };
    let earlier = archive.at(committed_at).ok_or(Gap {
        missing: committed_at,
    })?;
    Ok(match &current.reveal {
        Some(r) => digest(r) == earlier.commitment,
        None => false,
    })
}

/// Deviations from honest behaviour, for testing verifiers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BeaconFault {
    #[default]
    Honest,
    /// Reveals fresh strings unrelated to its commitments.
    Equivocator,
    /// Publishes nothing at the listed ticks.
    Staller { skip: BTreeSet<Timestamp> },
    /// Emits honestly but hands each secret to the adversary at commitment
    /// time. Undetectable from the emissions alone.
    Leaker,
}

/// A running beacon: single writer of its own archive.
#[derive(Debug, Clone)]
pub struct Beacon {
    trg: TrgSource,
    pending: VecDeque<(Timestamp, Vec<u8>)>,
    archive: BeaconArchive,
    fault: BeaconFault,
    last_step: Option<Timestamp>,
    leaks: Vec<(Timestamp, Vec<u8>)>,
}

impl Beacon {
    pub fn new(id: BeaconId, delta: u64, trg: TrgSource) -> Result<Self, BeaconError> {
        if delta == 0 {
            return Err(BeaconError::ZeroDelta);
        }
        Ok(Beacon {
            trg,
            pending: VecDeque::new(),
            archive: BeaconArchive::new(id, delta),
            fault: BeaconFault::Honest,
            last_step: None,
            leaks: Vec::new(),
        })
    }

    pub fn make_faulty(mut self, fault: BeaconFault) -> Self {
        self.fault = fault;
        self
    }

    pub fn id(&self) -> BeaconId {
        self.archive.id
    }

    pub fn delta(&self) -> u64 {
        self.archive.delta
    }

    pub fn fault(&self) -> &BeaconFault {
        &self.fault
    }

    pub fn archive(&self) -> &BeaconArchive {
        &self.archive
    }

    pub fn into_archive(self) -> BeaconArchive {
        self.archive
    }

    /// Secrets handed to the adversary, with the tick at which each leaked.
    pub fn leaks(&self) -> &[(Timestamp, Vec<u8>)] {
        &self.leaks
    }

    /// Advances to tick `t`. Returns the new emission, or `None` when a
    /// staller skips this tick.
    pub fn step(&mut self, t: Timestamp) -> Result<Option<&BeaconEmission>, BeaconError> {
        if let Some(last) = self.last_step {
            if t <= last {
                return Err(BeaconError::NonMonotone { t, last });
            }
        }
        if let BeaconFault::Staller { skip } = &self.fault {
            if skip.contains(&t) {
                self.last_step = Some(t);
                return Ok(None);
            }
        }
        let fresh = self.trg.draw()?;
        let extra = match self.fault {
            BeaconFault::Equivocator => Some(self.trg.draw()?),
            _ => None,
        };
        self.last_step = Some(t);

        let due = t.checked_sub(self.archive.delta);
        let mut reveal = None;
        while let Some((pt, _)) = self.pending.front() {
            match due {
                Some(d) if *pt < d => {
                    // Release tick was skipped; the secret is never published.
                    self.pending.pop_front();
                }
                Some(d) if *pt == d => {
                    reveal = self.pending.pop_front().map(|(_, r)| r);
                    break;
                }
                _ => break,
            }
        }
        if reveal.is_some() {
            if let Some(lie) = extra {
                reveal = Some(lie);
            }
        }

        if self.fault == BeaconFault::Leaker {
            self.leaks.push((t, fresh.clone()));
        }
        let emission = BeaconEmission {
            t,
            commitment: digest(&fresh),
            reveal,
        };
        self.pending.push_back((t, fresh));
        self.archive.emissions.push(emission);
        Ok(self.archive.emissions.last())
    }
}
