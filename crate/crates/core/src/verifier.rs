//! Reconstructs each chunk's time bracket from public data and detects
//! tampering.
//!
//! Past bracket: the chunk carries markers derived from a challenge that
//! nobody knew before its reveal tick, recomputed here from beacon archives.
//! Future bracket: the chunk's chain digest is held by a strict majority of
//! repository logs from some tick on. Missing public data degrades a verdict
//! to unverifiable; it is never reported as forgery.

use serde::{Deserialize, Serialize};

use crate::beacon::BeaconArchive;
use crate::combiner::{challenge_of_record, CombineError};
use crate::frame::canonical_chunk_bytes;
use crate::hash::Digest;
use crate::recorder::{markers_match, seal_submission, secondary_window, Recording};
use crate::repository::{holders, majority_quorum, prepare_submission, quorum_time, HapLog};
use crate::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Chain,
    Structure,
    Challenge,
    Markers,
    Future,
    Seal,
    Coupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Public data needed for the check is missing.
    Degraded,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    /// `None` for recording-wide checks.
    pub chunk: Option<u64>,
    pub check: Check,
    pub status: Status,
    pub detail: String,
}

impl Finding {
    fn new(chunk: Option<u64>, check: Check, status: Status, detail: impl Into<String>) -> Self {
        Finding {
            chunk,
            check,
            status,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Overall {
    Authentic,
    Tampered,
    Unverifiable,
}

impl Overall {
    /// Process exit status: 0 authentic, 1 tampered, 2 unverifiable.
    pub fn exit_code(self) -> i32 {
        match self {
            Overall::Authentic => 0,
            Overall::Tampered => 1,
            Overall::Unverifiable => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBracket {
    pub chunk_index: u64,
    /// The challenge's reveal tick: the chunk cannot predate it.
    pub t_past: Timestamp,
    /// First tick a strict majority of logs held the chunk's digest.
    pub t_future: Timestamp,
    pub width: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketReport {
    pub overall: Overall,
    pub findings: Vec<Finding>,
    pub brackets: Vec<TimeBracket>,
    pub max_width: Option<u64>,
    pub chunk_period: u64,
    /// Threshold used for the future bracket.
    pub quorum_rule: String,
}

/// Recomputes the chain and compares it to the stored digests. Returns the
/// first index that disagrees.
pub fn verify_chain(rec: &Recording) -> Result<(), u64> {
    let heads = rec.recompute_chain();
    let n = rec.chunks.len().max(rec.chain.len());
    for i in 0..n {
        match (heads.get(i), rec.chain.get(i)) {
            (Some(h), Some(d)) if h.digest == *d => {}
            _ => return Err(i as u64),
        }
    }
    Ok(())
}

/// Per-chunk outcome of one bracket side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideResult {
    pub chunk: u64,
    pub check: Check,
    pub status: Status,
    pub t: Option<Timestamp>,
    pub detail: String,
}

/// Recomputes every chunk's challenge from the archives and checks it and
/// the embedded markers.
pub fn verify_past(rec: &Recording, archives: &[&BeaconArchive]) -> Vec<SideResult> {
    let cfg = &rec.header.config;
    let matched: Option<Vec<&BeaconArchive>> = cfg
        .beacons
        .iter()
        .map(|b| archives.iter().copied().find(|a| a.id == b.id))
        .collect();
    rec.chunks
        .iter()
        .map(|c| {
            let result = |status, t, detail: String| SideResult {
                chunk: c.index,
                check: Check::Challenge,
                status,
                t,
                detail,
            };
            let Some(matched) = matched.as_ref() else {
                return result(Status::Degraded, None, "beacon archive missing".into());
            };
            let expected = match challenge_of_record(c.challenge_time, cfg.challenge_bits, matched)
            {
                Ok(ch) => ch,
                Err(e @ CombineError::InsufficientArchive { .. }) => {
                    return result(Status::Degraded, None, e.to_string());
                }
                Err(e) => return result(Status::Fail, None, e.to_string()),
            };
            if expected.padded() != c.challenge {
                return result(
                    Status::Fail,
                    None,
                    "challenge differs from beacon record".into(),
                );
            }
            if !markers_match(&c.payload, &c.challenge, c.index, cfg) {
                return SideResult {
                    check: Check::Markers,
                    ..result(
                        Status::Fail,
                        None,
                        "embedded markers do not match challenge".into(),
                    )
                };
            }
            result(Status::Pass, Some(c.challenge_time), String::new())
        })
        .collect()
}

/// The logs named in the header that were supplied, one per name.
fn named_logs<'a>(rec: &Recording, logs: &[&'a HapLog]) -> Vec<&'a HapLog> {
    rec.header
        .config
        .repositories
        .iter()
        .filter_map(|id| logs.iter().copied().find(|l| l.id == *id))
        .collect()
}

fn future_status(logs: &[&HapLog], m: usize, s: &Digest) -> (Status, Option<Timestamp>, String) {
    if logs.is_empty() {
        return (Status::Degraded, None, "no repository logs".into());
    }
    if let Some(t) = quorum_time(logs, m, s) {
        return (Status::Pass, Some(t), String::new());
    }
    match holders(logs, s) {
        // A majority of the deployment was consulted and none holds it.
        0 if logs.len() >= majority_quorum(m) => {
            (Status::Fail, None, "digest published nowhere".into())
        }
        n => (
            Status::Degraded,
            None,
            format!(
                "digest held by {n} of {} logs ({} supplied), short of a majority",
                m,
                logs.len()
            ),
        ),
    }
}

/// Looks up each recomputed chain digest in the logs named by the header.
///
/// Pass when a strict majority of the named repositories holds it; degraded when some but not a
/// majority do (repository outage); fail when none do (the digest was
/// never published).
pub fn verify_future(rec: &Recording, logs: &[&HapLog]) -> Vec<SideResult> {
    let logs = named_logs(rec, logs);
    let m = rec.header.config.repositories.len();
    rec.recompute_chain()
        .iter()
        .zip(&rec.chunks)
        .map(|(head, c)| {
            let s = prepare_submission(head.digest.as_bytes());
            let (status, t, detail) = future_status(&logs, m, &s);
            SideResult {
                chunk: c.index,
                check: Check::Future,
                status,
                t,
                detail,
            }
        })
        .collect()
}

/// Checks the closing seal, which fixes the chunk count.
pub fn verify_seal(rec: &Recording, logs: &[&HapLog]) -> (Status, String) {
    let heads = rec.recompute_chain();
    let Some(last) = heads.last() else {
        return (Status::Fail, "recording has no chunks".into());
    };
    let (status, _, detail) = future_status(
        &named_logs(rec, logs),
        rec.header.config.repositories.len(),
        &seal_submission(last),
    );
    (status, detail)
}

/// Recomputes each chunk's secondary-stream digest from `track`.
pub fn verify_coupling(rec: &Recording, track: &[u8]) -> Vec<(u64, Status)> {
    rec.chunks
        .iter()
        .map(|c| {
            if !rec.header.config.coupling_enabled {
                return (c.index, Status::NotApplicable);
            }
            let window = secondary_window(track, &rec.header, c.t_start, c.t_end);
            let ok = c.coupling_digest == Some(crate::hash::digest(window));
            (c.index, if ok { Status::Pass } else { Status::Fail })
        })
        .collect()
}

fn structure(rec: &Recording) -> Vec<Finding> {
    let period = rec.header.config.chunk_period;
    let sid = rec.header.config.session_id;
    let mut out = Vec::new();
    for (pos, c) in rec.chunks.iter().enumerate() {
        let mut problems = Vec::new();
        if c.index != pos as u64 {
            problems.push(format!("index {} at position {pos}", c.index));
        }
        if c.t_end != c.t_start.saturating_add(period) || c.t_start < rec.header.start_time {
            problems.push("interval does not match session period".to_string());
        }
        if !(c.t_start <= c.challenge_time && c.challenge_time <= c.t_end) {
            problems.push("challenge time outside chunk interval".to_string());
        }
        if let Some(prev) = pos.checked_sub(1).map(|p| &rec.chunks[p]) {
            if c.t_start < prev.t_end {
                problems.push("overlaps previous chunk".to_string());
            }
        }
        if canonical_chunk_bytes(&sid, c).is_err() {
            problems.push("chunk cannot be framed".to_string());
        }
        if !problems.is_empty() {
            out.push(Finding::new(
                Some(pos as u64),
                Check::Structure,
                Status::Fail,
                problems.join("; "),
            ));
        }
    }
    out
}

/// Runs every check and assembles the verdict and per-chunk brackets.
///
/// `track` is the secondary stream; when absent, coupling is not checked.
pub fn bracket_report(
    rec: &Recording,
    archives: &[&BeaconArchive],
    logs: &[&HapLog],
    track: Option<&[u8]>,
) -> BracketReport {
    let mut findings = structure(rec);
    let chain_ok_below = match verify_chain(rec) {
        Ok(()) => {
            findings.push(Finding::new(None, Check::Chain, Status::Pass, ""));
            rec.chunks.len() as u64
        }
        Err(i) => {
            findings.push(Finding::new(
                Some(i),
                Check::Chain,
                Status::Fail,
                "stored chain digest does not match recomputation",
            ));
            i
        }
    };

    let past = verify_past(rec, archives);
    let future = verify_future(rec, logs);
    for r in past.iter().chain(&future) {
        findings.push(Finding::new(
            Some(r.chunk),
            r.check,
            r.status,
            r.detail.clone(),
        ));
    }
    if !rec.chunks.is_empty() {
        let (status, detail) = verify_seal(rec, logs);
        findings.push(Finding::new(None, Check::Seal, status, detail));
    } else {
        findings.push(Finding::new(
            None,
            Check::Seal,
            Status::Fail,
            "recording has no chunks",
        ));
    }
    if let Some(track) = track {
        for (i, status) in verify_coupling(rec, track) {
            findings.push(Finding::new(Some(i), Check::Coupling, status, ""));
        }
    }

    let failed_chunks: std::collections::BTreeSet<u64> = findings
        .iter()
        .filter(|f| f.status == Status::Fail)
        .filter_map(|f| f.chunk)
        .collect();
    let brackets: Vec<TimeBracket> = past
        .iter()
        .zip(&future)
        .filter(|(p, _)| p.chunk < chain_ok_below && !failed_chunks.contains(&p.chunk))
        .filter_map(|(p, f)| {
            let (t_past, t_future) = (p.t?, f.t?);
            Some(TimeBracket {
                chunk_index: p.chunk,
                t_past,
                t_future,
                width: t_future.saturating_sub(t_past),
            })
        })
        .collect();

    let overall = if findings.iter().any(|f| f.status == Status::Fail) {
        Overall::Tampered
    } else if findings.iter().any(|f| f.status == Status::Degraded) {
        Overall::Unverifiable
    } else {
        Overall::Authentic
    };
    BracketReport {
        overall,
        max_width: brackets.iter().map(|b| b.width).max(),
        brackets,
        findings,
        chunk_period: rec.header.config.chunk_period,
        quorum_rule: format!(
            "strict majority of {} logs",
            rec.header.config.repositories.len()
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Overall::Authentic.exit_code(), 0);
        assert_eq!(Overall::Tampered.exit_code(), 1);
        assert_eq!(Overall::Unverifiable.exit_code(), 2);
    }

    #[test]
    fn overall_serializes_kebab() {
        assert_eq!(
            serde_json::to_string(&Overall::Unverifiable).unwrap(),
            "\"unverifiable\""
        );
        assert_eq!(serde_json::to_string(&Check::Future).unwrap(), "\"future\"");
    }
}
