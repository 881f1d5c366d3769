//! Hash-and-publish repositories.
//!
//! A client hashes its content locally and submits only that digest `s`. The
//! repository publishes `(t, digest(s))` in an append-only log, so the log
//! never holds anything but 32-byte digests. Evidence that `s` existed by
//! time `t` is a strict majority of independent logs holding it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::hash::{digest, Digest};
use crate::id::HapId;
use crate::Timestamp;

/// One published pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HapRecord {
    pub t: Timestamp,
    pub v: Digest,
}

/// Which submissions a dropping repository discards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropRule {
    All,
    /// Zero-based sequence numbers of submissions to discard.
    Submissions(BTreeSet<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HapFault {
    #[default]
    Honest,
    /// Silently discards the configured submissions.
    Dropper { drop: DropRule },
    /// Appends honestly, but may edit its log afterwards.
    Rewriter,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RepoError {
    #[error("submission at {t} precedes last record at {last}")]
    NonMonotone { t: Timestamp, last: Timestamp },
    #[error("repository {0} is not configured to rewrite")]
    NotRewriter(HapId),
    #[error("log line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// An append-only publication log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HapLog {
    pub id: HapId,
    fault: HapFault,
    records: Vec<HapRecord>,
    last_t: Option<Timestamp>,
    submissions: u64,
}

/// The client-side pre-hash: the only value that ever leaves the client.
pub fn prepare_submission(content: &[u8]) -> Digest {
    digest(content)
}

impl HapLog {
    pub fn new(id: HapId) -> Self {
        HapLog {
            id,
            fault: HapFault::Honest,
            records: Vec::new(),
            last_t: None,
            submissions: 0,
        }
    }

    pub fn with_fault(mut self, fault: HapFault) -> Self {
        self.fault = fault;
        self
    }

    pub fn fault(&self) -> &HapFault {
        &self.fault
    }

    pub fn records(&self) -> &[HapRecord] {
        &self.records
    }

    /// Publishes `(t_now, digest(s))`, or silently drops it if faulty.
    pub fn submit(&mut self, s: &Digest, t_now: Timestamp) -> Result<Option<HapRecord>, RepoError> {
        if let Some(last) = self.last_t {
            if t_now < last {
                return Err(RepoError::NonMonotone { t: t_now, last });
            }
        }
        let seq = self.submissions;
        self.submissions += 1;
        if let HapFault::Dropper { drop } = &self.fault {
            let dropped = match drop {
                DropRule::All => true,
                DropRule::Submissions(set) => set.contains(&seq),
            };
            if dropped {
                return Ok(None);
            }
        }
        let record = HapRecord {
            t: t_now,
            v: digest(s.as_bytes()),
        };
        self.records.push(record);
        self.last_t = Some(t_now);
        Ok(Some(record))
    }

    /// Earliest publication time of `v`.
    pub fn lookup(&self, v: &Digest) -> Option<Timestamp> {
        self.records.iter().filter(|r| r.v == *v).map(|r| r.t).min()
    }

    /// Deletes every record of `v`. Only a rewriter can do this.
    pub fn rewrite_remove(&mut self, v: &Digest) -> Result<usize, RepoError> {
        self.require_rewriter()?;
        let before = self.records.len();
        self.records.retain(|r| r.v != *v);
        Ok(before - self.records.len())
    }

    /// Overwrites the record at `index`. Only a rewriter can do this.
    pub fn rewrite_replace(&mut self, index: usize, record: HapRecord) -> Result<(), RepoError> {
        self.require_rewriter()?;
        if let Some(slot) = self.records.get_mut(index) {
            *slot = record;
        }
        Ok(())
    }

    fn require_rewriter(&self) -> Result<(), RepoError> {
        match self.fault {
            HapFault::Rewriter => Ok(()),
            _ => Err(RepoError::NotRewriter(self.id)),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Loads a published log. Timestamps must be non-decreasing.
    pub fn from_jsonl(id: HapId, text: &str) -> Result<Self, RepoError> {
        let mut log = HapLog::new(id);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: HapRecord = serde_json::from_str(line).map_err(|e| RepoError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if log.last_t.is_some_and(|last| r.t < last) {
                return Err(RepoError::Parse {
                    line: i + 1,
                    msg: format!("timestamp {} decreases", r.t),
                });
            }
            log.last_t = Some(r.t);
            log.records.push(r);
        }
        log.submissions = log.records.len() as u64;
        Ok(log)
    }

    pub fn answer(&mut self, req: &HapRequest, t_now: Timestamp) -> Result<HapResponse, RepoError> {
        Ok(match req {
            HapRequest::Submit { s } => match self.submit(s, t_now)? {
                Some(r) => HapResponse::Receipt { t: r.t, v: r.v },
                None => HapResponse::NotFound,
            },
            HapRequest::Lookup { v } => match self.lookup(v) {
                Some(t) => HapResponse::Found { t },
                None => HapResponse::NotFound,
            },
        })
    }
}

/// Requests understood by a repository in service mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "req", rename_all = "lowercase")]
pub enum HapRequest {
    Submit { s: Digest },
    Lookup { v: Digest },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HapResponse {
    Receipt { t: Timestamp, v: Digest },
    Found { t: Timestamp },
    NotFound,
}

pub fn hap_submit(
    log: &mut HapLog,
    s: &Digest,
    t_now: Timestamp,
) -> Result<Option<HapRecord>, RepoError> {
    log.submit(s, t_now)
}

pub fn hap_lookup(log: &HapLog, v: &Digest) -> Option<Timestamp> {
    log.lookup(v)
}

/// Number of logs that constitute a strict majority of `m`.
pub fn majority_quorum(m: usize) -> usize {
    m / 2 + 1
}

/// True iff strictly more than half of `logs` published `digest(s)` no later
/// than `t_max`.
pub fn verify_majority(logs: &[&HapLog], s: &Digest, t_max: Timestamp) -> bool {
    majority_time(logs, s).is_some_and(|t| t <= t_max)
}

/// Earliest instant at which a strict majority of `logs` held `digest(s)`:
/// the quorum-th smallest per-log earliest timestamp.
pub fn majority_time(logs: &[&HapLog], s: &Digest) -> Option<Timestamp> {
    quorum_time(logs, logs.len(), s)
}

/// As [`majority_time`], for a deployment of `m` logs of which only `logs`
/// are available. Unavailable logs count as not holding the digest.
pub fn quorum_time(logs: &[&HapLog], m: usize, s: &Digest) -> Option<Timestamp> {
    if m == 0 {
        return None;
    }
    let v = digest(s.as_bytes());
    let mut times: Vec<Timestamp> = logs.iter().filter_map(|l| l.lookup(&v)).collect();
    times.sort_unstable();
    times.get(majority_quorum(m) - 1).copied()
}

/// How many of `logs` hold `digest(s)` at all.
pub fn holders(logs: &[&HapLog], s: &Digest) -> usize {
    let v = digest(s.as_bytes());
    logs.iter().filter(|l| l.lookup(&v).is_some()).count()
}

/// First position at which `log` and its `mirror` disagree, if any.
pub fn find_divergence(log: &HapLog, mirror: &HapLog) -> Option<usize> {
    let (a, b) = (log.records(), mirror.records());
    a.iter()
        .zip(b)
        .position(|(x, y)| x != y)
        .or_else(|| (a.len() != b.len()).then_some(a.len().min(b.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logs(n: u64) -> Vec<HapLog> {
        (0..n).map(|i| HapLog::new(HapId::from_index(i))).collect()
    }

    #[test]
    fn published_value_is_double_hash() {
        let s = prepare_submission(b"content");
        assert_eq!(s, digest(b"content"));
        let mut log = HapLog::new(HapId::default());
        let r = log.submit(&s, 4).unwrap().unwrap();
        assert_eq!(r.v, digest(digest(b"content").as_bytes()));
        assert_eq!(log.lookup(&r.v), Some(4));
    }

    #[test]
    fn duplicates_append_and_earliest_wins() {
        let s = digest(b"x");
        let mut log = HapLog::new(HapId::default());
        log.submit(&s, 5).unwrap();
        log.submit(&s, 9).unwrap();
        assert_eq!(log.records().len(), 2);
        assert_eq!(log.lookup(&digest(s.as_bytes())), Some(5));
        assert_eq!(log.lookup(&digest(b"never")), None);
    }

    #[test]
    fn non_monotone_rejected() {
        let mut log = HapLog::new(HapId::default());
        log.submit(&Digest::ZERO, 5).unwrap();
        assert_eq!(
            log.submit(&Digest::ZERO, 4),
            Err(RepoError::NonMonotone { t: 4, last: 5 })
        );
    }

    #[test]
    fn dropper_drops_configured() {
        let mut all = HapLog::new(HapId::default()).with_fault(HapFault::Dropper {
            drop: DropRule::All,
        });
        assert_eq!(all.submit(&Digest::ZERO, 1).unwrap(), None);
        assert!(all.records().is_empty());

        let some = DropRule::Submissions([1].into_iter().collect());
        let mut log = HapLog::new(HapId::default()).with_fault(HapFault::Dropper { drop: some });
        assert!(log.submit(&Digest::ZERO, 1).unwrap().is_some());
        assert!(log.submit(&Digest::ZERO, 2).unwrap().is_none());
        assert!(log.submit(&Digest::ZERO, 3).unwrap().is_some());
    }

    #[test]
    fn rewriter_can_delete_honest_cannot() {
        let s = digest(b"x");
        let v = digest(s.as_bytes());
        let mut honest = HapLog::new(HapId::from_index(1));
        honest.submit(&s, 1).unwrap();
        assert!(matches!(
            honest.rewrite_remove(&v),
            Err(RepoError::NotRewriter(_))
        ));

        let mut rw = HapLog::new(HapId::from_index(2)).with_fault(HapFault::Rewriter);
        rw.submit(&s, 1).unwrap();
        let mirror = rw.clone();
        assert_eq!(rw.rewrite_remove(&v), Ok(1));
        assert_eq!(rw.lookup(&v), None);
        assert_eq!(find_divergence(&rw, &mirror), Some(0));
        assert_eq!(find_divergence(&mirror, &mirror.clone()), None);
    }

    #[test]
    fn majority_examples() {
        let s = digest(b"doc");
        let mut ls = logs(5);
        for l in &mut ls {
            l.submit(&s, 3).unwrap();
        }
        let refs: Vec<_> = ls.iter().collect();
        assert!(verify_majority(&refs, &s, 3));
        assert!(!verify_majority(&refs, &s, 2));
        assert!(!verify_majority(&[], &s, 100));
    }

    #[test]
    fn majority_time_is_quorum_th_earliest() {
        let s = digest(b"doc");
        let mut ls = logs(5);
        for (l, t) in ls.iter_mut().zip([9, 2, 7, 4, 30]) {
            l.submit(&s, t).unwrap();
        }
        let refs: Vec<_> = ls.iter().collect();
        assert_eq!(majority_time(&refs, &s), Some(7));
        assert_eq!(majority_quorum(4), 3);
        assert_eq!(majority_quorum(1), 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut log = HapLog::new(HapId::default());
        log.submit(&digest(b"a"), 1).unwrap();
        log.submit(&digest(b"b"), 2).unwrap();
        let text = log.to_jsonl();
        assert!(text.starts_with("{\"t\":1,\"v\":\""));
        let back = HapLog::from_jsonl(HapId::default(), &text).unwrap();
        assert_eq!(back.records(), log.records());
    }

    #[test]
    fn service_requests() {
        let mut log = HapLog::new(HapId::default());
        let s = digest(b"a");
        let req: HapRequest =
            serde_json::from_str(&format!(r#"{{"req":"submit","s":"{}"}}"#, s)).unwrap();
        let receipt = log.answer(&req, 11).unwrap();
        let v = digest(s.as_bytes());
        assert_eq!(receipt, HapResponse::Receipt { t: 11, v });
        assert_eq!(
            serde_json::to_string(&receipt).unwrap(),
            format!(r#"{{"t":11,"v":"{v}"}}"#)
        );
        let found = log.answer(&HapRequest::Lookup { v }, 12).unwrap();
        assert_eq!(serde_json::to_string(&found).unwrap(), r#"{"t":11}"#);
        let missing = log.answer(&HapRequest::Lookup { v: s }, 12).unwrap();
        assert_eq!(missing, HapResponse::NotFound);
    }
}
