//! Discreet recordings: encrypted segments that open only with every
//! participant's consent, or by court override.
//!
//! The session timeline is cut into segments at every change of who is
//! present. Each segment gets a fresh key, split into XOR shares, one per
//! participant; any proper subset of shares is independent of the key. A
//! separate per-segment escrow blob lets a court key open a segment alone.
//!
//! The keystream is SHA-256 in counter mode so the whole crate rests on one
//! primitive. Deployments wanting a vetted cipher should swap it here.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::entropy::{Entropy, EntropyError};
use crate::hash::{digest_parts, hex32, Digest};
use crate::id::ParticipantId;
use crate::recorder::{bind_challenge, Recording};
use crate::Timestamp;

pub type SegmentId = u64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiscretionError {
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("a key must be shared among at least one participant")]
    NoParticipants,
    #[error("presence log is empty")]
    EmptyPresence,
    #[error("presence log is not sorted by time")]
    UnsortedPresence,
    #[error("insufficient or corrupted shares")]
    InsufficientOrCorrupted,
    #[error("no key supplied for segment {0}")]
    MissingKey(SegmentId),
    #[error("chunk at tick {0} lies in no segment")]
    Uncovered(Timestamp),
}

/// A per-segment encryption key with its public checksum.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentKey {
    #[serde(with = "hex32")]
    pub key: [u8; 32],
    pub segment_id: SegmentId,
    pub checksum: Digest,
}

impl std::fmt::Debug for SegmentKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SegmentKey")
            .field("segment_id", &self.segment_id)
            .field("checksum", &self.checksum)
            .finish_non_exhaustive()
    }
}

pub fn key_checksum(key: &[u8; 32], segment_id: SegmentId) -> Digest {
    digest_parts(&[key, &segment_id.to_be_bytes()])
}

impl SegmentKey {
    pub fn from_bytes(key: [u8; 32], segment_id: SegmentId) -> Self {
        SegmentKey {
            key,
            segment_id,
            checksum: key_checksum(&key, segment_id),
        }
    }
}

pub fn gen_segment_key(
    segment_id: SegmentId,
    entropy: &mut Entropy,
) -> Result<SegmentKey, DiscretionError> {
    Ok(SegmentKey::from_bytes(entropy.bytes()?, segment_id))
}

/// Keystream block `i`: `digest(key || segment_id || i)`.
fn keystream_block(k: &SegmentKey, i: u64) -> Digest {
    digest_parts(&[&k.key, &k.segment_id.to_be_bytes(), &i.to_be_bytes()])
}

/// XORs `data` with the segment keystream starting at byte `offset`.
pub fn apply_keystream(k: &SegmentKey, offset: u64, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    let mut block = (u64::MAX, Digest::ZERO);
    for (pos, b) in (offset..).zip(data) {
        let (i, within) = (pos / 32, (pos % 32) as usize);
        if block.0 != i {
            block = (i, keystream_block(k, i));
        }
        out.push(b ^ block.1 .0[within]);
    }
    out
}

/// Encrypts (or, identically, decrypts) a whole segment.
pub fn encrypt_segment(k: &SegmentKey, plaintext: &[u8]) -> Vec<u8> {
    apply_keystream(k, 0, plaintext)
}

/// One participant's share of one segment key.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub participant: ParticipantId,
    pub segment: SegmentId,
    #[serde(with = "hex32")]
    pub value: [u8; 32],
}

impl std::fmt::Debug for Share {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Share")
            .field("participant", &self.participant)
            .field("segment", &self.segment)
            .finish_non_exhaustive()
    }
}

/// Splits `secret` into `n` XOR shares: `n - 1` random, the last completing
/// the XOR. Works at any width.
pub fn xor_split(
    secret: &[u8],
    n: usize,
    entropy: &mut Entropy,
) -> Result<Vec<Vec<u8>>, DiscretionError> {
    if n == 0 {
        return Err(DiscretionError::NoParticipants);
    }
    let mut shares = Vec::with_capacity(n);
    let mut last = secret.to_vec();
    for _ in 1..n {
        let mut s = vec![0u8; secret.len()];
        entropy.fill(&mut s)?;
        last.iter_mut().zip(&s).for_each(|(l, x)| *l ^= x);
        shares.push(s);
    }
    shares.push(last);
    Ok(shares)
}

/// XOR of all `shares`, all of width `width`.
pub fn xor_combine<'a, I: IntoIterator<Item = &'a [u8]>>(shares: I, width: usize) -> Vec<u8> {
    let mut out = vec![0u8; width];
    for s in shares {
        out.iter_mut().zip(s).for_each(|(o, x)| *o ^= x);
    }
    out
}

pub fn split_key(
    k: &SegmentKey,
    participants: &[ParticipantId],
    entropy: &mut Entropy,
) -> Result<Vec<Share>, DiscretionError> {
    let values = xor_split(&k.key, participants.len(), entropy)?;
    Ok(participants
        .iter()
        .zip(values)
        .map(|(p, v)| Share {
            participant: *p,
            segment: k.segment_id,
            value: v.try_into().expect("32-byte share"),
        })
        .collect())
}

/// XORs the shares and accepts the result only if it matches the segment's
/// key checksum. Missing, extra, or altered shares are indistinguishable.
pub fn reconstruct_key(
    shares: &[Share],
    expected: &AccessRecord,
) -> Result<SegmentKey, DiscretionError> {
    if shares.iter().any(|s| s.segment != expected.segment_id) {
        return Err(DiscretionError::InsufficientOrCorrupted);
    }
    let key: [u8; 32] = xor_combine(shares.iter().map(|s| s.value.as_slice()), 32)
        .try_into()
        .expect("32 bytes");
    let k = SegmentKey::from_bytes(key, expected.segment_id);
    if k.checksum != expected.key_checksum {
        return Err(DiscretionError::InsufficientOrCorrupted);
    }
    Ok(k)
}

fn escrow_pad(court_key: &[u8; 32], segment_id: SegmentId) -> Digest {
    digest_parts(&[court_key, &segment_id.to_be_bytes()])
}

pub fn court_escrow(k: &SegmentKey, court_key: &[u8; 32]) -> [u8; 32] {
    let pad = escrow_pad(court_key, k.segment_id);
    std::array::from_fn(|i| k.key[i] ^ pad.0[i])
}

/// Opens an escrow blob. `expected_checksum` rejects a wrong court key.
pub fn court_open(
    blob: &[u8; 32],
    segment_id: SegmentId,
    court_key: &[u8; 32],
    expected_checksum: &Digest,
) -> Result<SegmentKey, DiscretionError> {
    let pad = escrow_pad(court_key, segment_id);
    let k = SegmentKey::from_bytes(std::array::from_fn(|i| blob[i] ^ pad.0[i]), segment_id);
    if &k.checksum != expected_checksum {
        return Err(DiscretionError::InsufficientOrCorrupted);
    }
    Ok(k)
}

/// Public metadata of one segment: who must consent, and how to check the
/// reconstructed key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub segment_id: SegmentId,
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub participants: BTreeSet<ParticipantId>,
    pub key_checksum: Digest,
    #[serde(with = "hex32")]
    pub court_escrow: [u8; 32],
}

/// A maximal interval with a constant, non-empty set of people present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub participants: BTreeSet<ParticipantId>,
}

/// Segments and unrecordable (empty-room) intervals of a session.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionPlan {
    pub segments: Vec<Segment>,
    pub gaps: Vec<(Timestamp, Timestamp)>,
}

/// Cuts `[first entry, session_end)` at every change of the present set.
pub fn segment_session(
    presence: &[(Timestamp, BTreeSet<ParticipantId>)],
    session_end: Timestamp,
) -> Result<SessionPlan, DiscretionError> {
    if presence.is_empty() {
        return Err(DiscretionError::EmptyPresence);
    }
    if presence.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(DiscretionError::UnsortedPresence);
    }
    let mut runs: Vec<(Timestamp, &BTreeSet<ParticipantId>)> = Vec::new();
    for (t, set) in presence {
        match runs.last_mut() {
            Some((_, last)) if *last == set => {}
            Some((start, last)) if *start == *t => *last = set,
            _ => runs.push((*t, set)),
        }
    }
    let mut plan = SessionPlan::default();
    for (i, (start, set)) in runs.iter().enumerate() {
        let end = runs.get(i + 1).map(|r| r.0).unwrap_or(session_end);
        if end <= *start {
            continue;
        }
        if set.is_empty() {
            plan.gaps.push((*start, end));
        } else {
            plan.segments.push(Segment {
                t_start: *start,
                t_end: end,
                participants: (*set).clone(),
            });
        }
    }
    Ok(plan)
}

/// Seals a session's chunks under per-segment keys.
pub struct SessionSealer {
    records: Vec<AccessRecord>,
    keys: Vec<SegmentKey>,
    offsets: Vec<u64>,
}

impl SessionSealer {
    /// Generates a key per segment, shares for its participants, and the
    /// court escrow. Returns the sealer and every share issued.
    pub fn new(
        segments: &[Segment],
        court_key: &[u8; 32],
        entropy: &mut Entropy,
    ) -> Result<(Self, Vec<Share>), DiscretionError> {
        let mut records = Vec::new();
        let mut keys = Vec::new();
        let mut shares = Vec::new();
        for (id, seg) in segments.iter().enumerate() {
            let k = gen_segment_key(id as SegmentId, entropy)?;
            let people: Vec<_> = seg.participants.iter().copied().collect();
            shares.extend(split_key(&k, &people, entropy)?);
            records.push(AccessRecord {
                segment_id: k.segment_id,
                t_start: seg.t_start,
                t_end: seg.t_end,
                participants: seg.participants.clone(),
                key_checksum: k.checksum,
                court_escrow: court_escrow(&k, court_key),
            });
            keys.push(k);
        }
        let offsets = vec![0; keys.len()];
        Ok((
            SessionSealer {
                records,
                keys,
                offsets,
            },
            shares,
        ))
    }

    /// Encrypts the chunk starting at `t_start` under the segment active then,
    /// continuing that segment's keystream. `None` if nobody is present.
    pub fn seal_chunk(&mut self, t_start: Timestamp, plaintext: &[u8]) -> Option<Vec<u8>> {
        let i = segment_at(&self.records, t_start)?;
        let out = apply_keystream(&self.keys[i], self.offsets[i], plaintext);
        self.offsets[i] += plaintext.len() as u64;
        Some(out)
    }

    pub fn access_records(self) -> Vec<AccessRecord> {
        self.records
    }
}

fn segment_at(records: &[AccessRecord], t: Timestamp) -> Option<usize> {
    records.iter().position(|r| r.t_start <= t && t < r.t_end)
}

/// Decrypts every chunk of an encrypted recording with the given keys.
///
/// Marker slots of the ciphertext decrypt to noise; since the plaintext held
/// markers in the same slots, they are re-stamped to recover it exactly.
pub fn open_recording(
    rec: &Recording,
    keys: &[SegmentKey],
) -> Result<Vec<Vec<u8>>, DiscretionError> {
    let mut offsets = vec![0u64; rec.access.len()];
    let mut out = Vec::with_capacity(rec.chunks.len());
    for chunk in &rec.chunks {
        let i = segment_at(&rec.access, chunk.t_start)
            .ok_or(DiscretionError::Uncovered(chunk.t_start))?;
        let id = rec.access[i].segment_id;
        let k = keys
            .iter()
            .find(|k| k.segment_id == id)
            .ok_or(DiscretionError::MissingKey(id))?;
        let noisy = apply_keystream(k, offsets[i], &chunk.payload);
        offsets[i] += chunk.payload.len() as u64;
        let restored = bind_challenge(noisy, &chunk.challenge, chunk.index, &rec.header.config);
        out.push(restored.payload);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::digest;

    fn p(name: &str) -> ParticipantId {
        ParticipantId::from_label(name)
    }

    fn set(names: &[&str]) -> BTreeSet<ParticipantId> {
        names.iter().map(|n| p(n)).collect()
    }

    #[test]
    fn keys_distinct_and_reproducible() {
        let mut e = Entropy::from_u64(1, "keys");
        let a = gen_segment_key(0, &mut e).unwrap();
        let b = gen_segment_key(1, &mut e).unwrap();
        assert_ne!(a.key, b.key);
        let mut e2 = Entropy::from_u64(1, "keys");
        assert_eq!(gen_segment_key(0, &mut e2).unwrap(), a);
        assert_eq!(a.checksum, digest_parts(&[&a.key, &0u64.to_be_bytes()]));
    }

    #[test]
    fn keystream_matches_block_definition() {
        let k = SegmentKey::from_bytes([3; 32], 7);
        let pt: Vec<u8> = (0..70).collect();
        let ct = encrypt_segment(&k, &pt);
        for (n, (c, x)) in ct.iter().zip(&pt).enumerate() {
            let block = digest_parts(&[
                &[3u8; 32],
                &7u64.to_be_bytes(),
                &(n as u64 / 32).to_be_bytes(),
            ]);
            assert_eq!(*c, x ^ block.0[n % 32]);
        }
        assert_eq!(encrypt_segment(&k, &ct), pt);
        assert!(encrypt_segment(&k, &[]).is_empty());
        // offsets continue the same stream
        let mut joined = apply_keystream(&k, 0, &pt[..33]);
        joined.extend(apply_keystream(&k, 33, &pt[33..]));
        assert_eq!(joined, ct);
    }

    #[test]
    fn split_and_reconstruct() {
        let mut e = Entropy::from_u64(2, "split");
        let k = gen_segment_key(4, &mut e).unwrap();
        let record = AccessRecord {
            segment_id: 4,
            t_start: 0,
            t_end: 1,
            participants: set(&["a"]),
            key_checksum: k.checksum,
            court_escrow: [0; 32],
        };
        let one = split_key(&k, &[p("a")], &mut e).unwrap();
        assert_eq!(one[0].value, k.key);

        let two = split_key(&k, &[p("a"), p("b")], &mut e).unwrap();
        let x: Vec<u8> = k
            .key
            .iter()
            .zip(&two[0].value)
            .map(|(a, b)| a ^ b)
            .collect();
        assert_eq!(two[1].value.to_vec(), x);

        let five = split_key(&k, &["a", "b", "c", "d", "e"].map(p), &mut e).unwrap();
        assert_eq!(reconstruct_key(&five, &record).unwrap(), k);
        let mut flipped = five.clone();
        flipped[2].value[0] ^= 1;
        assert_eq!(
            reconstruct_key(&flipped, &record),
            Err(DiscretionError::InsufficientOrCorrupted)
        );
        assert!(split_key(&k, &[], &mut e).is_err());
    }

    #[test]
    fn court_override() {
        let k = SegmentKey::from_bytes([9; 32], 2);
        let blob = court_escrow(&k, &[1; 32]);
        assert_eq!(court_open(&blob, 2, &[1; 32], &k.checksum).unwrap(), k);
        assert!(court_open(&blob, 2, &[2; 32], &k.checksum).is_err());
        assert_ne!(escrow_pad(&[1; 32], 0), escrow_pad(&[1; 32], 1));
        assert_eq!(
            escrow_pad(&[1; 32], 0),
            digest(&[[1u8; 32].as_slice(), &0u64.to_be_bytes()].concat())
        );
    }

    #[test]
    fn segmentation() {
        let ab = set(&["a", "b"]);
        let abc = set(&["a", "b", "c"]);
        let plan = segment_session(&[(0, ab.clone())], 30).unwrap();
        assert_eq!(plan.segments.len(), 1);

        let plan =
            segment_session(&[(0, ab.clone()), (10, abc.clone()), (20, ab.clone())], 30).unwrap();
        let sets: Vec<_> = plan
            .segments
            .iter()
            .map(|s| s.participants.clone())
            .collect();
        assert_eq!(sets, vec![ab.clone(), abc, ab.clone()]);
        assert_eq!(plan.segments[1].t_start, 10);
        assert_eq!(plan.segments[1].t_end, 20);

        let plan = segment_session(
            &[(0, ab.clone()), (5, BTreeSet::new()), (6, ab.clone())],
            10,
        )
        .unwrap();
        assert_eq!(plan.segments.len(), 2);
        assert_eq!(plan.gaps, vec![(5, 6)]);

        // repeated identical entries do not split
        let plan = segment_session(&[(0, ab.clone()), (3, ab.clone())], 10).unwrap();
        assert_eq!(plan.segments.len(), 1);

        assert_eq!(
            segment_session(&[], 10),
            Err(DiscretionError::EmptyPresence)
        );
        assert_eq!(
            segment_session(&[(5, ab.clone()), (1, ab)], 10),
            Err(DiscretionError::UnsortedPresence)
        );
    }

    #[test]
    fn sealer_covers_segments() {
        let plan = segment_session(&[(0, set(&["a"])), (10, set(&["a", "b"]))], 20).unwrap();
        let mut e = Entropy::from_u64(3, "sealer");
        let (mut sealer, shares) = SessionSealer::new(&plan.segments, &[5; 32], &mut e).unwrap();
        assert_eq!(shares.len(), 3);
        assert!(sealer.seal_chunk(0, b"abc").is_some());
        assert!(sealer.seal_chunk(15, b"abc").is_some());
        assert!(sealer.seal_chunk(20, b"abc").is_none());
        let records = sealer.access_records();
        for r in &records {
            let mine: Vec<_> = shares
                .iter()
                .filter(|s| s.segment == r.segment_id)
                .cloned()
                .collect();
            assert!(reconstruct_key(&mine, r).is_ok());
        }
    }

    #[test]
    fn share_json_shape() {
        let s = Share {
            participant: ParticipantId::from_index(1),
            segment: 3,
            value: [0xab; 32],
        };
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["segment"], 3);
        assert_eq!(v["value"], "ab".repeat(32));
        assert_eq!(v["participant"], ParticipantId::from_index(1).to_hex());
    }
}
