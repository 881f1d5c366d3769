//! The recording pipeline.
//!
//! Per chunk: pull the combined challenge at the chunk's first tick, stamp
//! challenge-derived markers into the scene bytes, optionally digest the
//! secondary stream window, extend the hash chain, and submit the new chain
//! digest to every repository. A chunk without a trustworthy challenge is
//! never recorded; a gap marker takes its place.

use serde::{Deserialize, Serialize};

use crate::chain::{chain_extend, ChainHead};
use crate::combiner::{Challenge, CombineError};
use crate::discretion::{AccessRecord, SessionSealer};
use crate::entropy::{ChallengeBits, Entropy, EntropyError};
use crate::frame::{canonical_chunk_bytes, Chunk, FrameError};
use crate::hash::{digest, digest_parts, Digest};
use crate::id::{BeaconId, HapId, SessionId};
use crate::repository::{prepare_submission, HapLog, HapRecord};
use crate::Timestamp;

pub const HEADER_VERSION: u8 = 0x01;
pub const DEFAULT_MARKER_STRIDE: u32 = 64;
pub const DEFAULT_MARKER_LEN: u32 = 8;

/// A beacon the session draws challenges from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeaconRef {
    pub id: BeaconId,
    pub delta: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_id: SessionId,
    pub chunk_period: u64,
    pub marker_stride: u32,
    pub marker_len: u32,
    pub challenge_bits: ChallengeBits,
    pub beacons: Vec<BeaconRef>,
    pub repositories: Vec<HapId>,
    pub coupling_enabled: bool,
    /// Secondary-stream bytes per tick; fixes each chunk's coupling window.
    pub secondary_bytes_per_tick: u32,
    /// Payloads are ciphertext under per-segment keys.
    pub encrypted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("chunk_period must be at least 1")]
    Period,
    #[error("marker_len must be at most 32 and less than marker_stride")]
    Markers,
    #[error("at least one beacon and one repository are required")]
    Empty,
    #[error("beacon delta must be at least 1")]
    Delta,
}

impl SessionConfig {
    /// Defaults for a session over the given beacons and repositories.
    pub fn new(session_id: SessionId, beacons: Vec<BeaconRef>, repositories: Vec<HapId>) -> Self {
        SessionConfig {
            session_id,
            chunk_period: 5,
            marker_stride: DEFAULT_MARKER_STRIDE,
            marker_len: DEFAULT_MARKER_LEN,
            challenge_bits: ChallengeBits::DEFAULT,
            beacons,
            repositories,
            coupling_enabled: false,
            secondary_bytes_per_tick: 0,
            encrypted: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.chunk_period == 0 {
            return Err(ConfigError::Period);
        }
        if self.marker_len > 32 || self.marker_stride <= self.marker_len {
            return Err(ConfigError::Markers);
        }
        if self.beacons.is_empty() || self.repositories.is_empty() {
            return Err(ConfigError::Empty);
        }
        if self.beacons.iter().any(|b| b.delta == 0) {
            return Err(ConfigError::Delta);
        }
        Ok(())
    }
}

/// Session parameters plus the tick the first chunk starts at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingHeader {
    pub config: SessionConfig,
    pub start_time: Timestamp,
}

impl RecordingHeader {
    /// Canonical bytes that seed the chain (big-endian, length-prefixed lists):
    ///
    /// ```text
    /// 0x01 | session_id[16] | start_time u64 | chunk_period u64
    ///      | marker_stride u32 | marker_len u32 | challenge_bits u16
    ///      | coupling u8 | secondary_bytes_per_tick u32 | encrypted u8
    ///      | n_beacons u32 | (beacon_id[16] | delta u64)*
    ///      | n_repositories u32 | repository_id[16]*
    /// ```
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(128);
        out.push(HEADER_VERSION);
        out.extend_from_slice(&c.session_id.0);
        out.extend_from_slice(&self.start_time.to_be_bytes());
        out.extend_from_slice(&c.chunk_period.to_be_bytes());
        out.extend_from_slice(&c.marker_stride.to_be_bytes());
        out.extend_from_slice(&c.marker_len.to_be_bytes());
        out.extend_from_slice(&c.challenge_bits.bits().to_be_bytes());
        out.push(c.coupling_enabled as u8);
        out.extend_from_slice(&c.secondary_bytes_per_tick.to_be_bytes());
        out.push(c.encrypted as u8);
        out.extend_from_slice(&(c.beacons.len() as u32).to_be_bytes());
        for b in &c.beacons {
            out.extend_from_slice(&b.id.0);
            out.extend_from_slice(&b.delta.to_be_bytes());
        }
        out.extend_from_slice(&(c.repositories.len() as u32).to_be_bytes());
        for r in &c.repositories {
            out.extend_from_slice(&r.0);
        }
        out
    }

    pub fn genesis(&self) -> ChainHead {
        ChainHead::genesis(&self.canonical_bytes())
    }
}

/// Stand-in for the camera: where scene bytes come from.
#[derive(Debug, Clone)]
pub enum SceneSource {
    Synthetic {
        entropy: Entropy,
        bytes_per_tick: usize,
    },
    Bytes {
        data: Vec<u8>,
        pos: usize,
        bytes_per_tick: usize,
    },
}

impl SceneSource {
    pub fn synthetic(seed: u64, label: &str, bytes_per_tick: usize) -> Self {
        SceneSource::Synthetic {
            entropy: Entropy::from_u64(seed, label),
            bytes_per_tick,
        }
    }

    pub fn from_bytes(data: Vec<u8>, bytes_per_tick: usize) -> Self {
        SceneSource::Bytes {
            data,
            pos: 0,
            bytes_per_tick,
        }
    }

    /// Reads `ticks` ticks worth of bytes; a byte source may run short.
    pub fn read(&mut self, ticks: u64) -> Result<Vec<u8>, EntropyError> {
        match self {
            SceneSource::Synthetic {
                entropy,
                bytes_per_tick,
            } => {
                let mut out = vec![0u8; *bytes_per_tick * ticks as usize];
                entropy.fill(&mut out)?;
                Ok(out)
            }
            SceneSource::Bytes {
                data,
                pos,
                bytes_per_tick,
            } => {
                let end = (*pos + *bytes_per_tick * ticks as usize).min(data.len());
                let out = data[*pos..end].to_vec();
                *pos = end;
                Ok(out)
            }
        }
    }
}

/// Marker `j` of chunk `index`: the first `len` bytes of
/// `digest(challenge || index || j)`.
pub fn marker(challenge: &[u8; 32], index: u64, j: u64, len: usize) -> Vec<u8> {
    let d = digest_parts(&[challenge, &index.to_be_bytes(), &j.to_be_bytes()]);
    d.0[..len].to_vec()
}

/// Byte ranges of the markers a payload of `payload_len` bytes carries.
pub fn marker_slots(
    payload_len: usize,
    stride: u32,
    len: u32,
) -> impl Iterator<Item = (u64, usize)> {
    let (stride, len) = (stride as usize, len as usize);
    (0u64..)
        .map(move |j| (j, j as usize * stride))
        .take_while(move |(_, off)| off + len <= payload_len)
}

/// Result of [`bind_challenge`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub payload: Vec<u8>,
    /// Payload too short to carry a single marker.
    pub degenerate: bool,
}

/// Overwrites the payload at every marker slot with the challenge-derived
/// marker for that slot.
pub fn bind_challenge(
    payload: Vec<u8>,
    challenge: &[u8; 32],
    index: u64,
    cfg: &SessionConfig,
) -> Bound {
    let len = cfg.marker_len as usize;
    if payload.len() < len || len == 0 {
        return Bound {
            payload,
            degenerate: true,
        };
    }
    let mut payload = payload;
    let slots: Vec<_> = marker_slots(payload.len(), cfg.marker_stride, cfg.marker_len).collect();
    for (j, off) in slots {
        payload[off..off + len].copy_from_slice(&marker(challenge, index, j, len));
    }
    Bound {
        payload,
        degenerate: false,
    }
}

/// True iff every marker slot of `payload` holds the expected marker.
pub fn markers_match(
    payload: &[u8],
    challenge: &[u8; 32],
    index: u64,
    cfg: &SessionConfig,
) -> bool {
    let len = cfg.marker_len as usize;
    marker_slots(payload.len(), cfg.marker_stride, cfg.marker_len)
        .all(|(j, off)| payload[off..off + len] == marker(challenge, index, j, len)[..])
}

/// Digest of the secondary stream's window; `flagged` when the window was empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coupling {
    pub digest: Digest,
    pub flagged: bool,
}

pub fn couple_modalities(secondary_window: &[u8]) -> Coupling {
    Coupling {
        digest: digest(secondary_window),
        flagged: secondary_window.is_empty(),
    }
}

/// The secondary-stream bytes belonging to the interval `[t_start, t_end)`,
/// clipped to the track. Empty for inverted intervals.
pub fn secondary_window<'a>(
    track: &'a [u8],
    header: &RecordingHeader,
    t_start: Timestamp,
    t_end: Timestamp,
) -> &'a [u8] {
    let per = header.config.secondary_bytes_per_tick as u64;
    let offset = |t: Timestamp| {
        let bytes = t.saturating_sub(header.start_time).saturating_mul(per);
        usize::try_from(bytes)
            .unwrap_or(usize::MAX)
            .min(track.len())
    };
    let lo = offset(t_start);
    &track[lo..offset(t_end).max(lo)]
}

/// Submission payload for the seal that closes a recording: binds the final
/// chain head and the chunk count so truncation is detectable.
pub fn seal_submission(final_head: &ChainHead) -> Digest {
    digest_parts(&[
        b"seal",
        final_head.digest.as_bytes(),
        &final_head.index.to_be_bytes(),
    ])
}

/// Delivers a submission to repository `repo`. Returns the receipt if one is
/// available right away; a delayed network attaches it later.
pub trait Publisher {
    fn publish(&mut self, repo: usize, s: Digest, sent_at: Timestamp) -> Option<HapRecord>;
}

/// Publishes straight into in-memory logs, `delay` ticks after sending.
pub struct DirectPublisher<'a> {
    pub logs: &'a mut [HapLog],
    pub delay: u64,
}

impl Publisher for DirectPublisher<'_> {
    fn publish(&mut self, repo: usize, s: Digest, sent_at: Timestamp) -> Option<HapRecord> {
        let log = self.logs.get_mut(repo)?;
        log.submit(&s, sent_at + self.delay).ok().flatten()
    }
}

/// A stretch of the session with no recorded chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapMarker {
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub reason: String,
}

/// A finalized recording manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recording {
    pub header: RecordingHeader,
    pub chunks: Vec<Chunk>,
    /// Chain digest after each chunk.
    pub chain: Vec<Digest>,
    /// Per chunk, per repository.
    pub receipts: Vec<Vec<Option<HapRecord>>>,
    /// Per repository, for the closing seal.
    pub seal_receipts: Vec<Option<HapRecord>>,
    pub gaps: Vec<GapMarker>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub access: Vec<AccessRecord>,
}

/// Which receipt slot a delivered submission fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReceiptSlot {
    Chunk(u64),
    Seal,
}

impl Recording {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("recording serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Chain heads recomputed from the header and chunks. A chunk that cannot
    /// be framed ends the recomputation.
    pub fn recompute_chain(&self) -> Vec<ChainHead> {
        let sid = self.header.config.session_id;
        let mut head = self.header.genesis();
        let mut out = Vec::with_capacity(self.chunks.len());
        for c in &self.chunks {
            let Ok(bytes) = canonical_chunk_bytes(&sid, c) else {
                break;
            };
            head = chain_extend(&head, &bytes);
            out.push(head);
        }
        out
    }

    pub fn attach_receipt(&mut self, slot: ReceiptSlot, repo: usize, receipt: HapRecord) {
        let row = match slot {
            ReceiptSlot::Chunk(i) => self.receipts.get_mut(i as usize),
            ReceiptSlot::Seal => Some(&mut self.seal_receipts),
        };
        if let Some(cell) = row.and_then(|r| r.get_mut(repo)) {
            *cell = Some(receipt);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("challenge for tick {t} lies outside chunk interval [{t_start}, {t_end}]")]
    StaleChallenge {
        t: Timestamp,
        t_start: Timestamp,
        t_end: Timestamp,
    },
    #[error("coupling is enabled but no secondary stream was supplied")]
    MissingSecondary,
    #[error("encrypted session without a sealer")]
    MissingSealer,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("cannot finalize a recording with no chunks")]
    Empty,
}

/// What one call to [`Recorder::record_chunk`] produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChunkOutcome {
    Recorded {
        chunk: Chunk,
        head: ChainHead,
        /// Submission payload sent to every repository.
        submission: Digest,
        /// Per repository; `None` when no receipt came back (yet).
        receipts: Vec<Option<HapRecord>>,
        degenerate: bool,
        coupling_flagged: bool,
    },
    Gap(GapMarker),
}

/// A recording session in progress; a single sequential producer.
pub struct Recorder {
    header: RecordingHeader,
    head: ChainHead,
    next_start: Timestamp,
    chunks: Vec<Chunk>,
    chain: Vec<Digest>,
    receipts: Vec<Vec<Option<HapRecord>>>,
    gaps: Vec<GapMarker>,
    sealer: Option<SessionSealer>,
}

impl Recorder {
    pub fn new(config: SessionConfig, start_time: Timestamp) -> Result<Self, RecordError> {
        config.validate()?;
        if config.encrypted {
            return Err(RecordError::MissingSealer);
        }
        Ok(Self::build(config, start_time, None))
    }

    /// A session whose payloads are encrypted under `sealer`'s segment keys.
    pub fn with_sealer(
        mut config: SessionConfig,
        start_time: Timestamp,
        sealer: SessionSealer,
    ) -> Result<Self, RecordError> {
        config.encrypted = true;
        config.validate()?;
        Ok(Self::build(config, start_time, Some(sealer)))
    }

    fn build(config: SessionConfig, start_time: Timestamp, sealer: Option<SessionSealer>) -> Self {
        let header = RecordingHeader { config, start_time };
        Recorder {
            head: header.genesis(),
            header,
            next_start: start_time,
            chunks: Vec::new(),
            chain: Vec::new(),
            receipts: Vec::new(),
            gaps: Vec::new(),
            sealer,
        }
    }

    pub fn header(&self) -> &RecordingHeader {
        &self.header
    }

    pub fn head(&self) -> ChainHead {
        self.head
    }

    /// Chunks recorded so far; also the index the next chunk will get.
    pub fn chunk_count(&self) -> u64 {
        self.chunks.len() as u64
    }

    /// Interval `[t_start, t_end]` of the next chunk.
    pub fn next_interval(&self) -> (Timestamp, Timestamp) {
        (
            self.next_start,
            self.next_start + self.header.config.chunk_period,
        )
    }

    /// Records the next chunk interval.
    ///
    /// `challenge` is the combiner's answer at the interval's first tick.
    /// `secondary` supplies the coupled stream when coupling is enabled. The
    /// chain digest is submitted to every repository at the interval's end.
    pub fn record_chunk(
        &mut self,
        scene: &mut SceneSource,
        secondary: Option<&mut SceneSource>,
        challenge: Result<Challenge, CombineError>,
        publisher: &mut dyn Publisher,
    ) -> Result<ChunkOutcome, RecordError> {
        let cfg = &self.header.config;
        let (t_start, t_end) = self.next_interval();
        let raw = scene.read(cfg.chunk_period)?;
        let window = match (cfg.coupling_enabled, secondary) {
            (true, Some(src)) => Some(src.read(cfg.chunk_period)?),
            (true, None) => return Err(RecordError::MissingSecondary),
            (false, _) => None,
        };
        self.next_start = t_end;

        let challenge = match challenge {
            Ok(c) => c,
            Err(e) => return Ok(self.gap(t_start, t_end, e.to_string())),
        };
        if challenge.t < t_start || challenge.t > t_end {
            return Err(RecordError::StaleChallenge {
                t: challenge.t,
                t_start,
                t_end,
            });
        }
        let cfg = &self.header.config;
        let index = self.chunks.len() as u64;
        let padded = challenge.padded();

        let mut bound = bind_challenge(raw, &padded, index, cfg);
        if let Some(sealer) = self.sealer.as_mut() {
            let Some(cipher) = sealer.seal_chunk(t_start, &bound.payload) else {
                return Ok(self.gap(t_start, t_end, "no participants present".into()));
            };
            bound = bind_challenge(cipher, &padded, index, cfg);
        }
        let coupling = window.as_deref().map(couple_modalities);

        let chunk = Chunk {
            index,
            t_start,
            t_end,
            challenge_time: challenge.t,
            challenge: padded,
            payload: bound.payload,
            coupling_digest: coupling.map(|c| c.digest),
        };
        let bytes = canonical_chunk_bytes(&cfg.session_id, &chunk)?;
        let head = chain_extend(&self.head, &bytes);
        let submission = prepare_submission(head.digest.as_bytes());
        let receipts: Vec<_> = (0..cfg.repositories.len())
            .map(|r| publisher.publish(r, submission, t_end))
            .collect();

        self.head = head;
        self.chunks.push(chunk.clone());
        self.chain.push(head.digest);
        self.receipts.push(receipts.clone());
        Ok(ChunkOutcome::Recorded {
            chunk,
            head,
            submission,
            receipts,
            degenerate: bound.degenerate,
            coupling_flagged: coupling.is_some_and(|c| c.flagged),
        })
    }

    fn gap(&mut self, t_start: Timestamp, t_end: Timestamp, reason: String) -> ChunkOutcome {
        let g = GapMarker {
            t_start,
            t_end,
            reason,
        };
        self.gaps.push(g.clone());
        ChunkOutcome::Gap(g)
    }

    /// Fills in a receipt that arrived after the chunk was recorded.
    pub fn attach_receipt(&mut self, chunk: u64, repo: usize, receipt: HapRecord) {
        if let Some(cell) = self
            .receipts
            .get_mut(chunk as usize)
            .and_then(|r| r.get_mut(repo))
        {
            *cell = Some(receipt);
        }
    }

    /// Closes the session: publishes the seal over the final chain head and
    /// emits the manifest. The seal is the submission returned alongside.
    pub fn finalize(
        self,
        publisher: &mut dyn Publisher,
    ) -> Result<(Recording, Digest), RecordError> {
        if self.chunks.is_empty() {
            return Err(RecordError::Empty);
        }
        let seal = seal_submission(&self.head);
        let sent_at = self
            .chunks
            .last()
            .map(|c| c.t_end)
            .unwrap_or(self.next_start);
        let seal_receipts = (0..self.header.config.repositories.len())
            .map(|r| publisher.publish(r, seal, sent_at))
            .collect();
        let access = self.sealer.map(|s| s.access_records()).unwrap_or_default();
        Ok((
            Recording {
                header: self.header,
                chunks: self.chunks,
                chain: self.chain,
                receipts: self.receipts,
                seal_receipts,
                gaps: self.gaps,
                access,
            },
            seal,
        ))
    }
}
