//! Deterministic discrete-event scenarios.
//!
//! One global tick clock drives everything: beacons step, the recorder (or
//! a forger standing in for it) records chunk by chunk, and submissions
//! reach repositories exactly `network_delay` ticks after sending. Beacon
//! emissions reach the recorder in the tick they are published. After the
//! last delivery the verifier runs against the simulated archives and logs.
//!
//! Adversaries are explicit knowledge sets. A forger knows every commitment
//! and reveal as it is published, plus whatever leaking beacons hand it at
//! commitment time, and nothing else.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::beacon::{Beacon, BeaconArchive, BeaconError, BeaconFault};
use crate::combiner::{combine_challenge, BeaconView, Challenge};
use crate::discretion::{segment_session, DiscretionError, SessionSealer, Share};
use crate::entropy::{ChallengeBits, Entropy, TrgSource};
use crate::hash::{digest, Digest};
use crate::id::{BeaconId, HapId, ParticipantId, SessionId};
use crate::recorder::{
    BeaconRef, ChunkOutcome, Publisher, ReceiptSlot, RecordError, Recorder, Recording,
    RecordingHeader, SceneSource, SessionConfig,
};
use crate::repository::{find_divergence, HapFault, HapLog, HapRecord};
use crate::verifier::{bracket_report, BracketReport, Finding, Overall, Status, TimeBracket};
use crate::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Adversary {
    None,
    /// Replaces the recorder and pre-renders every chunk before its challenge
    /// is revealed.
    Forger,
    /// Edits the finalized recording after publication.
    PostHocEditor {
        mutations: Vec<Mutation>,
    },
    /// A forger whom the first `k` beacons leak their secrets to.
    ColludingBeacons {
        k: usize,
    },
}

/// Who is present from tick `t` on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceEntry {
    pub t: Timestamp,
    pub present: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretionConfig {
    pub presence: Vec<PresenceEntry>,
    /// The court key is derived from this label.
    pub court_key_label: String,
}

fn default_bytes_per_tick() -> usize {
    64
}

fn default_secondary() -> u32 {
    16
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Number of chunk intervals the session spans.
    pub chunks: u64,
    /// One entry per beacon.
    pub beacons: Vec<BeaconFault>,
    pub delta: u64,
    #[serde(default)]
    pub challenge_bits: ChallengeBits,
    /// One entry per repository.
    pub repositories: Vec<HapFault>,
    pub network_delay: u64,
    pub chunk_period: u64,
    #[serde(default = "default_bytes_per_tick")]
    pub bytes_per_tick: usize,
    #[serde(default)]
    pub coupling: bool,
    #[serde(default = "default_secondary")]
    pub secondary_bytes_per_tick: u32,
    pub adversary: Adversary,
    #[serde(default)]
    pub discretion: Option<DiscretionConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Beacon(#[from] BeaconError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Discretion(#[from] DiscretionError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
}

impl ScenarioConfig {
    /// Three honest beacons, five honest repositories, one-tick delay, five-tick
    /// chunks, ten chunks, coupling on.
    pub fn fault_free(seed: u64) -> Self {
        ScenarioConfig {
            seed,
            chunks: 10,
            beacons: vec![BeaconFault::Honest; 3],
            delta: 3,
            challenge_bits: ChallengeBits::DEFAULT,
            repositories: vec![HapFault::Honest; 5],
            network_delay: 1,
            chunk_period: 5,
            bytes_per_tick: default_bytes_per_tick(),
            coupling: true,
            secondary_bytes_per_tick: default_secondary(),
            adversary: Adversary::None,
            discretion: None,
        }
    }

    /// The standard suite: `S1` fault-free, `S2` equivocator, `S3` minority
    /// droppers, `S4` forger, `S5` post-hoc editor, `S6` all beacons leak.
    pub fn standard(name: &str, seed: u64) -> Option<Self> {
        let mut cfg = Self::fault_free(seed);
        match name {
            "S1" => {}
            "S2" => cfg.beacons[1] = BeaconFault::Equivocator,
            "S3" => {
                for r in &mut cfg.repositories[..2] {
                    *r = HapFault::Dropper {
                        drop: crate::repository::DropRule::All,
                    };
                }
            }
            "S4" => cfg.adversary = Adversary::Forger,
            "S5" => {
                cfg.adversary = Adversary::PostHocEditor {
                    mutations: vec![Mutation::FlipPayload {
                        chunk: 3,
                        offset: 100,
                        xor: 1,
                    }],
                }
            }
            "S6" => {
                cfg.adversary = Adversary::ColludingBeacons {
                    k: cfg.beacons.len(),
                }
            }
            _ => return None,
        }
        Some(cfg)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if self.beacons.is_empty() || self.repositories.is_empty() {
            return bad("need at least one beacon and one repository");
        }
        if self.chunks == 0 || self.chunk_period == 0 || self.delta == 0 {
            return bad("chunks, chunk_period and delta must be at least 1");
        }
        if let Adversary::ColludingBeacons { k } = self.adversary {
            if k > self.beacons.len() {
                return bad("more colluding beacons than beacons");
            }
        }
        Ok(())
    }

    fn start_time(&self) -> Timestamp {
        self.delta
    }

    fn last_tick(&self) -> Timestamp {
        self.start_time() + self.chunks * self.chunk_period + self.network_delay
    }

    fn session_config(&self) -> SessionConfig {
        let beacons = (0..self.beacons.len())
            .map(|i| BeaconRef {
                id: BeaconId::from_index(i as u64),
                delta: self.delta,
            })
            .collect();
        let repos = (0..self.repositories.len() as u64)
            .map(HapId::from_index)
            .collect();
        let mut cfg = SessionConfig::new(SessionId::from_index(self.seed), beacons, repos);
        cfg.chunk_period = self.chunk_period;
        cfg.challenge_bits = self.challenge_bits;
        cfg.coupling_enabled = self.coupling;
        cfg.secondary_bytes_per_tick = if self.coupling {
            self.secondary_bytes_per_tick
        } else {
            0
        };
        cfg
    }
}

/// Something a node observed during the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub t: Option<Timestamp>,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub verdict: Overall,
    pub brackets: Vec<TimeBracket>,
    pub max_width: Option<u64>,
    pub events: Vec<FaultEvent>,
    /// Findings other than passes.
    pub problems: Vec<Finding>,
    pub adversary_success: bool,
    pub chunks_recorded: usize,
    /// Digest of the verified manifest's JSON.
    pub recording_digest: Option<Digest>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A finished run with every artifact, for inspection and re-verification.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    /// The manifest that was verified (after any post-hoc edits).
    pub recording: Option<Recording>,
    /// The manifest as originally finalized.
    pub original: Option<Recording>,
    pub archives: Vec<BeaconArchive>,
    pub logs: Vec<HapLog>,
    /// Logs as first published, kept by independent mirrors.
    pub mirrors: Vec<HapLog>,
    pub secondary_track: Vec<u8>,
    pub shares: Vec<Share>,
    pub bracket_report: Option<BracketReport>,
}

impl ScenarioOutcome {
    /// Re-runs the verifier on another manifest against this run's public data.
    pub fn verify(&self, rec: &Recording) -> BracketReport {
        let archives: Vec<_> = self.archives.iter().collect();
        let logs: Vec<_> = self.logs.iter().collect();
        let track = self.recording.as_ref().and_then(|r| {
            r.header
                .config
                .coupling_enabled
                .then_some(self.secondary_track.as_slice())
        });
        bracket_report(rec, &archives, &logs, track)
    }
}

/// A secret the adversary holds, and since when.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownReveal {
    pub beacon: BeaconId,
    pub committed_at: Timestamp,
    pub reveal: Vec<u8>,
    pub learned_at: Timestamp,
    pub leaked: bool,
}

/// Everything the adversary has observed.
#[derive(Debug, Clone, Default)]
pub struct Knowledge {
    pub commitments: Vec<(BeaconId, Timestamp, Digest)>,
    pub reveals: Vec<KnownReveal>,
}

impl Knowledge {
    /// Records a published reveal. Honest publication can never precede the
    /// release tick.
    pub fn learn_public(
        &mut self,
        beacon: BeaconId,
        committed_at: Timestamp,
        delta: u64,
        reveal: Vec<u8>,
        now: Timestamp,
    ) {
        assert!(
            now >= committed_at + delta,
            "reveal observed before its emission tick"
        );
        self.reveals.push(KnownReveal {
            beacon,
            committed_at,
            reveal,
            learned_at: now,
            leaked: false,
        });
    }

    pub fn learn_leak(
        &mut self,
        beacon: BeaconId,
        committed_at: Timestamp,
        reveal: Vec<u8>,
        now: Timestamp,
    ) {
        self.reveals.push(KnownReveal {
            beacon,
            committed_at,
            reveal,
            learned_at: now,
            leaked: true,
        });
    }

    /// The secret `beacon` committed at `committed_at`, if known by `as_of`.
    pub fn reveal_known(
        &self,
        beacon: BeaconId,
        committed_at: Timestamp,
        as_of: Timestamp,
    ) -> Option<&[u8]> {
        self.reveals
            .iter()
            .find(|r| r.beacon == beacon && r.committed_at == committed_at && r.learned_at <= as_of)
            .map(|r| r.reveal.as_slice())
    }
}

/// The best challenge the adversary can produce for a chunk starting at
/// `t_start`, using only what it knew strictly before `t_start`: known
/// secrets where it has them, guesses elsewhere.
pub fn forged_challenge(
    knowledge: &Knowledge,
    config: &SessionConfig,
    t_start: Timestamp,
    guesses: &mut Entropy,
) -> Challenge {
    let width = config.challenge_bits.bytes();
    let as_of = t_start.saturating_sub(1);
    let mut value = vec![0u8; width];
    for b in &config.beacons {
        let known = t_start
            .checked_sub(b.delta)
            .and_then(|c| knowledge.reveal_known(b.id, c, as_of))
            .map(<[u8]>::to_vec);
        let contribution = match known {
            Some(r) => r,
            None => {
                let mut g = vec![0u8; width];
                guesses.fill(&mut g).expect("seeded guesses");
                g
            }
        };
        value
            .iter_mut()
            .zip(&contribution)
            .for_each(|(v, c)| *v ^= c);
    }
    Challenge {
        t: t_start,
        value,
        contributors: config.beacons.iter().map(|b| b.id).collect(),
        excluded: BTreeMap::new(),
    }
}

/// Builds a whole forged recording from `knowledge`, chunk by chunk, each
/// chunk using only what was known before its start tick.
pub fn adversary_forge(
    knowledge: &Knowledge,
    header: &RecordingHeader,
    chunks: u64,
    scene: &mut SceneSource,
    guesses: &mut Entropy,
    publisher: &mut dyn Publisher,
) -> Result<Recording, RecordError> {
    let mut rec = Recorder::new(header.config.clone(), header.start_time)?;
    let mut secondary = header.config.coupling_enabled.then(|| {
        SceneSource::synthetic(
            0,
            "forged-secondary",
            header.config.secondary_bytes_per_tick as usize,
        )
    });
    for _ in 0..chunks {
        let (t_start, _) = rec.next_interval();
        let ch = forged_challenge(knowledge, &header.config, t_start, guesses);
        rec.record_chunk(scene, secondary.as_mut(), Ok(ch), publisher)?;
    }
    Ok(rec.finalize(publisher)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeField {
    TStart,
    TEnd,
    ChallengeTime,
}

/// A post-publication edit. Flips XOR one byte with `xor`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Mutation {
    FlipPayload {
        chunk: u64,
        offset: usize,
        xor: u8,
    },
    FlipChallenge {
        chunk: u64,
        offset: usize,
        xor: u8,
    },
    FlipCoupling {
        chunk: u64,
        offset: usize,
        xor: u8,
    },
    FlipTime {
        chunk: u64,
        field: TimeField,
        byte: usize,
        xor: u8,
    },
    /// Swaps two chunks, leaving the stored chain as it was.
    Swap {
        a: u64,
        b: u64,
    },
    /// Removes a chunk with its chain entry and receipts.
    Delete {
        chunk: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error("mutation target out of range: {0}")]
    OutOfRange(String),
    #[error("xor mask must be non-zero")]
    ZeroMask,
}

/// Applies edits to a finalized recording, in order.
pub fn mutate_after_publication(
    rec: &Recording,
    mutations: &[Mutation],
) -> Result<Recording, MutationError> {
    let mut out = rec.clone();
    let n = out.chunks.len() as u64;
    let oob = |what: String| MutationError::OutOfRange(what);
    for m in mutations {
        match *m {
            Mutation::FlipPayload { chunk, offset, xor }
            | Mutation::FlipChallenge { chunk, offset, xor }
            | Mutation::FlipCoupling { chunk, offset, xor } => {
                if xor == 0 {
                    return Err(MutationError::ZeroMask);
                }
                let c = out
                    .chunks
                    .get_mut(chunk as usize)
                    .ok_or_else(|| oob(format!("chunk {chunk} of {n}")))?;
                let bytes: &mut [u8] = match m {
                    Mutation::FlipPayload { .. } => &mut c.payload,
                    Mutation::FlipChallenge { .. } => &mut c.challenge,
                    _ => match c.coupling_digest.as_mut() {
                        Some(d) => &mut d.0,
                        None => return Err(oob(format!("chunk {chunk} has no coupling digest"))),
                    },
                };
                let b = bytes
                    .get_mut(offset)
                    .ok_or_else(|| oob(format!("offset {offset} in chunk {chunk}")))?;
                *b ^= xor;
            }
            Mutation::FlipTime {
                chunk,
                field,
                byte,
                xor,
            } => {
                if xor == 0 {
                    return Err(MutationError::ZeroMask);
                }
                if byte >= 8 {
                    return Err(oob(format!("timestamp byte {byte}")));
                }
                let c = out
                    .chunks
                    .get_mut(chunk as usize)
                    .ok_or_else(|| oob(format!("chunk {chunk} of {n}")))?;
                let slot = match field {
                    TimeField::TStart => &mut c.t_start,
                    TimeField::TEnd => &mut c.t_end,
                    TimeField::ChallengeTime => &mut c.challenge_time,
                };
                let mut be = slot.to_be_bytes();
                be[byte] ^= xor;
                *slot = u64::from_be_bytes(be);
            }
            Mutation::Swap { a, b } => {
                let len = out.chunks.len() as u64;
                if a >= len || b >= len {
                    return Err(oob(format!("swap {a} <-> {b} of {len}")));
                }
                out.chunks.swap(a as usize, b as usize);
            }
            Mutation::Delete { chunk } => {
                let len = out.chunks.len() as u64;
                if chunk >= len {
                    return Err(oob(format!("delete {chunk} of {len}")));
                }
                let i = chunk as usize;
                out.chunks.remove(i);
                if i < out.chain.len() {
                    out.chain.remove(i);
                }
                if i < out.receipts.len() {
                    out.receipts.remove(i);
                }
            }
        }
    }
    Ok(out)
}

struct Message {
    sent: Timestamp,
    repo: usize,
    s: Digest,
    slot: ReceiptSlot,
}

/// In-flight submissions, delivered exactly `delay` ticks after sending.
struct Network {
    delay: u64,
    queue: BTreeMap<(Timestamp, u64), Message>,
    seq: u64,
    slot: ReceiptSlot,
}

impl Publisher for Network {
    fn publish(&mut self, repo: usize, s: Digest, sent_at: Timestamp) -> Option<HapRecord> {
        self.queue.insert(
            (sent_at + self.delay, self.seq),
            Message {
                sent: sent_at,
                repo,
                s,
                slot: self.slot,
            },
        );
        self.seq += 1;
        None
    }
}

impl Network {
    fn deliver(
        &mut self,
        now: Timestamp,
        logs: &mut [HapLog],
        receipts: &mut Vec<(ReceiptSlot, usize, HapRecord)>,
        events: &mut Vec<FaultEvent>,
    ) {
        let due: Vec<_> = self
            .queue
            .range(..=(now, u64::MAX))
            .map(|(k, _)| *k)
            .collect();
        for key in due {
            let msg = self.queue.remove(&key).expect("queued");
            assert_eq!(now, msg.sent + self.delay, "message delivered off schedule");
            match logs[msg.repo].submit(&msg.s, now) {
                Ok(Some(r)) => receipts.push((msg.slot, msg.repo, r)),
                Ok(None) => events.push(FaultEvent {
                    t: Some(now),
                    kind: "dropped".into(),
                    detail: format!("repository {} dropped a submission", msg.repo),
                }),
                Err(e) => events.push(FaultEvent {
                    t: Some(now),
                    kind: "rejected".into(),
                    detail: e.to_string(),
                }),
            }
        }
    }
}

enum Driver {
    Honest(Recorder),
    Forger(Recorder, Entropy),
    Done,
}

/// Runs a scenario and keeps every artifact.
pub fn simulate(cfg: &ScenarioConfig) -> Result<ScenarioOutcome, ScenarioError> {
    cfg.validate()?;
    let session = cfg.session_config();
    let start = cfg.start_time();
    let last = cfg.last_tick();
    let width = cfg.challenge_bits;

    let colluders = match cfg.adversary {
        Adversary::ColludingBeacons { k } => k,
        _ => 0,
    };
    let mut beacons = cfg
        .beacons
        .iter()
        .enumerate()
        .map(|(i, fault)| {
            let trg = TrgSource::new(Entropy::from_u64(cfg.seed, &format!("beacon/{i}")), width);
            let fault = if i < colluders {
                BeaconFault::Leaker
            } else {
                fault.clone()
            };
            Ok(Beacon::new(BeaconId::from_index(i as u64), cfg.delta, trg)?.make_faulty(fault))
        })
        .collect::<Result<Vec<_>, BeaconError>>()?;
    let mut logs: Vec<HapLog> = cfg
        .repositories
        .iter()
        .enumerate()
        .map(|(i, f)| HapLog::new(HapId::from_index(i as u64)).with_fault(f.clone()))
        .collect();

    let mut scene = SceneSource::synthetic(cfg.seed, "scene", cfg.bytes_per_tick);
    let track_len =
        (cfg.chunks * cfg.chunk_period) as usize * session.secondary_bytes_per_tick as usize;
    let mut secondary_track = vec![0u8; track_len];
    Entropy::from_u64(cfg.seed, "secondary")
        .fill(&mut secondary_track)
        .expect("seeded");
    let mut secondary = SceneSource::from_bytes(
        secondary_track.clone(),
        session.secondary_bytes_per_tick as usize,
    );

    let mut shares = Vec::new();
    let forging = matches!(
        cfg.adversary,
        Adversary::Forger | Adversary::ColludingBeacons { .. }
    );
    let mut driver = if forging {
        Driver::Forger(
            Recorder::new(session.clone(), start)?,
            Entropy::from_u64(cfg.seed, "forger"),
        )
    } else if let Some(d) = &cfg.discretion {
        let presence: Vec<(Timestamp, BTreeSet<ParticipantId>)> = d
            .presence
            .iter()
            .map(|p| {
                (
                    p.t,
                    p.present
                        .iter()
                        .map(|n| ParticipantId::from_label(n))
                        .collect(),
                )
            })
            .collect();
        let end = start + cfg.chunks * cfg.chunk_period;
        let plan = segment_session(&presence, end)?;
        let court_key = digest(d.court_key_label.as_bytes()).0;
        let mut keys = Entropy::from_u64(cfg.seed, "segment-keys");
        let (sealer, issued) = SessionSealer::new(&plan.segments, &court_key, &mut keys)?;
        shares = issued;
        Driver::Honest(Recorder::with_sealer(session.clone(), start, sealer)?)
    } else {
        Driver::Honest(Recorder::new(session.clone(), start)?)
    };

    let mut net = Network {
        delay: cfg.network_delay,
        queue: BTreeMap::new(),
        seq: 0,
        slot: ReceiptSlot::Seal,
    };
    let mut knowledge = Knowledge::default();
    let mut events = Vec::new();
    let mut receipts = Vec::new();
    let mut pulled: Option<Result<Challenge, crate::combiner::CombineError>> = None;
    let mut chunks_done = 0u64;
    let mut finalized: Option<Recording> = None;

    for now in 0..=last {
        for b in &mut beacons {
            let id = b.id();
            let delta = b.delta();
            if let Some(e) = b.step(now)? {
                knowledge.commitments.push((id, e.t, e.commitment));
                if let Some(r) = &e.reveal {
                    knowledge.learn_public(id, now - delta, delta, r.clone(), now);
                }
            } else {
                events.push(FaultEvent {
                    t: Some(now),
                    kind: "stall".into(),
                    detail: format!("beacon {id} published nothing"),
                });
            }
            if let Some((t, secret)) = b.leaks().last() {
                if *t == now {
                    knowledge.learn_leak(id, now, secret.clone(), now);
                }
            }
        }

        let (recorder, mut guesses) = match &mut driver {
            Driver::Honest(r) => (Some(r), None),
            Driver::Forger(r, g) => (Some(r), Some(g)),
            Driver::Done => (None, None),
        };
        if let Some(rec) = recorder {
            let (_, t_end) = rec.next_interval();
            if chunks_done < cfg.chunks && now == t_end {
                let challenge = pulled.take().expect("challenge pulled at chunk start");
                net.slot = ReceiptSlot::Chunk(rec.chunk_count());
                let out = rec.record_chunk(
                    &mut scene,
                    session.coupling_enabled.then_some(&mut secondary),
                    challenge,
                    &mut net,
                )?;
                if let ChunkOutcome::Gap(g) = out {
                    events.push(FaultEvent {
                        t: Some(g.t_start),
                        kind: "gap".into(),
                        detail: g.reason,
                    });
                }
                chunks_done += 1;
            }
            let (t_start_next, _) = rec.next_interval();
            if chunks_done < cfg.chunks && now == t_start_next {
                if let Some(g) = &mut guesses {
                    // Only what was learned before this tick goes into the forgery.
                    pulled = Some(Ok(forged_challenge(&knowledge, &session, now, g)));
                } else {
                    let views: Vec<_> = beacons
                        .iter()
                        .map(|b| BeaconView::archived(b.archive(), now))
                        .collect();
                    let ch = combine_challenge(now, width, &views);
                    if let Ok(c) = &ch {
                        for (id, reason) in &c.excluded {
                            events.push(FaultEvent {
                                t: Some(now),
                                kind: "excluded".into(),
                                detail: format!("beacon {id}: {reason:?}"),
                            });
                        }
                    }
                    pulled = Some(ch);
                }
            }
        }
        if chunks_done == cfg.chunks && finalized.is_none() && !matches!(driver, Driver::Done) {
            let rec = match std::mem::replace(&mut driver, Driver::Done) {
                Driver::Honest(r) | Driver::Forger(r, _) => r,
                Driver::Done => unreachable!(),
            };
            net.slot = ReceiptSlot::Seal;
            match rec.finalize(&mut net) {
                Ok((r, _)) => finalized = Some(r),
                Err(RecordError::Empty) => events.push(FaultEvent {
                    t: Some(now),
                    kind: "no-recording".into(),
                    detail: "no chunk could be recorded".into(),
                }),
                Err(e) => return Err(e.into()),
            }
        }

        net.deliver(now, &mut logs, &mut receipts, &mut events);
    }
    assert!(net.queue.is_empty(), "undelivered submissions");

    if let Some(rec) = finalized.as_mut() {
        for (slot, repo, r) in receipts {
            rec.attach_receipt(slot, repo, r);
        }
    }

    let mirrors = logs.clone();
    for log in logs.iter_mut().filter(|l| *l.fault() == HapFault::Rewriter) {
        if let Some(first) = log.records().first().copied() {
            log.rewrite_remove(&first.v).expect("rewriter");
        }
    }
    for (log, mirror) in logs.iter().zip(&mirrors) {
        if let Some(at) = find_divergence(log, mirror) {
            events.push(FaultEvent {
                t: None,
                kind: "log-divergence".into(),
                detail: format!(
                    "repository {} differs from its mirror at record {at}",
                    log.id
                ),
            });
        }
    }

    let original = finalized;
    let verified = match (&cfg.adversary, &original) {
        (Adversary::PostHocEditor { mutations }, Some(r)) => {
            Some(mutate_after_publication(r, mutations)?)
        }
        (_, r) => r.clone(),
    };

    let archives: Vec<BeaconArchive> = beacons.into_iter().map(Beacon::into_archive).collect();
    let mut outcome = ScenarioOutcome {
        report: ScenarioReport {
            verdict: Overall::Unverifiable,
            brackets: Vec::new(),
            max_width: None,
            events,
            problems: Vec::new(),
            adversary_success: false,
            chunks_recorded: 0,
            recording_digest: None,
        },
        recording: verified,
        original,
        archives,
        logs,
        mirrors,
        secondary_track,
        shares,
        bracket_report: None,
    };
    if let Some(rec) = &outcome.recording {
        let br = outcome.verify(rec);
        let r = &mut outcome.report;
        r.verdict = br.overall;
        r.brackets = br.brackets.clone();
        r.max_width = br.max_width;
        r.problems = br
            .findings
            .iter()
            .filter(|f| matches!(f.status, Status::Fail | Status::Degraded))
            .cloned()
            .collect();
        r.chunks_recorded = rec.chunks.len();
        r.recording_digest = Some(digest(rec.to_json().as_bytes()));
        r.adversary_success =
            !matches!(cfg.adversary, Adversary::None) && br.overall == Overall::Authentic;
        outcome.bracket_report = Some(br);
    }
    Ok(outcome)
}

/// Runs a scenario and returns its report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    simulate(cfg).map(|o| o.report)
}
