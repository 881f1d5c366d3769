use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde_json::json;

use tba_core::beacon::{Beacon, BeaconArchive, BeaconRequest};
use tba_core::combiner::CombineError;
use tba_core::discretion::{
    court_open, open_recording, reconstruct_key, segment_session, SessionSealer, Share,
};
use tba_core::entropy::{ChallengeBits, Entropy, TrgSource};
use tba_core::id::{BeaconId, HapId, ParticipantId, SessionId};
use tba_core::recorder::{BeaconRef, DirectPublisher, Recorder, SceneSource, SessionConfig};
use tba_core::repository::{HapLog, HapRequest};
use tba_core::simnet::{simulate, PresenceEntry, ScenarioConfig};
use tba_core::{
    bracket_report, challenge_of_record, digest, prepare_submission, truncate_hex64, Digest,
    Recording,
};

use crate::error::CliError;
use crate::{BeaconArgs, HapCommand, OpenArgs, SealArgs, SessionArgs, SimArgs, VerifyArgs};

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::NoInput(path.to_path_buf(), e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::NoInput(path.to_path_buf(), e))
}

/// Reads a public-data file the caller may legitimately lack.
fn read_optional(path: &Path) -> Result<Option<String>, CliError> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(Some(text)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            eprintln!(
                "tba: {} not found; treating it as unavailable",
                path.display()
            );
            Ok(None)
        }
        Err(e) => Err(CliError::NoInput(path.to_path_buf(), e)),
    }
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, data).map_err(|e| CliError::CantCreate(path.to_path_buf(), e))
}

/// Writes one line to stdout. A closed pipe is not an error.
fn emit(line: impl std::fmt::Display) {
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{line}").and_then(|()| out.flush());
}

fn print_json(value: &serde_json::Value) {
    emit(value);
}

fn label_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn width(bits: u16) -> Result<ChallengeBits, CliError> {
    ChallengeBits::new(bits).map_err(|e| CliError::Usage(e.to_string()))
}

fn hex_digest(s: &str, what: &str) -> Result<Digest, CliError> {
    Digest::from_hex(s).map_err(|e| CliError::Usage(format!("--{what}: {e}")))
}

fn entropy(seed: Option<u64>, label: &str) -> Entropy {
    match seed {
        Some(s) => Entropy::from_u64(s, label),
        None => Entropy::Os,
    }
}

pub fn beacon(a: BeaconArgs) -> Result<ExitCode, CliError> {
    if let Some(archive) = a.serve {
        return beacon_serve(&archive, a.delta);
    }
    let out = a.out.expect("clap requires --out");
    let trg = TrgSource::new(entropy(a.seed, "beacon"), width(a.bits)?);
    let mut b = Beacon::new(BeaconId::from_label(&label_of(&out)), a.delta, trg)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    for t in a.start..a.start.saturating_add(a.ticks) {
        b.step(t).map_err(CliError::internal)?;
    }
    write(&out, b.archive().to_jsonl())?;
    Ok(ExitCode::SUCCESS)
}

fn beacon_serve(path: &Path, delta: u64) -> Result<ExitCode, CliError> {
    let archive = BeaconArchive::from_jsonl(
        BeaconId::from_label(&label_of(path)),
        delta,
        &read_text(path)?,
    )
    .map_err(|e| CliError::data(path, e))?;
    serve_lines(|line| {
        let req: BeaconRequest = serde_json::from_str(line).map_err(|e| e.to_string())?;
        Ok(serde_json::to_value(archive.answer(&req)).expect("emission serializes"))
    })
}

/// Answers one JSON request per stdin line with one JSON line on stdout.
fn serve_lines(
    mut answer: impl FnMut(&str) -> Result<serde_json::Value, String>,
) -> Result<ExitCode, CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in io::stdin().lock().lines() {
        let line = line.map_err(CliError::internal)?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = answer(&line).unwrap_or_else(|e| json!({ "error": e }));
        writeln!(out, "{reply}").map_err(CliError::internal)?;
        out.flush().map_err(CliError::internal)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn load_log(path: Option<&Path>, id: HapId) -> Result<HapLog, CliError> {
    match path {
        Some(p) => HapLog::from_jsonl(id, &read_text(p)?).map_err(|e| CliError::data(p, e)),
        None => Ok(HapLog::new(id)),
    }
}

pub fn hap(op: HapCommand) -> Result<ExitCode, CliError> {
    match op {
        HapCommand::Prepare { file } => {
            emit(prepare_submission(&read_bytes(&file)?).to_hex());
        }
        HapCommand::Submit { log, s, at, out } => {
            let s = hex_digest(&s, "s")?;
            let mut log = load_log(log.as_deref(), HapId::from_index(0))?;
            let receipt = log
                .submit(&s, at)
                .map_err(|e| CliError::Usage(e.to_string()))?
                .ok_or_else(|| CliError::internal("submission dropped"))?;
            write(&out, log.to_jsonl())?;
            print_json(&serde_json::to_value(receipt).expect("receipt serializes"));
        }
        HapCommand::Lookup { log, v } => {
            let v = hex_digest(&v, "v")?;
            let log = load_log(Some(&log), HapId::from_index(0))?;
            print_json(&match log.lookup(&v) {
                Some(t) => json!({ "t": t }),
                None => serde_json::Value::Null,
            });
        }
        HapCommand::Serve { log, out, clock } => {
            let mut log = load_log(log.as_deref(), HapId::from_index(0))?;
            let mut now = clock.unwrap_or_else(|| log.records().last().map_or(0, |r| r.t + 1));
            let code = serve_lines(|line| {
                let req: HapRequest = serde_json::from_str(line).map_err(|e| e.to_string())?;
                let reply = log.answer(&req, now).map_err(|e| e.to_string())?;
                if matches!(req, HapRequest::Submit { .. }) {
                    now += 1;
                }
                Ok(serde_json::to_value(reply).expect("response serializes"))
            })?;
            if let Some(out) = out {
                write(&out, log.to_jsonl())?;
            }
            return Ok(code);
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Everything a sealed session adds to a plain one.
pub struct Discreet {
    presence: Vec<PresenceEntry>,
    court_key: [u8; 32],
    shares_out: PathBuf,
    key_seed: Option<u64>,
}

pub fn seal(a: SealArgs) -> Result<ExitCode, CliError> {
    let presence = serde_json::from_str(&read_text(&a.presence)?)
        .map_err(|e| CliError::data(&a.presence, e))?;
    record(
        a.session,
        Some(Discreet {
            presence,
            court_key: digest(a.court_key.as_bytes()).0,
            shares_out: a.shares_out,
            key_seed: a.key_seed,
        }),
    )
}

pub fn record(a: SessionArgs, discreet: Option<Discreet>) -> Result<ExitCode, CliError> {
    let archives = a
        .beacons
        .iter()
        .map(|p| {
            BeaconArchive::from_jsonl(BeaconId::from_label(&label_of(p)), a.delta, &read_text(p)?)
                .map_err(|e| CliError::data(p, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut logs = if a.logs.is_empty() {
        (0..a.repos)
            .map(|i| HapLog::new(HapId::from_index(i as u64)))
            .collect()
    } else {
        a.logs
            .iter()
            .enumerate()
            .map(|(i, p)| load_log(Some(p), HapId::from_index(i as u64)))
            .collect::<Result<Vec<_>, _>>()?
    };

    let refs = archives
        .iter()
        .map(|x| BeaconRef {
            id: x.id,
            delta: a.delta,
        })
        .collect();
    let mut cfg = SessionConfig::new(
        SessionId::from_label(&a.session),
        refs,
        logs.iter().map(|l| l.id).collect(),
    );
    cfg.chunk_period = a.period;
    cfg.challenge_bits = width(a.bits)?;
    let mut secondary = match &a.secondary {
        Some(p) => {
            cfg.coupling_enabled = true;
            cfg.secondary_bytes_per_tick = a.secondary_rate;
            Some(SceneSource::from_bytes(
                read_bytes(p)?,
                a.secondary_rate as usize,
            ))
        }
        None => None,
    };
    let mut scene = match &a.scene {
        Some(p) => SceneSource::from_bytes(read_bytes(p)?, a.rate),
        None => SceneSource::synthetic(a.seed, "scene", a.rate),
    };
    let start = a.start.unwrap_or(a.delta);

    let mut shares = Vec::new();
    let mut recorder = match &discreet {
        None => Recorder::new(cfg, start),
        Some(d) => {
            let presence: Vec<(u64, BTreeSet<ParticipantId>)> = d
                .presence
                .iter()
                .map(|e| {
                    (
                        e.t,
                        e.present
                            .iter()
                            .map(|n| ParticipantId::from_label(n))
                            .collect(),
                    )
                })
                .collect();
            let end = start + a.chunks * a.period;
            let plan =
                segment_session(&presence, end).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut keys = entropy(d.key_seed, "segment-keys");
            let (sealer, issued) = SessionSealer::new(&plan.segments, &d.court_key, &mut keys)
                .map_err(CliError::internal)?;
            shares = issued;
            Recorder::with_sealer(cfg, start, sealer)
        }
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let archive_refs: Vec<&BeaconArchive> = archives.iter().collect();
    let mut publisher = DirectPublisher {
        logs: &mut logs,
        delay: a.delay,
    };
    for _ in 0..a.chunks {
        let (t_start, _) = recorder.next_interval();
        let challenge = challenge_of_record(
            t_start,
            recorder.header().config.challenge_bits,
            &archive_refs,
        );
        if let Err(e @ CombineError::InsufficientArchive { .. }) = &challenge {
            return Err(CliError::Usage(format!("{e}; generate more beacon ticks")));
        }
        recorder
            .record_chunk(&mut scene, secondary.as_mut(), challenge, &mut publisher)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    let (rec, seal) = recorder
        .finalize(&mut publisher)
        .map_err(|e| CliError::Data(e.to_string()))?;

    write(&a.out, rec.to_json())?;
    fs::create_dir_all(&a.log_dir).map_err(|e| CliError::CantCreate(a.log_dir.clone(), e))?;
    for (i, log) in logs.iter().enumerate() {
        write(&a.log_dir.join(format!("hap{i}.jsonl")), log.to_jsonl())?;
    }
    if let Some(d) = &discreet {
        write(
            &d.shares_out,
            serde_json::to_string_pretty(&shares).expect("shares serialize"),
        )?;
    }
    print_json(&json!({
        "chunks": rec.chunks.len(),
        "gaps": rec.gaps.len(),
        "head": rec.chain.last(),
        "seal": seal,
    }));
    Ok(ExitCode::SUCCESS)
}

fn load_manifest(path: &Path) -> Result<Recording, CliError> {
    Recording::from_json(&read_text(path)?).map_err(|e| CliError::data(path, e))
}

pub fn open(a: OpenArgs) -> Result<ExitCode, CliError> {
    let rec = load_manifest(&a.manifest)?;
    let keys = match (&a.shares, &a.court_key) {
        (Some(path), _) => {
            let shares: Vec<Share> =
                serde_json::from_str(&read_text(path)?).map_err(|e| CliError::data(path, e))?;
            rec.access
                .iter()
                .map(|r| {
                    let mine: Vec<Share> = shares
                        .iter()
                        .filter(|s| s.segment == r.segment_id)
                        .cloned()
                        .collect();
                    reconstruct_key(&mine, r)
                        .map_err(|e| CliError::Data(format!("segment {}: {e}", r.segment_id)))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        (None, Some(label)) => {
            let court = digest(label.as_bytes()).0;
            rec.access
                .iter()
                .map(|r| {
                    court_open(&r.court_escrow, r.segment_id, &court, &r.key_checksum)
                        .map_err(|e| CliError::Data(format!("segment {}: {e}", r.segment_id)))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "--shares or --court-key is required".into(),
            ))
        }
    };
    let plain = open_recording(&rec, &keys).map_err(|e| CliError::Data(e.to_string()))?;
    write(&a.out, plain.concat())?;
    print_json(
        &json!({ "chunks": plain.len(), "bytes": plain.iter().map(Vec::len).sum::<usize>() }),
    );
    Ok(ExitCode::SUCCESS)
}

pub fn verify(a: VerifyArgs) -> Result<ExitCode, CliError> {
    let rec = load_manifest(&a.manifest)?;
    let cfg = &rec.header.config;
    if a.beacons.len() > cfg.beacons.len() || a.logs.len() > cfg.repositories.len() {
        return Err(CliError::Usage(format!(
            "manifest names {} beacons and {} repositories; got {} archives and {} logs",
            cfg.beacons.len(),
            cfg.repositories.len(),
            a.beacons.len(),
            a.logs.len()
        )));
    }
    let mut archives = Vec::new();
    for (b, path) in cfg.beacons.iter().zip(&a.beacons) {
        if let Some(text) = read_optional(path)? {
            archives.push(
                BeaconArchive::from_jsonl(b.id, b.delta, &text)
                    .map_err(|e| CliError::data(path, e))?,
            );
        }
    }
    let mut logs = Vec::new();
    for (id, path) in cfg.repositories.iter().zip(&a.logs) {
        if let Some(text) = read_optional(path)? {
            logs.push(HapLog::from_jsonl(*id, &text).map_err(|e| CliError::data(path, e))?);
        }
    }
    let track = a.secondary.as_deref().map(read_bytes).transpose()?;
    let report = bracket_report(
        &rec,
        &archives.iter().collect::<Vec<_>>(),
        &logs.iter().collect::<Vec<_>>(),
        track.as_deref(),
    );
    emit(serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(ExitCode::from(report.overall.exit_code() as u8))
}

pub fn sim(a: SimArgs) -> Result<ExitCode, CliError> {
    let cfg = match (&a.config, &a.preset) {
        (Some(path), _) => serde_json::from_str::<ScenarioConfig>(&read_text(path)?)
            .map_err(|e| CliError::data(path, e))?,
        (None, Some(name)) => ScenarioConfig::standard(name, a.seed)
            .ok_or_else(|| CliError::Usage(format!("unknown preset {name}; expected S1 to S6")))?,
        (None, None) => return Err(CliError::Usage("--config or --preset is required".into())),
    };
    let outcome = simulate(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    write(&a.out, outcome.report.to_json())?;
    if let Some(dir) = &a.artifacts {
        fs::create_dir_all(dir).map_err(|e| CliError::CantCreate(dir.clone(), e))?;
        if let Some(rec) = &outcome.recording {
            write(&dir.join("recording.json"), rec.to_json())?;
        }
        for (i, b) in outcome.archives.iter().enumerate() {
            write(&dir.join(format!("beacon{i}.jsonl")), b.to_jsonl())?;
        }
        for (i, l) in outcome.logs.iter().enumerate() {
            write(&dir.join(format!("hap{i}.jsonl")), l.to_jsonl())?;
        }
        write(&dir.join("secondary.bin"), &outcome.secondary_track)?;
        if !outcome.shares.is_empty() {
            write(
                &dir.join("shares.json"),
                serde_json::to_string_pretty(&outcome.shares).expect("shares serialize"),
            )?;
        }
    }
    print_json(&json!({
        "verdict": outcome.report.verdict,
        "max_width": outcome.report.max_width,
        "adversary_success": outcome.report.adversary_success,
    }));
    Ok(ExitCode::SUCCESS)
}

pub fn lite_hash(file: &Path) -> Result<ExitCode, CliError> {
    emit(truncate_hex64(&digest(&read_bytes(file)?)));
    Ok(ExitCode::SUCCESS)
}
