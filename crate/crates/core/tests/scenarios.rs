mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{oracle_sha256, to_hex};
use tba_core::beacon::{BeaconArchive, BeaconFault};
use tba_core::canonical_chunk_bytes;
use tba_core::repository::{majority_quorum, DropRule, HapFault};
use tba_core::simnet::{
    mutate_after_publication, simulate, Adversary, Mutation, ScenarioConfig, TimeField,
};
use tba_core::verifier::{bracket_report, Check, Overall, Status};

fn run(cfg: &ScenarioConfig) -> tba_core::simnet::ScenarioOutcome {
    simulate(cfg).expect("scenario runs")
}

#[test]
fn standard_suite_verdicts() {
    let expect = [
        ("S1", Overall::Authentic, false),
        ("S2", Overall::Authentic, false),
        ("S3", Overall::Authentic, false),
        ("S4", Overall::Tampered, false),
        ("S5", Overall::Tampered, false),
        ("S6", Overall::Authentic, true),
    ];
    for (name, verdict, success) in expect {
        let r = run(&ScenarioConfig::standard(name, 11).unwrap()).report;
        assert_eq!(r.verdict, verdict, "{name}");
        assert_eq!(r.adversary_success, success, "{name}");
    }
}

#[test]
fn equivocator_is_excluded_every_chunk() {
    let o = run(&ScenarioConfig::standard("S2", 4).unwrap());
    let excluded = o
        .report
        .events
        .iter()
        .filter(|e| e.kind == "excluded")
        .count();
    assert_eq!(excluded, 10);
    let rec = o.recording.unwrap();
    assert!(rec.gaps.is_empty());
}

#[test]
fn chain_matches_oracle() {
    let o = run(&ScenarioConfig::fault_free(12));
    let rec = o.recording.unwrap();
    let mut head = oracle_sha256(&rec.header.canonical_bytes());
    for (c, stored) in rec.chunks.iter().zip(&rec.chain) {
        let mut input = head.to_vec();
        input.extend(canonical_chunk_bytes(&rec.header.config.session_id, c).unwrap());
        head = oracle_sha256(&input);
        assert_eq!(to_hex(&head), stored.to_hex());
    }
}

#[test]
fn every_mask_on_one_chunk_metadata() {
    let mut cfg = ScenarioConfig::fault_free(13);
    cfg.chunks = 3;
    let o = run(&cfg);
    let rec = o.recording.as_ref().unwrap();
    let chunk = 1;
    for xor in 1..=255u8 {
        let mut edits = Vec::new();
        for offset in 0..32 {
            edits.push(Mutation::FlipChallenge { chunk, offset, xor });
            edits.push(Mutation::FlipCoupling { chunk, offset, xor });
        }
        for field in [TimeField::TStart, TimeField::TEnd, TimeField::ChallengeTime] {
            for byte in 0..8 {
                edits.push(Mutation::FlipTime {
                    chunk,
                    field,
                    byte,
                    xor,
                });
            }
        }
        for m in edits {
            let edited = mutate_after_publication(rec, std::slice::from_ref(&m)).unwrap();
            assert_ne!(o.verify(&edited).overall, Overall::Authentic, "{m:?}");
        }
    }
}

#[test]
fn reorder_and_deletion_detected() {
    let o = run(&ScenarioConfig::fault_free(14));
    let rec = o.recording.as_ref().unwrap();
    let last = rec.chunks.len() as u64 - 1;
    for m in [
        Mutation::Swap { a: 2, b: 5 },
        Mutation::Delete { chunk: 0 },
        Mutation::Delete { chunk: 4 },
        Mutation::Delete { chunk: last },
    ] {
        let edited = mutate_after_publication(rec, std::slice::from_ref(&m)).unwrap();
        assert_eq!(o.verify(&edited).overall, Overall::Tampered, "{m:?}");
    }
    // Re-chaining after a deletion does not help: the seal no longer matches.
    let mut rechained = mutate_after_publication(rec, &[Mutation::Delete { chunk: last }]).unwrap();
    rechained.chain = rechained
        .recompute_chain()
        .iter()
        .map(|h| h.digest)
        .collect();
    let report = o.verify(&rechained);
    assert_eq!(report.overall, Overall::Tampered);
    assert!(report
        .findings
        .iter()
        .any(|f| f.check == Check::Seal && f.status == Status::Fail));
}

#[test]
fn manifest_round_trips_through_json() {
    let o = run(&ScenarioConfig::fault_free(15));
    let rec = o.recording.as_ref().unwrap();
    let back = tba_core::Recording::from_json(&rec.to_json()).unwrap();
    assert_eq!(&back, rec);
    assert_eq!(o.verify(&back).overall, Overall::Authentic);
}

#[test]
fn archives_and_logs_round_trip_through_jsonl() {
    let o = run(&ScenarioConfig::fault_free(16));
    let rec = o.recording.as_ref().unwrap();
    let archives: Vec<_> = o
        .archives
        .iter()
        .map(|a| BeaconArchive::from_jsonl(a.id, a.delta, &a.to_jsonl()).unwrap())
        .collect();
    let logs: Vec<_> = o
        .logs
        .iter()
        .map(|l| tba_core::HapLog::from_jsonl(l.id, &l.to_jsonl()).unwrap())
        .collect();
    assert_eq!(archives, o.archives);
    let report = bracket_report(
        rec,
        &archives.iter().collect::<Vec<_>>(),
        &logs.iter().collect::<Vec<_>>(),
        Some(&o.secondary_track),
    );
    assert_eq!(report.overall, Overall::Authentic);
    assert_eq!(report.max_width, Some(6));
}

#[test]
fn missing_public_data_is_unverifiable_not_tampered() {
    let o = run(&ScenarioConfig::fault_free(17));
    let rec = o.recording.as_ref().unwrap();
    let logs: Vec<_> = o.logs.iter().collect();
    let two: Vec<_> = o.archives.iter().take(2).collect();
    assert_eq!(
        bracket_report(rec, &two, &logs, None).overall,
        Overall::Unverifiable
    );

    let mut short = o.archives.clone();
    short[0].truncate_after(20);
    let short: Vec<_> = short.iter().collect();
    assert_eq!(
        bracket_report(rec, &short, &logs, None).overall,
        Overall::Unverifiable
    );

    let archives: Vec<_> = o.archives.iter().collect();
    assert_eq!(
        bracket_report(rec, &archives, &[], None).overall,
        Overall::Unverifiable
    );
    assert_eq!(
        bracket_report(rec, &archives, &logs[..2], None).overall,
        Overall::Unverifiable
    );
}

#[test]
fn dropper_majority_boundary() {
    let mut cfg = ScenarioConfig::fault_free(18);
    for r in &mut cfg.repositories[..3] {
        *r = HapFault::Dropper {
            drop: DropRule::All,
        };
    }
    let r = run(&cfg).report;
    assert_eq!(r.verdict, Overall::Unverifiable);
    assert!(r.brackets.is_empty());

    for r in &mut cfg.repositories {
        *r = HapFault::Dropper {
            drop: DropRule::All,
        };
    }
    assert_eq!(run(&cfg).report.verdict, Overall::Tampered);
}

#[test]
fn single_dropped_submission_still_majority() {
    let mut cfg = ScenarioConfig::fault_free(19);
    cfg.repositories[0] = HapFault::Dropper {
        drop: DropRule::Submissions([0, 3, 4].into_iter().collect()),
    };
    let r = run(&cfg).report;
    assert_eq!(r.verdict, Overall::Authentic);
    assert_eq!(r.events.iter().filter(|e| e.kind == "dropped").count(), 3);
}

#[test]
fn rewriter_diverges_from_mirror() {
    let mut cfg = ScenarioConfig::fault_free(20);
    cfg.repositories[4] = HapFault::Rewriter;
    let o = run(&cfg);
    assert!(o.report.events.iter().any(|e| e.kind == "log-divergence"));
    assert_eq!(o.report.verdict, Overall::Authentic);
    assert_ne!(o.logs[4], o.mirrors[4]);
}

#[test]
fn staller_excluded_without_gap() {
    let mut cfg = ScenarioConfig::fault_free(21);
    cfg.beacons[0] = BeaconFault::Staller {
        skip: [8, 13, 14].into_iter().collect(),
    };
    let o = run(&cfg);
    assert!(o.report.events.iter().any(|e| e.kind == "stall"));
    assert_eq!(
        o.report.verdict,
        Overall::Authentic,
        "{:#?}",
        o.report.problems
    );
    assert_eq!(o.report.brackets.len(), 10);
}

#[test]
fn all_beacons_stalling_leaves_a_gap() {
    let mut cfg = ScenarioConfig::fault_free(22);
    let skip: BTreeSet<u64> = [13].into_iter().collect();
    cfg.beacons = vec![BeaconFault::Staller { skip }; 3];
    let o = run(&cfg);
    let rec = o.recording.unwrap();
    assert_eq!(rec.gaps.len(), 1);
    assert_eq!(rec.gaps[0].t_start, 13);
    assert_eq!(rec.chunks.len(), 9);
    assert_eq!(
        o.report.verdict,
        Overall::Authentic,
        "{:#?}",
        o.report.problems
    );
}

#[test]
fn partial_collusion_fails() {
    for k in 0..3 {
        let mut cfg = ScenarioConfig::fault_free(23);
        cfg.adversary = Adversary::ColludingBeacons { k };
        let r = run(&cfg).report;
        assert!(!r.adversary_success, "k={k}");
        assert_eq!(r.verdict, Overall::Tampered, "k={k}");
    }
}

#[test]
fn coupling_off_is_not_applicable() {
    let mut cfg = ScenarioConfig::fault_free(24);
    cfg.coupling = false;
    let o = run(&cfg);
    assert_eq!(o.report.verdict, Overall::Authentic);
    assert!(o
        .recording
        .unwrap()
        .chunks
        .iter()
        .all(|c| c.coupling_digest.is_none()));
}

#[test]
fn scenario_config_parses_from_json() {
    let text = r#"{
        "seed": 3, "chunks": 4, "delta": 2, "network_delay": 2, "chunk_period": 3,
        "beacons": [{"kind": "honest"}, {"kind": "staller", "skip": [5]}],
        "repositories": [{"kind": "honest"}, {"kind": "rewriter"}, {"kind": "honest"}],
        "adversary": {"kind": "none"}
    }"#;
    let cfg: ScenarioConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.bytes_per_tick, 64);
    let r = run(&cfg).report;
    assert_eq!(r.verdict, Overall::Authentic, "{:#?}", r.problems);
    assert!(r.brackets.iter().all(|b| b.width == 5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn width_is_period_plus_delay(period in 1u64..8, delay in 0u64..4, seed in any::<u64>()) {
        let mut cfg = ScenarioConfig::fault_free(seed);
        cfg.chunks = 4;
        cfg.chunk_period = period;
        cfg.network_delay = delay;
        let r = run(&cfg).report;
        prop_assert_eq!(r.verdict, Overall::Authentic);
        prop_assert_eq!(r.brackets.len(), 4);
        prop_assert!(r.brackets.iter().all(|b| b.width == period + delay));
    }

    #[test]
    fn quorum_is_strict_majority(m in 1usize..50) {
        let q = majority_quorum(m);
        prop_assert!(2 * q > m);
        prop_assert!(2 * (q - 1) <= m);
    }

    #[test]
    fn digest_matches_oracle(data in proptest::collection::vec(any::<u8>(), 0..300)) {
        prop_assert_eq!(tba_core::digest(&data).to_hex(), to_hex(&oracle_sha256(&data)));
    }

    #[test]
    fn random_payload_edit_never_authentic(seed in 0u64..4, chunk in 0u64..10, offset in 0usize..320, xor in 1u8..=255) {
        let o = run(&ScenarioConfig::fault_free(seed));
        let rec = o.recording.as_ref().unwrap();
        let edited = mutate_after_publication(rec, &[Mutation::FlipPayload { chunk, offset, xor }]).unwrap();
        prop_assert_ne!(o.verify(&edited).overall, Overall::Authentic);
    }
}
