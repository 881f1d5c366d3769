//! Browser demo over `tba-core`.
//!
//! Each operation is a plain function returning JSON or an error string, so
//! it runs natively under `cargo test`; the `#[wasm_bindgen]` exports only
//! convert errors to JavaScript values.
//!
//! Randomness here is always seeded from user input. Shares split on this
//! page are reproducible by anyone who knows the seed.

use serde_json::json;
use wasm_bindgen::prelude::*;

use tba_core::discretion::{xor_combine, xor_split};
use tba_core::simnet::{mutate_after_publication, simulate, Mutation, ScenarioConfig};
use tba_core::{digest, truncate_hex64, Entropy};

/// Config JSON for one of the standard scenarios, ready to edit.
pub fn preset_config(name: &str, seed: u64) -> Result<String, String> {
    let cfg =
        ScenarioConfig::standard(name, seed).ok_or_else(|| format!("unknown scenario {name}"))?;
    Ok(serde_json::to_string_pretty(&cfg).expect("config serializes"))
}

/// Runs a scenario, optionally flips one payload byte of the result, and
/// returns the verdict with per-chunk detail.
pub fn explore_scenario(config_json: &str, flip: Option<(u64, usize)>) -> Result<String, String> {
    let cfg: ScenarioConfig = serde_json::from_str(config_json).map_err(|e| e.to_string())?;
    if cfg.chunks > 200 {
        return Err("at most 200 chunks in the browser".into());
    }
    let outcome = simulate(&cfg).map_err(|e| e.to_string())?;
    let Some(rec) = &outcome.recording else {
        return Ok(json!({ "report": outcome.report, "chunks": [] }).to_string());
    };
    let (rec, report) = match flip {
        Some((chunk, offset)) => {
            let edited = mutate_after_publication(
                rec,
                &[Mutation::FlipPayload {
                    chunk,
                    offset,
                    xor: 1,
                }],
            )
            .map_err(|e| e.to_string())?;
            let report = outcome.verify(&edited);
            (edited, report)
        }
        None => (
            rec.clone(),
            outcome.bracket_report.clone().expect("verified"),
        ),
    };
    let chunks: Vec<_> = rec
        .chunks
        .iter()
        .zip(&rec.chain)
        .map(|(c, head)| {
            let bracket = report.brackets.iter().find(|b| b.chunk_index == c.index);
            let problems: Vec<_> = report
                .findings
                .iter()
                .filter(|f| {
                    f.chunk == Some(c.index) && f.status != tba_core::verifier::Status::Pass
                })
                .collect();
            json!({
                "index": c.index,
                "t_start": c.t_start,
                "t_end": c.t_end,
                "bytes": c.payload.len(),
                "head": truncate_hex64(head),
                "bracket": bracket,
                "problems": problems,
            })
        })
        .collect();
    Ok(json!({
        "verdict": report.overall,
        "max_width": report.max_width,
        "events": outcome.report.events,
        "adversary_success": outcome.report.adversary_success && flip.is_none(),
        "chunks": chunks,
    })
    .to_string())
}

/// The 16-hex-digit truncated digest of `data`.
pub fn lite_hash_of(data: &[u8]) -> String {
    truncate_hex64(&digest(data))
}

/// Splits `secret` into `n` XOR shares, returned as hex.
pub fn split_secret(secret: &str, n: usize, seed: u64) -> Result<String, String> {
    if !(1..=16).contains(&n) {
        return Err("between 1 and 16 shares".into());
    }
    let mut entropy = Entropy::from_u64(seed, "web-shares");
    let shares = xor_split(secret.as_bytes(), n, &mut entropy).map_err(|e| e.to_string())?;
    Ok(json!({ "shares": shares.iter().map(hex::encode).collect::<Vec<_>>() }).to_string())
}

/// XORs hex shares back together. Any missing or altered share yields noise.
pub fn combine_shares(shares_json: &str) -> Result<String, String> {
    let hexes: Vec<String> = serde_json::from_str(shares_json).map_err(|e| e.to_string())?;
    let shares = hexes
        .iter()
        .map(|h| hex::decode(h.trim()).map_err(|e| format!("share {h:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let width = shares.first().map_or(0, Vec::len);
    if shares.iter().any(|s| s.len() != width) {
        return Err("shares differ in length".into());
    }
    let secret = xor_combine(shares.iter().map(Vec::as_slice), width);
    Ok(json!({
        "hex": hex::encode(&secret),
        "text": String::from_utf8_lossy(&secret),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn preset(name: &str, seed: u64) -> Result<String, JsValue> {
    preset_config(name, seed).map_err(|e| JsValue::from_str(&e))
}

/// `flip_chunk < 0` runs the scenario untouched.
#[wasm_bindgen]
pub fn explore(config_json: &str, flip_chunk: i64, flip_offset: usize) -> Result<String, JsValue> {
    let flip = u64::try_from(flip_chunk).ok().map(|c| (c, flip_offset));
    explore_scenario(config_json, flip).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn lite_hash(data: &[u8]) -> String {
    lite_hash_of(data)
}

#[wasm_bindgen]
pub fn split(secret: &str, n: usize, seed: u64) -> Result<String, JsValue> {
    split_secret(secret, n, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn combine(shares_json: &str) -> Result<String, JsValue> {
    combine_shares(shares_json).map_err(|e| JsValue::from_str(&e))
}
