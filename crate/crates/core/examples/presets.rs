//! Runs the six standard scenarios and prints one line per verdict.
//!
//! `cargo run -p tba-core --example presets -- 42`

use tba_core::simnet::{run_scenario, ScenarioConfig};

fn main() {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(42);
    for name in ["S1", "S2", "S3", "S4", "S5", "S6"] {
        let cfg = ScenarioConfig::standard(name, seed).expect("standard name");
        let r = run_scenario(&cfg).expect("standard scenarios are valid");
        println!(
            "{name}: {:?}, widest bracket {:?}, {} brackets, {} events, forger succeeded: {}",
            r.verdict,
            r.max_width,
            r.brackets.len(),
            r.events.len(),
            r.adversary_success,
        );
    }
}
