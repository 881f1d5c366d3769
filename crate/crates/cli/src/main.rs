//! `tba`: run beacons and repositories from files, record and verify
//! bracketed sessions, seal and open discreet recordings, and run scenarios.
//!
//! Exit status: 0 success (verify: authentic), 1 tampered, 2 unverifiable,
//! 64 usage error, 65 malformed input, 66 unreadable input, 70 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod cmd;
mod error;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tba", version, about = "Time-bracketed authentication tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a precommitting beacon and write its archive, or answer requests
    /// against an archive.
    Beacon(BeaconArgs),
    /// Hash-and-publish repository operations.
    Hap {
        #[command(subcommand)]
        op: HapCommand,
    },
    /// Record a session against beacon archives, publishing to repositories.
    Record(RecordArgs),
    /// Record a discreet session: payloads encrypted per presence segment.
    Seal(SealArgs),
    /// Decrypt a sealed recording with participants' shares or the court key.
    Open(OpenArgs),
    /// Verify a recording against beacon archives and repository logs.
    Verify(VerifyArgs),
    /// Run a simulated scenario and write its report.
    Sim(SimArgs),
    /// Print the 64-bit truncated digest of a file.
    LiteHash { file: PathBuf },
}

#[derive(Debug, Args)]
struct BeaconArgs {
    /// Number of ticks to emit, starting at --start.
    #[arg(long, default_value_t = 10, conflicts_with = "serve")]
    ticks: u64,
    #[arg(long, default_value_t = 0)]
    start: u64,
    #[arg(long, default_value_t = tba_core::beacon::DEFAULT_DELTA)]
    delta: u64,
    /// Seed for a reproducible beacon; operating-system entropy otherwise.
    #[arg(long)]
    seed: Option<u64>,
    /// Reveal width in bits.
    #[arg(long, default_value_t = 256)]
    bits: u16,
    #[arg(long, required_unless_present = "serve")]
    out: Option<PathBuf>,
    /// Answer JSON-line requests from stdin against this archive instead.
    #[arg(long, value_name = "ARCHIVE")]
    serve: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum HapCommand {
    /// Print the submission digest of a file (the only value sent to a repository).
    Prepare { file: PathBuf },
    /// Submit a digest, writing the resulting log to --out and the receipt to stdout.
    Submit {
        /// Existing log to extend; a fresh log when absent.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Submission, as hex.
        #[arg(long)]
        s: String,
        /// Publication tick.
        #[arg(long)]
        at: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Look up a published value; prints `{"t":..}` or `null`.
    Lookup {
        #[arg(long)]
        log: PathBuf,
        /// Published value, as hex.
        #[arg(long)]
        v: String,
    },
    /// Answer JSON-line requests from stdin. Each submission is published
    /// one tick after the previous one.
    Serve {
        #[arg(long)]
        log: Option<PathBuf>,
        /// Where to write the log on end of input.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tick of the first publication; defaults to one past the log's last.
        #[arg(long)]
        clock: Option<u64>,
    },
}

#[derive(Debug, Args)]
struct SessionArgs {
    /// Beacon archives, one flag per beacon. Order fixes the session header.
    #[arg(long = "beacon", value_name = "ARCHIVE", required = true)]
    beacons: Vec<PathBuf>,
    /// Commit-to-reveal delay shared by all beacons.
    #[arg(long, default_value_t = tba_core::beacon::DEFAULT_DELTA)]
    delta: u64,
    /// Existing repository logs to extend, one per repository.
    #[arg(long = "log", value_name = "LOG")]
    logs: Vec<PathBuf>,
    /// Number of fresh repositories, used when no --log is given.
    #[arg(long, default_value_t = 5)]
    repos: usize,
    /// Directory that receives `hap<i>.jsonl` for every repository.
    #[arg(long)]
    log_dir: PathBuf,
    /// Raw scene bytes; synthetic seeded content when absent.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Secondary stream; enables modality coupling.
    #[arg(long)]
    secondary: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    secondary_rate: u32,
    /// Scene bytes per tick.
    #[arg(long, default_value_t = 64)]
    rate: usize,
    #[arg(long, default_value_t = 10)]
    chunks: u64,
    #[arg(long, default_value_t = 5)]
    period: u64,
    /// First chunk's start tick; defaults to the end of beacon warm-up.
    #[arg(long)]
    start: Option<u64>,
    /// Ticks between sending a submission and its publication.
    #[arg(long, default_value_t = 1)]
    delay: u64,
    #[arg(long, default_value_t = 256)]
    bits: u16,
    /// Session label; the session id is derived from it.
    #[arg(long, default_value = "session")]
    session: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Manifest output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RecordArgs {
    #[command(flatten)]
    session: SessionArgs,
}

#[derive(Debug, Args)]
struct SealArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// JSON array of `{"t": tick, "present": [names]}`.
    #[arg(long)]
    presence: PathBuf,
    /// Label from which the court key is derived.
    #[arg(long)]
    court_key: String,
    /// Where to write every participant's shares.
    #[arg(long)]
    shares_out: PathBuf,
    /// Seed segment keys and shares; operating-system entropy otherwise.
    #[arg(long)]
    key_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct OpenArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Shares file; every participant's share of a segment is needed.
    #[arg(long, required_unless_present = "court_key")]
    shares: Option<PathBuf>,
    /// Open through the court escrow instead of shares.
    #[arg(long)]
    court_key: Option<String>,
    /// Destination for the concatenated plaintext.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Beacon archives in header order. Missing files count as unavailable.
    #[arg(long = "beacon", value_name = "ARCHIVE")]
    beacons: Vec<PathBuf>,
    /// Repository logs in header order. Missing files count as unavailable.
    #[arg(long = "log", value_name = "LOG")]
    logs: Vec<PathBuf>,
    /// Secondary stream, to check modality coupling.
    #[arg(long)]
    secondary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Scenario config JSON.
    #[arg(long, required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// A standard scenario, S1 to S6.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report output path.
    #[arg(long)]
    out: PathBuf,
    /// Also write manifest, archives, logs and secondary track here.
    #[arg(long)]
    artifacts: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Beacon(a) => cmd::beacon(a),
        Command::Hap { op } => cmd::hap(op),
        Command::Record(a) => cmd::record(a.session, None),
        Command::Seal(a) => cmd::seal(a),
        Command::Open(a) => cmd::open(a),
        Command::Verify(a) => cmd::verify(a),
        Command::Sim(a) => cmd::sim(a),
        Command::LiteHash { file } => cmd::lite_hash(&file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(error::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("tba: {e}");
            ExitCode::from(e.code())
        }
    }
}
