//! `msvc`: key generation, server daemons, verified delegation, and the
//! benchmark and attack simulations.

mod commands;
mod config;
mod error;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use crate::commands::{AdversaryKind, DelegateArgs};
use crate::config::CommonArgs;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "msvc", version, about = "Verifiable delegation of F x to several servers")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Share a matrix: writes server-<l>.setup for each server and client.key into --out.
    Keygen {
        /// JSON array of rows; a random --m x --d matrix (saved as function.json) if absent.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Session id; random if absent.
        #[arg(long)]
        session: Option<u64>,
        /// Verifications before the key must be regenerated [default: floor(q / (2^40 ab)), at least 1].
        #[arg(long)]
        max_uses: Option<u64>,
    },
    /// Run a server daemon.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7300")]
        bind: String,
        /// Directory where received shares are kept across restarts.
        #[arg(long, env = "MSVC_STATE_DIR")]
        state_dir: Option<PathBuf>,
        /// Corrupt every result, seeded (for testing clients).
        #[arg(long)]
        tamper_seed: Option<u64>,
    },
    /// Compute F x on the daemons and verify it; prints F x as JSON.
    Delegate {
        #[arg(long)]
        key: PathBuf,
        /// JSON array holding x; random if absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Send the share files in this directory to the daemons first.
        #[arg(long)]
        provision: Option<PathBuf>,
        /// Save the input key and server results for `verify`.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Per-request timeout in seconds.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
    },
    /// Re-check a saved transcript offline.
    Verify {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Time naive F x against the client's work; writes CSV.
    Bench {
        /// Square sizes m = d to sweep.
        #[arg(long, value_delimiter = ',', default_value = "500,1000,1500,2000,2500,3000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
    /// Estimate how often an adversary gets a wrong value accepted.
    AttackSim {
        #[arg(long, value_enum, default_value = "random-tamper")]
        adversary: AdversaryKind,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Delegation attempts per trial.
        #[arg(long, default_value_t = 1)]
        p: usize,
    },
    /// Retrieve one database entry privately and verifiably.
    Pir {
        /// JSON array of entries, or a binary file with --raw; a 4-entry demo if absent.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Treat --db as bytes split into 31-byte chunks.
        #[arg(long)]
        raw: bool,
        /// 1-based entry index.
        #[arg(long)]
        index: usize,
    },
    /// Evaluate a polynomial through delegation.
    Poly {
        /// JSON polynomial description.
        #[arg(long)]
        spec: PathBuf,
        /// Point coordinates in decimal, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        point: Vec<String>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let settings = cli.common.resolve()?;
    match cli.command {
        Command::Keygen {
            matrix,
            session,
            max_uses,
        } => commands::keygen(&settings, matrix.as_deref(), session, max_uses),
        Command::Serve {
            bind,
            state_dir,
            tamper_seed,
        } => commands::serve(bind, state_dir, tamper_seed),
        Command::Delegate {
            key,
            input,
            provision,
            transcript,
            timeout,
        } => commands::delegate(
            &settings,
            DelegateArgs {
                key: &key,
                input: input.as_deref(),
                provision: provision.as_deref(),
                transcript: transcript.as_deref(),
                timeout: Duration::from_secs(timeout.max(1)),
            },
        ),
        Command::Verify { key, transcript } => commands::verify_transcript(&settings, &key, &transcript),
        Command::Bench { sizes, runs } => commands::bench(&settings, &sizes, runs),
        Command::AttackSim { adversary, trials, p } => commands::attack_sim(&settings, adversary, trials, p),
        Command::Pir { db, raw, index } => commands::pir(&settings, db.as_deref(), raw, index),
        Command::Poly { spec, point } => commands::poly(&settings, &spec, &point),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("msvc: {e}");
            e.exit_code()
        }
    }
}
