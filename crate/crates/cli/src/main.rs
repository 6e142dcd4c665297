mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "acrepair", version, about = "Repair access control vulnerabilities in Solidity contracts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Repair one vulnerable function.
    Repair(RepairArgs),
    /// Replay a recorded transcript for a repair case.
    Replay(RepairArgs),
    /// Mine role-permission pairs from a directory of contracts.
    Mine(MineArgs),
    /// Inspect or extend the role-permission taxonomy.
    Taxonomy(TaxonomyArgs),
    /// Run every case below a directory and score the results.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RepairArgs {
    /// Solidity files or directories, or one case directory with a case.toml.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Vulnerable function as `Contract.function`.
    #[arg(long)]
    pub function: Option<String>,
    /// Vulnerability description passed to the prompts.
    #[arg(long)]
    pub description: Option<String>,
    /// Model provider: live, replay or mock.
    #[arg(long, default_value = "live")]
    pub provider: String,
    /// Recorded transcript (JSONL) for replay and mock.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Taxonomy file; created from the shipped taxonomy when missing and
    /// updated when a new pair is proposed.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Token budget for the context graph, or `none`.
    #[arg(long, default_value = "6000")]
    pub token_budget: String,
    /// Confirm the detector report with Q0 before repairing.
    #[arg(long)]
    pub copilot: bool,
    /// Accept the Q0 verdict without asking.
    #[arg(long)]
    pub yes: bool,
    /// Case identifier recorded in the transcript.
    #[arg(long)]
    pub case_id: Option<String>,
    /// Output directory [default: acrepair-out/<case id>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MineArgs {
    /// Directory of Solidity contracts.
    pub dir: PathBuf,
    /// Number of top pairs used for the coverage figure.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Output directory [default: acrepair-out/mine].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TaxonomyArgs {
    /// Taxonomy file; the shipped taxonomy when omitted.
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,
    #[command(subcommand)]
    pub action: TaxonomyAction,
}

#[derive(Subcommand, Debug)]
pub enum TaxonomyAction {
    /// Print every role with its permissions.
    List,
    /// Write the taxonomy as TOML.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    /// Add a pair to the taxonomy file.
    Add {
        #[arg(long)]
        role: String,
        #[arg(long)]
        permission: String,
        /// Example permission check; repeatable.
        #[arg(long = "check")]
        checks: Vec<String>,
    },
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Directory whose subdirectories are case directories.
    pub root: PathBuf,
    #[arg(long, default_value = "replay")]
    pub provider: String,
    /// Cases run in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long, default_value = "6000")]
    pub token_budget: String,
    /// Output directory [default: acrepair-out/bench].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Repair(a) => commands::repair(a, false),
        Command::Replay(a) => commands::repair(a, true),
        Command::Mine(a) => commands::mine(a),
        Command::Taxonomy(a) => commands::taxonomy(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
