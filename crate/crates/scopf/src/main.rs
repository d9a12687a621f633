use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scopf::config::{Settings, Tuning};
use scopf::pipeline::{self, Code1Paths, Code2Paths, Outcome, ScorePaths};

#[derive(Parser)]
#[command(name = "scopf", version, about = "Two-stage security-constrained OPF")]
struct Cli {
    /// TOML file with defaults for any tuning flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Base-case solution (solution1) under a wall-clock budget.
    Code1 {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        con: PathBuf,
        #[arg(long, default_value = "solution1.txt")]
        out: PathBuf,
        /// Benders trace CSV, default `<out>.trace.csv`.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Prior base point (solution1 format) for realtime ranking.
        #[arg(long)]
        warm_point: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Per-contingency solutions (solution2) for a given solution1.
    Code2 {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        con: PathBuf,
        #[arg(long, default_value = "solution1.txt")]
        solution1: PathBuf,
        #[arg(long, default_value = "solution2.txt")]
        out: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Scores a solution pair.
    Score {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        con: PathBuf,
        #[arg(long, default_value = "solution1.txt")]
        solution1: PathBuf,
        #[arg(long, default_value = "solution2.txt")]
        solution2: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Prints `label,rank`, highest first.
    Rank {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        con: PathBuf,
        #[arg(long)]
        warm_point: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
}

fn settings(config: Option<&PathBuf>, flags: &Tuning) -> anyhow::Result<(Settings, Tuning)> {
    let file = match config {
        Some(p) => Tuning::from_file(p)?,
        None => Tuning::default(),
    };
    let merged = flags.clone().over(file);
    Ok((merged.settings(), merged))
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let config = cli.config.as_ref();
    match cli.command {
        Command::Code1 { case, con, out, trace, warm_point, tuning } => {
            let (s, _) = settings(config, &tuning)?;
            pipeline::code1(&Code1Paths { case, con, out, trace, warm_point }, &s)
        }
        Command::Code2 { case, con, solution1, out, tuning } => {
            let (s, _) = settings(config, &tuning)?;
            pipeline::code2(&Code2Paths { case, con, solution1, out }, &s)
        }
        Command::Score { case, con, solution1, solution2, tuning } => {
            let (s, _) = settings(config, &tuning)?;
            let report = pipeline::run_score(&ScorePaths { case, con, solution1, solution2 }, &s)?;
            print!("{}", pipeline::format_report(&report));
            Ok(Outcome::Complete)
        }
        Command::Rank { case, con, warm_point, tuning } => {
            let (s, merged) = settings(config, &tuning)?;
            let (net, cons) = pipeline::load(&case, &con)?;
            let khat = merged.khat.unwrap_or(cons.len());
            let ranked = pipeline::rank(&net, &cons, s.select, warm_point.as_deref(), khat)?;
            print!("{}", pipeline::format_ranking(&ranked));
            Ok(Outcome::Complete)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(o) => ExitCode::from(o.exit_code()),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}
