use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gausstest_cli::{output, run_with_workers, summary, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "gausstest", version, about = "Run and summarize Gaussian sequence model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a JSON config and write a CSV table.
    Run {
        config: PathBuf,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output table; defaults to the config's `output`, then `results.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print pass/fail counts of a table; exits nonzero if any row failed.
    Summarize { table: PathBuf },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            workers,
        } => match run_command(&config, seed, out, workers) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Summarize { table } => match summary::summarize_path(&table) {
            Ok(s) => {
                println!("{s}");
                if s.all_pass() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}

fn run_command(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<ExitCode, CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let path = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    let result = run_with_workers(&cfg, workers)?;
    let threads = workers.unwrap_or_else(rayon::current_num_threads);
    output::write(&path, &cfg, &result, threads)?;
    let failed = result.failed_rows();
    eprintln!(
        "wrote {} rows to {} (config {})",
        result.records.len(),
        path.display(),
        &result.config_hash[..12]
    );
    if failed > 0 {
        eprintln!("{failed} rows failed to compute; see the status and message columns");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
