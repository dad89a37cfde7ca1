use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use smdd_cli::summarize::{summarize, write_summary_csv};
use smdd_cli::{execute, resolve_output_dir, CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "smdd",
    version,
    about = "Trust-region experiments for decision-dependent minimax problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a JSON run configuration.
    Run {
        config: PathBuf,
        /// Replace the configured seeds (comma-separated).
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
        /// Iteration budget for the selected solver.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Output directory [default: $SMDD_OUTPUT_ROOT/<config stem>, else runs/<config stem>].
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Seeds run concurrently on this many threads.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Aggregate run CSVs into per-iteration quartiles.
    Summarize {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(
    config: PathBuf,
    seeds: Option<Vec<u64>>,
    max_iters: Option<usize>,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<ExitCode, CliError> {
    let text = fs::read_to_string(&config).map_err(|e| CliError::Io {
        path: config.clone(),
        source: e,
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seeds) = seeds {
        cfg.seeds = seeds;
    }
    if let Some(iters) = max_iters {
        cfg.set_max_iters(iters);
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    let dir = resolve_output_dir(output_dir.as_deref(), &cfg, &config);
    let summary = execute(&cfg, &dir)?;
    let failed = summary.failures();
    for s in &summary.seeds {
        let status = match (&s.error, s.diverged) {
            (Some(e), _) => format!("error: {e}"),
            (None, true) => format!("diverged at iteration {}", s.diverged_at.unwrap_or(0)),
            (None, false) => format!(
                "final |grad Phi| {}",
                s.final_true_grad_norm.map_or("n/a".into(), |g| format!("{g:.4e}"))
            ),
        };
        println!("seed {}: {status}", s.seed);
    }
    println!("results in {}", dir.display());
    if failed > 0 {
        error!("{failed} of {} seeds failed", summary.seeds.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed_override,
            max_iters,
            output_dir,
            workers,
        } => run(config, seed_override, max_iters, output_dir, workers),
        Command::Summarize { dirs, output } => summarize(&dirs).and_then(|rows| {
            match output {
                Some(path) => {
                    let file = fs::File::create(&path).map_err(|e| CliError::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    write_summary_csv(file, &rows)?;
                }
                None => write_summary_csv(std::io::stdout().lock(), &rows)?,
            }
            Ok(ExitCode::SUCCESS)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e @ CliError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
