use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geominimax_cli::{run_check, run_experiment, run_replicates, CheckTarget, ExperimentConfig, HarnessError};

#[derive(Debug, Parser)]
#[command(name = "geominimax", version, about = "Riemannian minimax experiments and invariant checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for replicates.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Number of consecutive seeds to run, each in `seed-<s>/`.
        #[arg(long)]
        replicates: Option<u64>,
    },
    /// Run an invariant suite: manifolds, triangles, gradients or rate.
    Check {
        target: CheckTarget,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run_command(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, jobs: usize, replicates: Option<u64>) -> ExitCode {
    let mut cfg = match ExperimentConfig::from_file(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = out.unwrap_or_else(|| cfg.out.clone());

    let results = match replicates {
        None | Some(1) if jobs <= 1 => vec![(cfg.seed, run_experiment(&cfg, &out))],
        _ => {
            let count = replicates.unwrap_or(jobs as u64).max(1);
            let seeds: Vec<u64> = (0..count).map(|i| cfg.seed.wrapping_add(i)).collect();
            run_replicates(&cfg, &out, &seeds, jobs)
        }
    };
    let mut code = ExitCode::SUCCESS;
    for (seed, r) in results {
        match r {
            Ok(summary) => {
                let last = summary.outcome.records.last();
                println!(
                    "seed={seed} status={} iters={} eta={:.6e} final_dist={} trace={}",
                    summary.outcome.status.label(),
                    last.map_or(0, |r| r.t),
                    summary.outcome.eta,
                    last.and_then(|r| r.dist_to_saddle).map_or("-".to_string(), |d| format!("{d:.6e}")),
                    summary.trace_path.display()
                );
            }
            Err(e) => {
                eprintln!("seed={seed}");
                code = fail(&e);
            }
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share exit code 1 with config errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run { config, out, seed, jobs, replicates } => run_command(config, out, seed, jobs, replicates),
        Command::Check { target, trials, seed } => {
            let trials = trials.unwrap_or_else(|| target.default_trials());
            match run_check(target, trials, seed) {
                Ok(lines) => {
                    for line in &lines {
                        println!("{line}");
                    }
                    if lines.iter().all(|l| l.passed) { ExitCode::SUCCESS } else { ExitCode::from(1) }
                }
                Err(e) => fail(&e),
            }
        }
    }
}
