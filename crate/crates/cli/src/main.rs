use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use clumb::harness::{burn_in_report, build_env, run_experiment, write_outputs, ExperimentConfig};
use clumb::verify::{Status, Suite};

#[derive(Parser)]
#[command(name = "clumb", version, about = "Clustering-of-bandits benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured policy for the configured number of trials.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        /// Base seed for the trial streams.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (defaults to `out` from the config, then `results`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print burn-in times and instance gap diagnostics as JSON.
    DiagT0 {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run numeric verification suites and print one JSON report each.
    Verify {
        /// f1, chain, tlx, reduction, partition or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write `<suite>.json` reports here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the configured environment to a text file.
    ExportInstance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run {
            config,
            trials,
            seed,
            workers,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(n) = trials {
                cfg.trials = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w.max(1);
            }
            let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
            let result = run_experiment(&cfg)?;
            let files = write_outputs(&dir, &cfg, &result.trials, &result.summaries)?;
            println!("{:<14} {:>14} {:>10}", "policy", "mean_regret", "sem");
            for s in &result.summaries {
                println!("{:<14} {:>14.3} {:>10.3}", s.policy, s.final_mean_regret(), s.final_sem_regret());
            }
            println!("wrote {}, {} and {}", files.trials.display(), files.summary.display(), files.manifest.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::DiagT0 { config } => {
            let report = burn_in_report(&load(&config)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, seed, out } => {
            let suites = if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse::<Suite>()?] };
            let mut failed = false;
            for s in suites {
                log::info!("running suite {}", s.as_str());
                let report = s.run_default(seed)?;
                failed |= report.status == Status::Fail;
                let json = serde_json::to_string_pretty(&report)?;
                println!("{json}");
                if let Some(dir) = &out {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join(format!("{}.json", s.as_str())), &json)?;
                }
            }
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::ExportInstance { config, out } => {
            let cfg = load(&config)?;
            let env = build_env(&cfg.env)?;
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            env.shared().export(&mut w)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
