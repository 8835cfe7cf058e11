use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::aggregate::Summary;
use super::config::ExperimentConfig;
use super::trial::{trial_seed, TrialResult};
use crate::error::Result;

pub const TRIALS_HEADER: &str = "policy,trial,round,cum_regret,cum_reward";
pub const SUMMARY_HEADER: &str = "policy,round,mean_regret,sem_regret,mean_reward,sem_reward";

pub fn write_trials_csv(results: &[TrialResult], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{TRIALS_HEADER}")?;
    for r in results {
        for k in 0..r.rounds.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.policy, r.trial, r.rounds[k], r.cum_regret[k], r.cum_reward[k]
            )?;
        }
    }
    Ok(())
}

pub fn write_summary_csv(summaries: &[Summary], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in summaries {
        for k in 0..s.rounds.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.policy, s.rounds[k], s.mean_regret[k], s.sem_regret[k], s.mean_reward[k], s.sem_reward[k]
            )?;
        }
    }
    Ok(())
}

/// SHA-256 of the result-relevant part of the configuration.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut canonical = config.clone();
    canonical.out = None;
    canonical.workers = 1;
    let json = serde_json::to_vec(&canonical).expect("configuration serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub base_seed: u64,
    pub instance_seed: Option<u64>,
    pub trial_seeds: Vec<u64>,
    pub horizon: usize,
    pub cadence: usize,
    pub policies: Vec<String>,
    pub config: ExperimentConfig,
    /// `(policy, trial, seconds)`; the only non-reproducible field.
    pub wall_seconds: Vec<(String, usize, f64)>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, results: &[TrialResult]) -> Self {
        let instance_seed = match &config.env {
            super::EnvSpec::Synthetic(s) => Some(s.seed),
            super::EnvSpec::Real { seed, .. } => Some(*seed),
        };
        Self {
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            config_hash: config_hash(config),
            base_seed: config.seed,
            instance_seed,
            trial_seeds: (0..config.trials).map(|t| trial_seed(config.seed, t)).collect(),
            horizon: config.horizon,
            cadence: config.cadence(),
            policies: config.policies.iter().map(|p| p.kind.to_string()).collect(),
            config: config.clone(),
            wall_seconds: results.iter().map(|r| (r.policy.clone(), r.trial, r.wall_seconds)).collect(),
        }
    }
}

/// Paths of the files written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub trials: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
}

pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    results: &[TrialResult],
    summaries: &[Summary],
) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir)?;
    let files = OutputFiles {
        trials: dir.join("trials.csv"),
        summary: dir.join("summary.csv"),
        manifest: dir.join("manifest.json"),
    };
    let mut buf = Vec::new();
    write_trials_csv(results, &mut buf)?;
    std::fs::write(&files.trials, &buf)?;
    buf.clear();
    write_summary_csv(summaries, &mut buf)?;
    std::fs::write(&files.summary, &buf)?;
    let manifest = serde_json::to_vec_pretty(&Manifest::new(config, results))?;
    std::fs::write(&files.manifest, manifest)?;
    Ok(files)
}
