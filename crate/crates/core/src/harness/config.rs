//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # environment
//! env = synthetic
//! users = 100
//! clusters = 5
//! dim = 10
//!
//! horizon = 50000
//! trials = 10
//! policies = rclumb, rsclumb, club, linucb-one
//!
//! # hyperparameters for every policy, then per-policy overrides
//! eps_star = 0.2
//! rclumb.alpha1 = 0.5
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cluster::EpsSum;
use crate::env::realdata::RealCase;
use crate::env::{RealEnvSpec, SyntheticConfig};
use crate::error::{Error, Result};
use crate::policy::{ClusterMode, PolicyKind, PolicyOverrides, PolicySpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EnvSpec {
    Synthetic(SyntheticConfig),
    Real {
        ratings: PathBuf,
        spec: RealEnvSpec,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub policies: Vec<PolicySpec>,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    /// Log every `cadence` rounds; defaults to `max(1, T/1000)`.
    pub cadence: Option<usize>,
    pub workers: usize,
    pub out: Option<PathBuf>,
    /// Value of `λ̃ₓ` for burn-in diagnostics when the environment has none.
    pub tilde_lambda: Option<f64>,
}

impl ExperimentConfig {
    pub fn cadence(&self) -> usize {
        self.cadence.unwrap_or((self.horizon / 1000).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.trials == 0 {
            return Err(Error::Config("horizon and trials must be >= 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies listed".into()));
        }
        if self.cadence == Some(0) {
            return Err(Error::Config("cadence must be >= 1".into()));
        }
        match &self.env {
            EnvSpec::Synthetic(c) => c.validate(),
            EnvSpec::Real { spec, .. } => spec.validate(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_in(text, Path::new("."))
    }

    /// Relative paths resolve against `base`.
    pub fn parse_in(text: &str, base: &Path) -> Result<Self> {
        let mut syn = SyntheticConfig::default();
        let mut real = RealEnvSpec::default();
        let mut env_kind = "synthetic".to_string();
        let mut ratings = None;
        let mut instance_seed = None;
        let mut policies: Vec<PolicyKind> = Vec::new();
        let mut shared = PolicyOverrides::default();
        let mut specific: Vec<(PolicyKind, PolicyOverrides)> = Vec::new();
        let mut cfg = ExperimentConfig {
            env: EnvSpec::Synthetic(SyntheticConfig::default()),
            policies: Vec::new(),
            horizon: 1000,
            trials: 1,
            seed: 0,
            cadence: None,
            workers: 1,
            out: None,
            tilde_lambda: None,
        };
        // keys that exist for both environments
        let mut dim = None;
        let mut per_round_arms = None;
        let mut eps_range = None;
        let mut noise_std = None;

        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: String| Error::Config(format!("line {}: {m}", k + 1));
            let (key, value) = line
                .split_once('=')
                .map(|(a, b)| (a.trim(), b.trim()))
                .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
            let num = |v: &str| -> Result<f64> { v.parse().map_err(|e| bad(format!("{key}: {e}"))) };
            let int = |v: &str| -> Result<usize> { v.parse().map_err(|e| bad(format!("{key}: {e}"))) };
            let big = |v: &str| -> Result<u64> { v.parse().map_err(|e| bad(format!("{key}: {e}"))) };

            if let Some((name, param)) = key.split_once('.') {
                let kind: PolicyKind = name.parse()?;
                let slot = match specific.iter_mut().find(|(p, _)| *p == kind) {
                    Some((_, o)) => o,
                    None => {
                        specific.push((kind, PolicyOverrides::default()));
                        &mut specific.last_mut().expect("just pushed").1
                    }
                };
                set_override(slot, param, value).map_err(|e| bad(e.to_string()))?;
                continue;
            }
            match key {
                "env" => env_kind = value.to_string(),
                "users" => syn.users = int(value)?,
                "clusters" => syn.clusters = int(value)?,
                "dim" => dim = Some(int(value)?),
                "pool_size" => syn.pool_size = int(value)?,
                "per_round_arms" => per_round_arms = Some(int(value)?),
                "eps_range" => eps_range = Some(num(value)?),
                "noise_std" => noise_std = Some(num(value)?),
                "min_cluster_gap" => syn.min_cluster_gap = Some(num(value)?),
                "arm_sigma" => syn.arm_sigma = Some(num(value)?),
                "instance_seed" => instance_seed = Some(big(value)?),
                "ratings" => ratings = Some(base.join(value)),
                "case" => {
                    real.case = match value {
                        "1" | "linear" => RealCase::Linear,
                        "2" | "matrix" => RealCase::Matrix,
                        _ => return Err(bad(format!("case must be 1 or 2, got `{value}`"))),
                    }
                }
                "top_users" => real.top_users = int(value)?,
                "top_items" => real.top_items = int(value)?,
                "threshold" => real.threshold = num(value)?,
                "feature_rows" => real.feature_rows = int(value)?,
                "horizon" => cfg.horizon = int(value)?,
                "trials" => cfg.trials = int(value)?,
                "seed" => cfg.seed = big(value)?,
                "cadence" => cfg.cadence = Some(int(value)?),
                "workers" => cfg.workers = int(value)?.max(1),
                "out" => cfg.out = Some(base.join(value)),
                "tilde_lambda" => cfg.tilde_lambda = Some(num(value)?),
                "policies" => {
                    policies = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?;
                }
                other => set_override(&mut shared, other, value).map_err(|e| bad(e.to_string()))?,
            }
        }

        let seed = instance_seed.unwrap_or(cfg.seed);
        cfg.env = match env_kind.as_str() {
            "synthetic" => {
                if let Some(d) = dim {
                    syn.dim = d;
                }
                if let Some(c) = per_round_arms {
                    syn.per_round_arms = c;
                }
                if let Some(r) = eps_range {
                    syn.eps_range = r;
                }
                if let Some(s) = noise_std {
                    syn.noise_std = s;
                }
                syn.seed = seed;
                EnvSpec::Synthetic(syn)
            }
            "real" => {
                if let Some(d) = dim {
                    real.dim = d;
                }
                if let Some(c) = per_round_arms {
                    real.per_round_arms = c;
                }
                if let Some(r) = eps_range {
                    real.eps_range = r;
                }
                if let Some(s) = noise_std {
                    real.noise_std = s;
                }
                EnvSpec::Real {
                    ratings: ratings.ok_or_else(|| Error::Config("env = real needs `ratings = <file>`".into()))?,
                    spec: real,
                    seed,
                }
            }
            other => return Err(Error::Config(format!("env must be synthetic or real, got `{other}`"))),
        };
        for (kind, _) in &specific {
            if !policies.contains(kind) {
                return Err(Error::Config(format!("overrides given for `{kind}`, which is not in `policies`")));
            }
        }
        cfg.policies = policies
            .into_iter()
            .map(|kind| {
                let own = specific.iter().find(|(p, _)| *p == kind).map(|(_, o)| o.clone()).unwrap_or_default();
                PolicySpec {
                    kind,
                    overrides: own.or(&shared),
                }
            })
            .collect();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_in(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

fn set_override(o: &mut PolicyOverrides, key: &str, value: &str) -> Result<()> {
    let num = || -> Result<f64> { value.parse().map_err(|e| Error::Config(format!("{key}: {e}"))) };
    match key {
        "lambda" => o.lambda = Some(num()?),
        "delta" => o.delta = Some(num()?),
        "eps_star" => o.eps_star = Some(num()?),
        "alpha1" => o.alpha1 = Some(num()?),
        "alpha2" => o.alpha2 = Some(num()?),
        "beta" => o.beta = Some(num()?),
        "eps_sum" => {
            o.eps_sum = Some(match value {
                "exact" => EpsSum::Exact,
                "surrogate" => EpsSum::Surrogate,
                _ => return Err(Error::Config(format!("eps_sum must be exact or surrogate, got `{value}`"))),
            })
        }
        "cluster_mode" => o.cluster_mode = Some(value.parse::<ClusterMode>()?),
        _ => return Err(Error::Config(format!("unknown key `{key}`"))),
    }
    Ok(())
}
