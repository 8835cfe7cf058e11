//! Empirical frequency of good partitions: the serving cluster contains the
//! user's whole true cluster and nobody farther than `ζ` from the user.

use std::sync::Arc;

use serde_json::json;

use super::LemmaReport;
use crate::env::{ProblemInstance, SyntheticConfig};
use crate::error::{Error, Result};
use crate::harness::run_trial_observed;
use crate::policy::{PolicyKind, PolicyOverrides, PolicySpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCheck {
    pub instance: SyntheticConfig,
    pub policy: PolicySpec,
    pub horizon: usize,
    /// `ζ` used for the closeness clause.
    pub zeta: f64,
    /// Trailing fraction of rounds that is scored.
    pub scored_fraction: f64,
    pub min_frequency: f64,
}

impl Default for PartitionCheck {
    fn default() -> Self {
        Self {
            instance: SyntheticConfig {
                users: 50,
                clusters: 5,
                dim: 10,
                pool_size: 500,
                per_round_arms: 20,
                eps_range: 0.02,
                min_cluster_gap: Some(0.5),
                ..SyntheticConfig::default()
            },
            policy: PolicySpec {
                kind: PolicyKind::Rclumb,
                overrides: PolicyOverrides {
                    eps_star: Some(0.02),
                    ..PolicyOverrides::default()
                },
            },
            horizon: 100_000,
            zeta: 0.1,
            scored_fraction: 0.5,
            min_frequency: 0.95,
        }
    }
}

/// Is `cluster` a good partition for `user`?
pub fn is_good(inst: &ProblemInstance, user: usize, cluster: &[usize], zeta: f64) -> bool {
    let mut inside = vec![false; inst.user_cluster.len()];
    for &l in cluster {
        inside[l] = true;
    }
    let own = inst.user_cluster[user];
    let theta = inst.theta(user);
    let covers = (0..inside.len()).all(|l| inst.user_cluster[l] != own || inside[l]);
    covers && cluster.iter().all(|&l| (inst.theta(l) - theta).norm() <= zeta)
}

/// Runs one trial of `cfg.policy` and scores the final rounds.
pub fn check_good_partition(cfg: &PartitionCheck, seed: u64) -> Result<LemmaReport> {
    let inst = Arc::new(ProblemInstance::generate(&cfg.instance)?);
    frequency_on(inst, cfg, seed)
}

/// As [`check_good_partition`] on a given instance.
pub fn frequency_on(inst: Arc<ProblemInstance>, cfg: &PartitionCheck, seed: u64) -> Result<LemmaReport> {
    let mut report = LemmaReport::new("partition", 0.0);
    let first_scored = cfg.horizon - (cfg.horizon as f64 * cfg.scored_fraction).round() as usize + 1;
    let (mut good, mut scored, mut missing) = (0usize, 0usize, false);
    let mut first_bad: Option<(usize, usize)> = None;
    run_trial_observed(inst.clone(), &cfg.policy, cfg.horizon, cfg.horizon, seed, 0, |log, policy| {
        if log.round < first_scored {
            return;
        }
        let Some(cluster) = policy.inferred_cluster() else {
            missing = true;
            return;
        };
        scored += 1;
        if is_good(&inst, log.user, cluster, cfg.zeta) {
            good += 1;
        } else if first_bad.is_none() {
            first_bad = Some((log.round, log.user));
        }
    })?;
    if missing {
        return Err(Error::Config(format!("policy {} exposes no serving cluster", cfg.policy.kind)));
    }
    let freq = if scored == 0 { 1.0 } else { good as f64 / scored as f64 };
    let diag = inst.diagnostics(0.0, 1.0);
    report.record(cfg.min_frequency - freq, || {
        json!({ "first_bad": first_bad, "scored": scored, "good": good, "seed": seed })
    });
    if diag.gamma < 5.0 * cfg.zeta {
        report.fail(format!("instance gap {} is below 5ζ = {}", diag.gamma, 5.0 * cfg.zeta));
    }
    report.metric("frequency", freq);
    report.metric("gamma", diag.gamma);
    report.metric("zeta", cfg.zeta);
    Ok(report.finish())
}
