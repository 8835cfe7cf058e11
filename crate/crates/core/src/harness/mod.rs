//! Seeded multi-trial experiments and their CSV/JSON outputs.

pub mod aggregate;
pub mod config;
pub mod output;
pub mod trial;

use std::sync::Arc;

use rayon::prelude::*;

use crate::env::realdata::{build_linear, build_matrix, RealCase};
use crate::env::{Environment, MatrixFeedbackEnv, ProblemInstance, RatingMatrix};
use crate::error::{Error, Result};
use crate::theory::{sufficient_time, SufficientTime};

pub use aggregate::{aggregate_trials, Summary};
pub use config::{EnvSpec, ExperimentConfig};
pub use output::{write_outputs, Manifest};
pub use trial::{action_trace, run_policy, run_trial, run_trial_observed, trial_seed, RoundLog, TrialResult};

/// A constructed environment, keeping the concrete type for diagnostics.
#[derive(Debug, Clone)]
pub enum BuiltEnv {
    Linear(Arc<ProblemInstance>),
    Matrix(Arc<MatrixFeedbackEnv>),
}

impl BuiltEnv {
    pub fn shared(&self) -> Arc<dyn Environment> {
        match self {
            BuiltEnv::Linear(e) => e.clone(),
            BuiltEnv::Matrix(e) => e.clone(),
        }
    }

    pub fn instance(&self) -> Option<&ProblemInstance> {
        match self {
            BuiltEnv::Linear(e) => Some(e),
            BuiltEnv::Matrix(_) => None,
        }
    }
}

pub fn build_env(spec: &EnvSpec) -> Result<BuiltEnv> {
    match spec {
        EnvSpec::Synthetic(cfg) => Ok(BuiltEnv::Linear(Arc::new(ProblemInstance::generate(cfg)?))),
        EnvSpec::Real { ratings, spec, seed } => {
            let m = RatingMatrix::load(ratings)?;
            Ok(match spec.case {
                RealCase::Linear => BuiltEnv::Linear(Arc::new(build_linear(spec, &m, *seed)?)),
                RealCase::Matrix => BuiltEnv::Matrix(Arc::new(build_matrix(spec, &m)?)),
            })
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Policy-major, then trial order.
    pub trials: Vec<TrialResult>,
    /// One per policy, in configuration order.
    pub summaries: Vec<Summary>,
}

impl ExperimentOutput {
    pub fn summary(&self, policy: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.policy == policy)
    }
}

/// Runs every (policy, trial) pair on `workers` threads.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let env = build_env(&config.env)?.shared();
    run_on(config, env)
}

/// As [`run_experiment`], on a prebuilt environment.
pub fn run_on(config: &ExperimentConfig, env: Arc<dyn Environment>) -> Result<ExperimentOutput> {
    let jobs: Vec<(usize, usize)> = (0..config.policies.len())
        .flat_map(|p| (0..config.trials).map(move |t| (p, t)))
        .collect();
    let cadence = config.cadence();
    let run = || {
        jobs.par_iter()
            .map(|&(p, t)| {
                let r = run_trial(env.clone(), &config.policies[p], config.horizon, cadence, config.seed, t);
                if let Ok(r) = &r {
                    log::info!("{} trial {} done: regret {:.3} in {:.1}s", r.policy, t, r.final_regret(), r.wall_seconds);
                }
                r
            })
            .collect::<Result<Vec<_>>>()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let trials = pool.install(run)?;
    let summaries = trials
        .chunks(config.trials)
        .map(aggregate_trials)
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput { trials, summaries })
}

/// Burn-in diagnostics for the configured synthetic instance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BurnInReport {
    pub users: usize,
    pub dim: usize,
    pub eps_star: f64,
    pub delta: f64,
    pub tilde_lambda: f64,
    pub diagnostics: crate::env::Diagnostics,
    pub times: Option<SufficientTime>,
    pub note: Option<String>,
}

pub fn burn_in_report(config: &ExperimentConfig) -> Result<BurnInReport> {
    let built = build_env(&config.env)?;
    let inst = built
        .instance()
        .ok_or_else(|| Error::Config("burn-in diagnostics need a linear environment".into()))?;
    let tilde_lambda = inst
        .tilde_lambda
        .or(config.tilde_lambda)
        .ok_or_else(|| Error::Config("set `arm_sigma` or `tilde_lambda` to evaluate burn-in times".into()))?;
    let first = config.policies.first().map(|p| p.overrides.clone()).unwrap_or_default();
    let eps_star = first.eps_star.unwrap_or(0.0);
    let delta = first.delta.unwrap_or(1.0 / config.horizon.max(2) as f64);
    let diagnostics = inst.diagnostics(eps_star, tilde_lambda);
    let users = inst.user_cluster.len();
    let dim = inst.dim();
    let (times, note) = match sufficient_time(users, dim, tilde_lambda, diagnostics.gamma1, eps_star, delta) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(BurnInReport {
        users,
        dim,
        eps_star,
        delta,
        tilde_lambda,
        diagnostics,
        times,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyKind;

    fn tiny(policies: &[PolicyKind], trials: usize) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            "users = 6\nclusters = 2\ndim = 3\npool_size = 15\nper_round_arms = 4\nhorizon = 120\n\
             trials = {trials}\nseed = 3\ncadence = 10\neps_star = 0.1\npolicies = {}\n",
            policies.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(",")
        ))
        .unwrap()
    }

    #[test]
    fn single_round_single_arm() {
        let mut cfg = tiny(&[PolicyKind::Rclumb], 1);
        let EnvSpec::Synthetic(s) = &mut cfg.env else { panic!() };
        s.per_round_arms = 1;
        cfg.horizon = 1;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.trials[0].rounds, vec![1]);
        assert_eq!(out.trials[0].cum_regret, vec![0.0]);
    }

    #[test]
    fn deterministic_and_worker_neutral() {
        let mut cfg = tiny(&[PolicyKind::Rclumb, PolicyKind::Rsclumb, PolicyKind::Club], 3);
        let a = run_experiment(&cfg).unwrap();
        cfg.workers = 3;
        let b = run_experiment(&cfg).unwrap();
        for (x, y) in a.trials.iter().zip(&b.trials) {
            assert_eq!((&x.policy, x.trial, &x.cum_regret, &x.cum_reward), (&y.policy, y.trial, &y.cum_regret, &y.cum_reward));
        }
        assert_eq!(a.summaries, b.summaries);
        assert_eq!(a.trials[0].rounds.len(), 12);
    }

    #[test]
    fn oracle_has_no_regret() {
        let out = run_experiment(&tiny(&[PolicyKind::Oracle], 2)).unwrap();
        assert!(out.trials.iter().all(|t| t.cum_regret.iter().all(|&r| r == 0.0)));
    }

    #[test]
    fn regret_is_nondecreasing() {
        let cfg = tiny(&PolicyKind::ALL, 1);
        let out = run_experiment(&cfg).unwrap();
        for t in &out.trials {
            assert!(t.cum_regret.windows(2).all(|w| w[1] >= w[0]), "{}", t.policy);
        }
        assert_eq!(out.summaries.len(), PolicyKind::ALL.len());
    }

    #[test]
    fn errors_carry_round_context() {
        let cfg = tiny(&[PolicyKind::Rclumb], 1);
        let built = build_env(&cfg.env).unwrap();
        struct Broken;
        impl crate::policy::Policy for Broken {
            fn name(&self) -> &str {
                "broken"
            }
            fn choose(&mut self, r: &crate::policy::Round<'_>) -> Result<usize> {
                Ok(r.features.len())
            }
            fn feedback(&mut self, _: usize, _: &nalgebra::DVector<f64>, _: f64) -> Result<()> {
                Ok(())
            }
        }
        let err = run_policy(built.shared().as_ref(), Box::new(Broken), 5, 1, 0, 0, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::Policy { round: 1, .. }));
    }
}
