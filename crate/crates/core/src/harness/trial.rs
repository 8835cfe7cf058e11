use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use serde::Serialize;

use crate::env::{Environment, TrialRng};
use crate::error::{Error, Result};
use crate::policy::{Policy, PolicySpec, Round};

/// Seed of trial `index` under `base`.
pub fn trial_seed(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    /// 1-based.
    pub round: usize,
    pub user: usize,
    pub candidates: Vec<usize>,
    /// Pool index of the chosen arm.
    pub chosen: usize,
    pub reward: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub policy: String,
    pub trial: usize,
    pub seed: u64,
    /// Logged round numbers.
    pub rounds: Vec<usize>,
    pub cum_regret: Vec<f64>,
    pub cum_reward: Vec<f64>,
    pub wall_seconds: f64,
}

impl TrialResult {
    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }
}

pub fn run_trial(
    env: Arc<dyn Environment>,
    spec: &PolicySpec,
    horizon: usize,
    cadence: usize,
    base_seed: u64,
    trial: usize,
) -> Result<TrialResult> {
    run_trial_observed(env, spec, horizon, cadence, base_seed, trial, |_, _| {})
}

/// Runs one trial, calling `observe` after every round with the round log
/// and the policy (after feedback).
pub fn run_trial_observed<F>(
    env: Arc<dyn Environment>,
    spec: &PolicySpec,
    horizon: usize,
    cadence: usize,
    base_seed: u64,
    trial: usize,
    observe: F,
) -> Result<TrialResult>
where
    F: FnMut(&RoundLog, &dyn Policy),
{
    let policy = spec.build(env.clone(), horizon)?;
    run_policy(env.as_ref(), policy, horizon, cadence, base_seed, trial, observe)
}

/// Drives an already-built policy.
pub fn run_policy<F>(
    env: &dyn Environment,
    mut policy: Box<dyn Policy>,
    horizon: usize,
    cadence: usize,
    base_seed: u64,
    trial: usize,
    mut observe: F,
) -> Result<TrialResult>
where
    F: FnMut(&RoundLog, &dyn Policy),
{
    let started = Instant::now();
    let seed = trial_seed(base_seed, trial);
    let mut rng = TrialRng::seed_from_u64(seed);
    let cadence = cadence.max(1);
    let mut result = TrialResult {
        policy: policy.name().to_string(),
        trial,
        seed,
        rounds: Vec::new(),
        cum_regret: Vec::new(),
        cum_reward: Vec::new(),
        wall_seconds: 0.0,
    };
    let (mut regret, mut reward) = (0.0, 0.0);
    let mut features: Vec<DVector<f64>> = Vec::new();
    for t in 1..=horizon {
        let (user, candidates) = env.sample_round(&mut rng);
        features.clear();
        features.extend(candidates.iter().map(|&a| env.features(a).clone()));
        let round = Round {
            user,
            arm_ids: &candidates,
            features: &features,
        };
        let wrap = |e: Error| Error::Policy {
            policy: result.policy.clone(),
            round: t,
            user,
            source: Box::new(e),
        };
        let k = policy.choose(&round).map_err(wrap)?;
        let chosen = *candidates.get(k).ok_or_else(|| {
            wrap(Error::Config(format!("chose position {k} of {} candidates", candidates.len())))
        })?;
        let r = env.realize_reward(user, chosen, &mut rng);
        policy.feedback(user, &features[k], r).map_err(wrap)?;
        let step = env.instantaneous_regret(user, &candidates, chosen);
        regret += step;
        reward += r;
        if t % cadence == 0 || t == horizon {
            result.rounds.push(t);
            result.cum_regret.push(regret);
            result.cum_reward.push(reward);
        }
        let log = RoundLog {
            round: t,
            user,
            candidates,
            chosen,
            reward: r,
            regret: step,
        };
        observe(&log, policy.as_ref());
    }
    result.wall_seconds = started.elapsed().as_secs_f64();
    Ok(result)
}

/// Chosen pool indices of a full trial.
pub fn action_trace(
    env: Arc<dyn Environment>,
    spec: &PolicySpec,
    horizon: usize,
    base_seed: u64,
    trial: usize,
) -> Result<Vec<usize>> {
    let mut actions = Vec::with_capacity(horizon);
    run_trial_observed(env, spec, horizon, horizon.max(1), base_seed, trial, |log, _| actions.push(log.chosen))?;
    Ok(actions)
}
