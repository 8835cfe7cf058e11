use serde::Serialize;

use super::trial::TrialResult;
use crate::error::{Error, Result};

/// Mean and standard error per logged round for one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub policy: String,
    pub trials: usize,
    pub rounds: Vec<usize>,
    pub mean_regret: Vec<f64>,
    pub sem_regret: Vec<f64>,
    pub mean_reward: Vec<f64>,
    pub sem_reward: Vec<f64>,
}

impl Summary {
    pub fn final_mean_regret(&self) -> f64 {
        self.mean_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_sem_regret(&self) -> f64 {
        self.sem_regret.last().copied().unwrap_or(0.0)
    }
}

/// Mean and `s/√n` with the sample standard deviation `s` (0 for `n = 1`).
///
/// Values are sorted before summation so the result does not depend on
/// trial order.
pub fn mean_sem(values: &mut [f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn aggregate_trials(results: &[TrialResult]) -> Result<Summary> {
    let first = results.first().ok_or_else(|| Error::Misaligned("no trials to aggregate".into()))?;
    for r in results {
        if r.policy != first.policy {
            return Err(Error::Misaligned(format!("mixed policies {} and {}", first.policy, r.policy)));
        }
        if r.rounds != first.rounds || r.cum_regret.len() != r.rounds.len() || r.cum_reward.len() != r.rounds.len() {
            return Err(Error::Misaligned(format!(
                "trial {} of {} logs {} points, trial {} logs {}",
                r.trial,
                r.policy,
                r.rounds.len(),
                first.trial,
                first.rounds.len()
            )));
        }
    }
    let points = first.rounds.len();
    let mut out = Summary {
        policy: first.policy.clone(),
        trials: results.len(),
        rounds: first.rounds.clone(),
        mean_regret: Vec::with_capacity(points),
        sem_regret: Vec::with_capacity(points),
        mean_reward: Vec::with_capacity(points),
        sem_reward: Vec::with_capacity(points),
    };
    for k in 0..points {
        let (m, s) = mean_sem(&mut results.iter().map(|r| r.cum_regret[k]).collect::<Vec<_>>());
        out.mean_regret.push(m);
        out.sem_regret.push(s);
        let (m, s) = mean_sem(&mut results.iter().map(|r| r.cum_reward[k]).collect::<Vec<_>>());
        out.mean_reward.push(m);
        out.sem_reward.push(s);
    }
    Ok(out)
}
