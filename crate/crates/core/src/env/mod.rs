//! Environments: who arrives, which arms are offered, what the reward is.

pub mod export;
pub mod realdata;
pub mod synthetic;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cluster::argmax_first;
use crate::error::Result;

pub use realdata::{MatrixFeedbackEnv, RatingMatrix, RealEnvSpec};
pub use synthetic::{Diagnostics, ProblemInstance, SyntheticConfig};

/// Generator used for every stochastic draw inside a trial.
pub type TrialRng = ChaCha8Rng;

pub trait Environment: Send + Sync {
    fn user_count(&self) -> usize;

    fn dim(&self) -> usize;

    /// Size of the arm pool.
    fn arm_count(&self) -> usize;

    /// Candidates offered per round.
    fn per_round_arms(&self) -> usize;

    fn features(&self, arm: usize) -> &DVector<f64>;

    /// Noise-free reward of `arm` for `user`, including any deviation from
    /// the linear model.
    fn expected_reward(&self, user: usize, arm: usize) -> f64;

    fn noise_std(&self) -> f64;

    /// Arm-regularity constant, when the arm distribution is declared.
    fn tilde_lambda_x(&self) -> Option<f64> {
        None
    }

    /// Uniform user, then distinct candidates uniformly without replacement.
    fn sample_round(&self, rng: &mut TrialRng) -> (usize, Vec<usize>) {
        let user = rng.random_range(0..self.user_count());
        let arms = sample(rng, self.arm_count(), self.per_round_arms()).into_vec();
        (user, arms)
    }

    /// Expected reward plus Gaussian noise. One normal draw is consumed
    /// even when the noise scale is zero, so every policy sees the same
    /// stream.
    fn realize_reward(&self, user: usize, arm: usize, rng: &mut TrialRng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.expected_reward(user, arm) + self.noise_std() * z
    }

    /// Shortfall of `chosen` against the best candidate.
    fn instantaneous_regret(&self, user: usize, candidates: &[usize], chosen: usize) -> f64 {
        let best = candidates
            .iter()
            .map(|&a| self.expected_reward(user, a))
            .fold(f64::NEG_INFINITY, f64::max);
        best - self.expected_reward(user, chosen)
    }

    /// Position in `candidates` of the best arm, lowest on ties.
    fn best_candidate(&self, user: usize, candidates: &[usize]) -> usize {
        let values: Vec<f64> = candidates.iter().map(|&a| self.expected_reward(user, a)).collect();
        argmax_first(&values)
    }

    /// Writes the environment in the flat text export format.
    fn export(&self, out: &mut dyn std::io::Write) -> Result<()>;
}
