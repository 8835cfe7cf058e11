//! Planted-cluster instances with a static deviation matrix.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Environment, TrialRng};
use crate::error::{Error, Result};
use crate::theory::{tilde_lambda_x, zeta};

pub const GAP_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub users: usize,
    pub clusters: usize,
    pub dim: usize,
    pub pool_size: usize,
    pub per_round_arms: usize,
    pub eps_range: f64,
    pub noise_std: f64,
    pub min_cluster_gap: Option<f64>,
    /// Sub-Gaussian scale of the arm distribution. When set, the instance
    /// reports `λ̃ₓ` with `λₓ = 1/d` (unit vectors with isotropic direction).
    pub arm_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            users: 1000,
            clusters: 10,
            dim: 50,
            pool_size: 1000,
            per_round_arms: 20,
            eps_range: 0.2,
            noise_std: 0.1,
            min_cluster_gap: None,
            arm_sigma: None,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.users == 0 || self.clusters == 0 || self.dim == 0 {
            return fail("users, clusters and dim must be positive".into());
        }
        if self.clusters > self.users {
            return fail(format!("clusters ({}) exceed users ({})", self.clusters, self.users));
        }
        if self.per_round_arms == 0 || self.per_round_arms > self.pool_size {
            return fail(format!(
                "per_round_arms must lie in 1..={} (pool size), got {}",
                self.pool_size, self.per_round_arms
            ));
        }
        if !(self.eps_range >= 0.0) || !(self.noise_std >= 0.0) {
            return fail("eps_range and noise_std must be >= 0".into());
        }
        Ok(())
    }
}

/// Instance constants derived from the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Smallest gap between distinct cluster vectors (∞ with one cluster).
    pub gamma: f64,
    /// Smallest gap strictly above `ζ` (∞ if none).
    pub gamma1: f64,
    pub zeta: f64,
    /// Users in clusters that are `ζ`-close to another cluster.
    pub u_tilde: usize,
}

/// Ground truth of a linear-plus-deviation environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub cluster_thetas: Vec<DVector<f64>>,
    pub user_cluster: Vec<usize>,
    pub arm_pool: Vec<DVector<f64>>,
    /// `users × pool` static deviations.
    pub deviation: DMatrix<f64>,
    pub noise_std: f64,
    pub per_round_arms: usize,
    pub tilde_lambda: Option<f64>,
}

pub(crate) fn unit_gaussian(rng: &mut TrialRng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

/// Smallest pairwise distance, ∞ for fewer than two vectors.
pub fn min_pairwise_gap(vs: &[DVector<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, va) in vs.iter().enumerate() {
        for vb in &vs[a + 1..] {
            best = best.min((va - vb).norm());
        }
    }
    best
}

impl ProblemInstance {
    pub fn generate(config: &SyntheticConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = TrialRng::seed_from_u64(config.seed);
        let mut attempts = 0;
        let thetas = loop {
            attempts += 1;
            let candidate: Vec<_> = (0..config.clusters).map(|_| unit_gaussian(&mut rng, config.dim)).collect();
            match config.min_cluster_gap {
                Some(floor) if min_pairwise_gap(&candidate) < floor => {
                    if attempts >= GAP_ATTEMPTS {
                        return Err(Error::InfeasibleGap { gap: floor, attempts });
                    }
                }
                _ => break candidate,
            }
        };
        let arm_pool: Vec<_> = (0..config.pool_size).map(|_| unit_gaussian(&mut rng, config.dim)).collect();
        let mut user_cluster: Vec<usize> = (0..config.users).map(|i| i % config.clusters).collect();
        user_cluster.shuffle(&mut rng);
        let r = config.eps_range;
        let deviation = if r > 0.0 {
            DMatrix::from_fn(config.users, config.pool_size, |_, _| rng.random_range(-r..r))
        } else {
            DMatrix::zeros(config.users, config.pool_size)
        };
        let tilde_lambda = match config.arm_sigma {
            Some(sigma) => Some(tilde_lambda_x(1.0 / config.dim as f64, sigma, config.per_round_arms as u32)?),
            None => None,
        };
        Ok(Self {
            cluster_thetas: thetas,
            user_cluster,
            arm_pool,
            deviation,
            noise_std: config.noise_std,
            per_round_arms: config.per_round_arms,
            tilde_lambda,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_thetas.len()
    }

    pub fn theta(&self, user: usize) -> &DVector<f64> {
        &self.cluster_thetas[self.user_cluster[user]]
    }

    /// Users of cluster `j`, ascending.
    pub fn cluster_members(&self, j: usize) -> Vec<usize> {
        (0..self.user_cluster.len()).filter(|&i| self.user_cluster[i] == j).collect()
    }

    pub fn diagnostics(&self, eps_star: f64, tilde_lambda: f64) -> Diagnostics {
        let z = zeta(eps_star, tilde_lambda);
        let m = self.cluster_count();
        let mut gamma = f64::INFINITY;
        let mut gamma1 = f64::INFINITY;
        let mut hard = vec![false; m];
        for a in 0..m {
            for b in a + 1..m {
                let gap = (&self.cluster_thetas[a] - &self.cluster_thetas[b]).norm();
                gamma = gamma.min(gap);
                if gap > z {
                    gamma1 = gamma1.min(gap);
                } else {
                    hard[a] = true;
                    hard[b] = true;
                }
            }
        }
        let u_tilde = self.user_cluster.iter().filter(|&&j| hard[j]).count();
        Diagnostics {
            gamma,
            gamma1,
            zeta: z,
            u_tilde,
        }
    }
}

impl Environment for ProblemInstance {
    fn user_count(&self) -> usize {
        self.user_cluster.len()
    }

    fn dim(&self) -> usize {
        self.arm_pool.first().map_or(0, |x| x.len())
    }

    fn arm_count(&self) -> usize {
        self.arm_pool.len()
    }

    fn per_round_arms(&self) -> usize {
        self.per_round_arms
    }

    fn features(&self, arm: usize) -> &DVector<f64> {
        &self.arm_pool[arm]
    }

    fn expected_reward(&self, user: usize, arm: usize) -> f64 {
        self.arm_pool[arm].dot(self.theta(user)) + self.deviation[(user, arm)]
    }

    fn noise_std(&self) -> f64 {
        self.noise_std
    }

    fn tilde_lambda_x(&self) -> Option<f64> {
        self.tilde_lambda
    }

    fn export(&self, out: &mut dyn std::io::Write) -> Result<()> {
        super::export::write_linear(self, out)
    }
}
