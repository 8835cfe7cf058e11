//! Monte Carlo check that `E[min_{i≤C} (θᵀxᵢ)²] ≥ λ̃ₓ` for i.i.d. arm sets.

use nalgebra::DVector;
use rand::SeedableRng;
use rayon::prelude::*;
use serde_json::json;

use super::LemmaReport;
use crate::env::synthetic::unit_gaussian;
use crate::env::TrialRng;
use crate::error::Result;
use crate::theory::tilde_lambda_x;

const CHUNK: usize = 100_000;

/// Arm feature law.
#[derive(Debug, Clone, PartialEq)]
pub enum ArmLaw {
    /// Uniform on the unit sphere of `R^dim`, `λₓ = 1/dim`.
    Sphere { dim: usize },
    /// Every arm is the scalar `value` (`d = 1`, `λₓ = value²`).
    Atom { value: f64 },
}

impl ArmLaw {
    pub fn dim(&self) -> usize {
        match self {
            ArmLaw::Sphere { dim } => *dim,
            ArmLaw::Atom { .. } => 1,
        }
    }

    /// Smallest eigenvalue of `E[xxᵀ]`.
    pub fn lambda_x(&self) -> f64 {
        match self {
            ArmLaw::Sphere { dim } => 1.0 / *dim as f64,
            ArmLaw::Atom { value } => value * value,
        }
    }

    fn sample(&self, rng: &mut TrialRng) -> DVector<f64> {
        match self {
            ArmLaw::Sphere { dim } => unit_gaussian(rng, *dim),
            ArmLaw::Atom { value } => DVector::from_element(1, *value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TlxCheck {
    pub law: ArmLaw,
    /// Arms per set `C`.
    pub arm_cap: u32,
    /// Sub-Gaussian proxy fed to the quadrature.
    pub sigma: f64,
    pub samples: usize,
}

impl Default for TlxCheck {
    fn default() -> Self {
        Self {
            law: ArmLaw::Sphere { dim: 5 },
            arm_cap: 20,
            sigma: 0.5,
            samples: 10_000_000,
        }
    }
}

/// Mean and standard error of `min_{i≤C} (θᵀxᵢ)²` over `samples` sets.
///
/// Sets are drawn in fixed-size chunks, each on its own ChaCha stream, so
/// the estimate does not depend on the thread count.
pub fn mc_min_projection(law: &ArmLaw, theta: &DVector<f64>, arm_cap: u32, samples: usize, seed: u64) -> (f64, f64) {
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = TrialRng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            let n = CHUNK.min(samples - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let mut best = f64::INFINITY;
                for _ in 0..arm_cap {
                    let p = theta.dot(&law.sample(&mut rng));
                    best = best.min(p * p);
                }
                s += best;
                s2 += best * best;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let n = samples as f64;
    let mean = s / n;
    let var = if samples > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

/// Passes when `estimate + 3·se ≥ λ̃ₓ(λₓ, σ, C)`. The run is inconclusive
/// when `3·se` is as large as `λₓ` itself.
pub fn check_tilde_lambda_mc(cfg: &TlxCheck, seed: u64) -> Result<LemmaReport> {
    let mut report = LemmaReport::new("tlx", 0.0);
    let lambda_x = cfg.law.lambda_x();
    let bound = tilde_lambda_x(lambda_x, cfg.sigma, cfg.arm_cap)?;
    let mut rng = TrialRng::seed_from_u64(seed);
    let theta = match cfg.law {
        ArmLaw::Sphere { dim } => unit_gaussian(&mut rng, dim),
        ArmLaw::Atom { .. } => DVector::from_element(1, 1.0),
    };
    let (mean, se) = mc_min_projection(&cfg.law, &theta, cfg.arm_cap, cfg.samples, seed);
    report.record(bound - (mean + 3.0 * se), || {
        json!({ "law": format!("{:?}", cfg.law), "arm_cap": cfg.arm_cap, "sigma": cfg.sigma, "samples": cfg.samples })
    });
    report.metric("lambda_x", lambda_x);
    report.metric("tilde_lambda_x", bound);
    report.metric("mc_mean", mean);
    report.metric("mc_se", se);
    if 3.0 * se >= lambda_x {
        report.mark_inconclusive(format!("3·se = {} is not below λₓ = {lambda_x}", 3.0 * se));
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arm_sphere_has_mean_one_over_d() {
        let law = ArmLaw::Sphere { dim: 5 };
        let theta = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let (m, se) = mc_min_projection(&law, &theta, 1, 200_000, 2);
        assert!((m - 0.2).abs() < 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn point_mass_limit() {
        let cfg = TlxCheck {
            law: ArmLaw::Atom { value: 0.8 },
            arm_cap: 3,
            sigma: 1e-3,
            samples: 1000,
        };
        let r = check_tilde_lambda_mc(&cfg, 0).unwrap();
        assert!(r.passed());
        assert!((r.metrics["mc_mean"] - 0.64).abs() < 1e-12);
        assert!((r.metrics["tilde_lambda_x"] - 0.64).abs() < 1e-2);
    }

    #[test]
    fn thread_count_neutral() {
        let law = ArmLaw::Sphere { dim: 3 };
        let theta = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let a = mc_min_projection(&law, &theta, 4, 250_001, 5);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| mc_min_projection(&law, &theta, 4, 250_001, 5));
        assert_eq!(a, b);
    }

    #[test]
    fn small_budget_sphere_check() {
        let cfg = TlxCheck {
            samples: 20_000,
            ..TlxCheck::default()
        };
        assert!(check_tilde_lambda_mc(&cfg, 1).unwrap().passed());
    }
}
