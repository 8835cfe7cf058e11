//! Statistical oracles for the synthetic environment's sampling and reward
//! model.

use std::collections::HashSet;

use clumb::env::{Environment, ProblemInstance, SyntheticConfig, TrialRng};
use rand::SeedableRng;

fn instance(users: usize, pool: usize, per_round: usize, noise: f64) -> ProblemInstance {
    ProblemInstance::generate(&SyntheticConfig {
        users,
        clusters: 2.min(users),
        dim: 4,
        pool_size: pool,
        per_round_arms: per_round,
        noise_std: noise,
        seed: 17,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

#[test]
fn arrivals_are_uniform_within_four_sigma() {
    let env = instance(20, 50, 5, 0.1);
    let mut rng = TrialRng::seed_from_u64(2);
    let n = 100_000;
    let mut counts = [0usize; 20];
    for _ in 0..n {
        counts[env.sample_round(&mut rng).0] += 1;
    }
    let p = 1.0 / 20.0;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    for (u, &c) in counts.iter().enumerate() {
        assert!((c as f64 - n as f64 * p).abs() < 4.0 * sd, "user {u}: {c}");
    }
}

#[test]
fn candidates_are_distinct_and_cover_full_pool() {
    let env = instance(3, 12, 5, 0.1);
    let mut rng = TrialRng::seed_from_u64(3);
    for _ in 0..2000 {
        let (_, c) = env.sample_round(&mut rng);
        assert_eq!(c.len(), 5);
        assert_eq!(c.iter().collect::<HashSet<_>>().len(), 5);
        assert!(c.iter().all(|&a| a < 12));
    }
    let env = instance(3, 12, 12, 0.1);
    let (_, mut c) = env.sample_round(&mut rng);
    c.sort_unstable();
    assert_eq!(c, (0..12).collect::<Vec<_>>());
}

#[test]
fn reward_mean_follows_clt() {
    let env = instance(4, 30, 5, 0.1);
    let mut rng = TrialRng::seed_from_u64(4);
    let (user, arm) = (2, 7);
    let n = 100_000;
    let mean = (0..n).map(|_| env.realize_reward(user, arm, &mut rng)).sum::<f64>() / n as f64;
    let expected = env.features(arm).dot(env.theta(user)) + env.deviation[(user, arm)];
    assert_eq!(env.expected_reward(user, arm), expected);
    assert!((mean - expected).abs() < 4.0 * 0.1 / (n as f64).sqrt(), "{mean} vs {expected}");
}

#[test]
fn regret_is_nonnegative_and_matches_scan() {
    let env = instance(10, 40, 6, 0.0);
    let mut rng = TrialRng::seed_from_u64(6);
    for k in 0..5000 {
        let (u, c) = env.sample_round(&mut rng);
        let chosen = c[k % c.len()];
        let best = c.iter().map(|&a| env.expected_reward(u, a)).fold(f64::NEG_INFINITY, f64::max);
        let r = env.instantaneous_regret(u, &c, chosen);
        assert!(r >= 0.0);
        assert!((r - (best - env.expected_reward(u, chosen))).abs() < 1e-12);
    }
}
