//! Lockstep comparison of the library policies against deliberately naive
//! re-implementations: dense inverses, raw per-round histories, adjacency
//! matrices and explicit cluster maps.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use clumb::env::{Environment, ProblemInstance, TrialRng};
use clumb::policy::rclumb::{ClusterMode, Rclumb};
use clumb::policy::rsclumb::Rsclumb;
use clumb::policy::{Policy, Round, UcbSettings};
use clumb::theory::ConfidenceParams;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

const LAMBDA: f64 = 1.0;

fn f(t: usize) -> f64 {
    let t = t as f64;
    ((1.0 + (1.0 + t).ln()) / (1.0 + t)).sqrt()
}

/// Planted instance on the unit circle.
fn planted(user_cluster: Vec<usize>, angles: &[f64], seed: u64) -> ProblemInstance {
    let mut rng = TrialRng::seed_from_u64(seed);
    let unit = |a: f64| DVector::from_vec(vec![a.cos(), a.sin()]);
    let arm_pool: Vec<_> = (0..10).map(|k| unit(2.0 * PI * k as f64 / 10.0 + 0.1)).collect();
    let users = user_cluster.len();
    ProblemInstance {
        cluster_thetas: angles.iter().map(|&a| unit(a)).collect(),
        user_cluster,
        deviation: DMatrix::from_fn(users, arm_pool.len(), |_, _| rng.random_range(-0.05..0.05)),
        arm_pool,
        noise_std: 0.1,
        per_round_arms: 4,
        tilde_lambda: None,
    }
}

fn settings(eps: f64, a1: f64, a2: f64, beta: f64) -> UcbSettings {
    UcbSettings::new(ConfidenceParams::new(2, 50).with_eps_star(eps).with_alphas(a1, a2)).with_beta(beta)
}

#[derive(Clone)]
struct UserData {
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    arms: Vec<DVector<f64>>,
}

impl UserData {
    fn new() -> Self {
        Self {
            gram: DMatrix::zeros(2, 2),
            moment: DVector::zeros(2),
            arms: Vec::new(),
        }
    }

    fn add(&mut self, x: &DVector<f64>, r: f64) {
        self.gram += x * x.transpose();
        self.moment += x * r;
        self.arms.push(x.clone());
    }

    fn theta(&self) -> DVector<f64> {
        (DMatrix::identity(2, 2) * LAMBDA + &self.gram).try_inverse().unwrap() * &self.moment
    }
}

/// Index of the first maximal UCB over `members`' pooled data.
fn naive_ucb(users: &[UserData], members: &[usize], arms: &[DVector<f64>], beta: f64, eps: f64) -> usize {
    let mut m = DMatrix::identity(2, 2) * LAMBDA;
    let mut b = DVector::zeros(2);
    for &l in members {
        m += &users[l].gram;
        b += &users[l].moment;
    }
    let inv = m.try_inverse().unwrap();
    let theta = &inv * b;
    let mut best = (0, f64::NEG_INFINITY);
    for (k, x) in arms.iter().enumerate() {
        let width = (x.transpose() * &inv * x)[0].sqrt();
        let mut sum = 0.0;
        for &l in members {
            for xs in &users[l].arms {
                sum += (x.transpose() * &inv * xs)[0].abs();
            }
        }
        let score = (x.dot(&theta) + beta * width + eps * sum).min(1.0);
        if score > best.1 {
            best = (k, score);
        }
    }
    best.0
}

/// Draws a round exactly like the harness does.
fn next_round(env: &ProblemInstance, rng: &mut TrialRng) -> (usize, Vec<usize>, Vec<DVector<f64>>) {
    let (user, ids) = env.sample_round(rng);
    let feats = ids.iter().map(|&a| env.features(a).clone()).collect();
    (user, ids, feats)
}

#[test]
#[allow(clippy::needless_range_loop)]
fn rclumb_matches_naive_graph_algorithm() {
    let env = planted(vec![0, 0, 1], &[0.3, 2.2], 11);
    let (eps, a1, a2, beta) = (0.02, 0.15, 1.0, 0.3);
    let mut policy = Rclumb::new(3, settings(eps, a1, a2, beta), ClusterMode::OneHop);
    let mut users = vec![UserData::new(); 3];
    let mut adj = [[true; 3]; 3];
    let mut rng = TrialRng::seed_from_u64(5);
    let mut deletions = 0;
    for t in 1..=50 {
        let (i, ids, feats) = next_round(&env, &mut rng);
        let members: Vec<usize> = (0..3).filter(|&l| l == i || adj[i][l]).collect();
        let expect = naive_ucb(&users, &members, &feats, beta, eps);
        let got = policy.choose(&Round { user: i, arm_ids: &ids, features: &feats }).unwrap();
        assert_eq!(got, expect, "round {t}, user {i}");
        assert_eq!(policy.inferred_cluster().unwrap(), members.as_slice());
        let r = env.realize_reward(i, ids[got], &mut rng);
        policy.feedback(i, &feats[got], r).unwrap();
        users[i].add(&feats[got], r);
        for l in 0..3 {
            if l != i && adj[i][l] {
                let gap = (users[i].theta() - users[l].theta()).norm();
                if gap >= a1 * (f(users[i].arms.len()) + f(users[l].arms.len())) + a2 * eps {
                    adj[i][l] = false;
                    adj[l][i] = false;
                    deletions += 1;
                }
            }
        }
        for a in 0..3 {
            for b in (0..3).filter(|&b| b != a) {
                assert_eq!(policy.graph().has_edge(a, b), adj[a][b], "round {t} edge ({a},{b})");
            }
        }
    }
    assert!(deletions > 0, "scenario should exercise edge deletion");
}

/// Explicit-map version of the set-based algorithm.
struct NaiveSets {
    users: Vec<UserData>,
    /// id → members
    clusters: BTreeMap<usize, BTreeSet<usize>>,
    /// id → pooled (gram, moment, pulls, arms)
    pooled: BTreeMap<usize, UserData>,
    checked: Vec<bool>,
    next_id: usize,
    merges: usize,
    tau: u64,
    eps: f64,
    a1: f64,
    a2: f64,
}

impl NaiveSets {
    fn new(n: usize, eps: f64, a1: f64, a2: f64) -> Self {
        Self {
            users: vec![UserData::new(); n],
            clusters: BTreeMap::from([(0, (0..n).collect())]),
            pooled: BTreeMap::from([(0, UserData::new())]),
            merges: 0,
            checked: vec![false; n],
            next_id: 1,
            tau: 0,
            eps,
            a1,
            a2,
        }
    }

    fn id_of(&self, user: usize) -> usize {
        *self.clusters.iter().find(|(_, m)| m.contains(&user)).unwrap().0
    }

    fn tilde(&self, id: usize) -> DVector<f64> {
        let m = &self.clusters[&id];
        m.iter().map(|&u| self.users[u].theta()).fold(DVector::zeros(2), |a, b| a + b) / m.len() as f64
    }

    fn begin_round(&mut self) {
        self.tau += 1;
        // phase starts are τ = 2ˢ − 1
        if (self.tau + 1).is_power_of_two() {
            self.checked.iter_mut().for_each(|c| *c = false);
        }
    }

    fn choose(&self, user: usize, arms: &[DVector<f64>], beta: f64) -> usize {
        // pooled statistics as one pseudo-user
        let id = self.id_of(user);
        naive_ucb(std::slice::from_ref(&self.pooled[&id]), &[0], arms, beta, self.eps)
    }

    fn feedback(&mut self, user: usize, x: &DVector<f64>, r: f64) {
        self.users[user].add(x, r);
        let id = self.id_of(user);
        self.pooled.get_mut(&id).unwrap().add(x, r);
        if self.checked[user] {
            return;
        }
        let gap = (self.users[user].theta() - self.tilde(id)).norm();
        let pulls_v = self.pooled[&id].arms.len();
        if gap > self.a1 * (f(self.users[user].arms.len()) + f(pulls_v)) + self.a2 * self.eps {
            let mine = self.users[user].clone();
            self.clusters.get_mut(&id).unwrap().remove(&user);
            let rest = self.pooled.get_mut(&id).unwrap();
            rest.gram -= &mine.gram;
            rest.moment -= &mine.moment;
            for a in &mine.arms {
                let k = rest.arms.iter().position(|b| b == a).unwrap();
                rest.arms.remove(k);
            }
            let new = self.next_id;
            self.next_id += 1;
            self.clusters.insert(new, BTreeSet::from([user]));
            self.pooled.insert(new, mine);
        }
        self.checked[user] = true;
        loop {
            let ready: Vec<usize> = self
                .clusters
                .iter()
                .filter(|(_, m)| m.iter().all(|&u| self.checked[u]))
                .map(|(&id, _)| id)
                .collect();
            let mut pair = None;
            'scan: for (k, &p) in ready.iter().enumerate() {
                for &q in &ready[k + 1..] {
                    let gap = (self.tilde(p) - self.tilde(q)).norm();
                    let tp = self.pooled[&p].arms.len();
                    let tq = self.pooled[&q].arms.len();
                    if gap < 0.5 * self.a1 * (f(tp) + f(tq)) + 0.5 * self.a2 * self.eps {
                        pair = Some((p, q));
                        break 'scan;
                    }
                }
            }
            let Some((keep, gone)) = pair else { break };
            self.merges += 1;
            let members = self.clusters.remove(&gone).unwrap();
            let data = self.pooled.remove(&gone).unwrap();
            self.clusters.get_mut(&keep).unwrap().extend(members);
            let into = self.pooled.get_mut(&keep).unwrap();
            into.gram += data.gram;
            into.moment += data.moment;
            into.arms.extend(data.arms);
        }
    }
}

fn run_sets(users: Vec<usize>, angles: &[f64], rounds: usize, eps: f64, a1: f64, a2: f64, beta: f64) -> (usize, usize) {
    let n = users.len();
    let env = planted(users, angles, 21);
    let mut policy = Rsclumb::new(n, settings(eps, a1, a2, beta));
    let mut naive = NaiveSets::new(n, eps, a1, a2);
    let mut rng = TrialRng::seed_from_u64(8);
    for t in 1..=rounds {
        let (i, ids, feats) = next_round(&env, &mut rng);
        naive.begin_round();
        let expect = naive.choose(i, &feats, beta);
        let got = policy.choose(&Round { user: i, arm_ids: &ids, features: &feats }).unwrap();
        assert_eq!(got, expect, "round {t}, user {i}");
        let r = env.realize_reward(i, ids[got], &mut rng);
        policy.feedback(i, &feats[got], r).unwrap();
        naive.feedback(i, &feats[got], r);
        let lib: BTreeMap<usize, BTreeSet<usize>> =
            policy.clusters().iter().map(|(&id, c)| (id, c.members().clone())).collect();
        assert_eq!(lib, naive.clusters, "membership after round {t}");
        for u in 0..n {
            assert_eq!(policy.is_checked(u), naive.checked[u], "mark of user {u} after round {t}");
        }
    }
    (naive.next_id - 1, naive.merges)
}

#[test]
fn rsclumb_membership_trajectory_matches_naive_sets() {
    let (splits, merges) = run_sets(vec![0, 1, 0, 1], &[0.2, 2.6], 120, 0.02, 0.15, 1.0, 0.3);
    assert!(splits > 0, "scenario should exercise split");
    assert!(merges > 0, "scenario should exercise merge");
}

#[test]
fn rsclumb_matches_naive_sets_across_seeds_of_thresholds() {
    for (a1, eps) in [(0.05, 0.0), (0.3, 0.05), (0.1, 0.1)] {
        run_sets(vec![0, 1, 1, 0, 1], &[0.0, 1.9], 200, eps, a1, 0.5, 0.4);
    }
}
