//! Set-based robust clustering with doubling phases, split and merge.
//!
//! Each cluster pools its members' statistics for recommendation (`θ̂_V`)
//! and averages the members' own estimates (`θ̃_V`) for split and merge
//! decisions.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::table::UserTable;
use super::{Policy, Round, UcbSettings};
use crate::cluster::{ClusterStats, History};
use crate::error::{Error, Result};
use crate::history::ArmCounts;
use crate::ridge::solve_regularized;
use crate::theory::f_threshold;

/// `(s, t)` with `τ = 2ˢ − 2 + t` and `1 ≤ t ≤ 2ˢ`.
pub fn phase_schedule(tau: u64) -> (u32, u64) {
    assert!(tau >= 1, "rounds are numbered from 1");
    let s = 63 - (tau + 1).leading_zeros();
    (s, tau + 2 - (1u64 << s))
}

#[derive(Debug, Clone)]
pub struct SetCluster {
    members: BTreeSet<usize>,
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    pulls: usize,
    counts: ArmCounts,
}

impl SetCluster {
    fn empty(dim: usize) -> Self {
        Self {
            members: BTreeSet::new(),
            gram: DMatrix::zeros(dim, dim),
            moment: DVector::zeros(dim),
            pulls: 0,
            counts: ArmCounts::default(),
        }
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn pulls(&self) -> usize {
        self.pulls
    }

    fn absorb(&mut self, other: &SetCluster) {
        self.members.extend(other.members.iter().copied());
        self.gram += &other.gram;
        self.moment += &other.moment;
        self.pulls += other.pulls;
        self.counts.accumulate(&other.counts, 1.0);
    }
}

/// Cluster estimates recorded at the start of a phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSnapshot {
    pub phase: u32,
    /// `(id, T̃_V, θ̂_V, θ̃_V)` per cluster, ascending id.
    pub clusters: Vec<(usize, usize, DVector<f64>, DVector<f64>)>,
}

#[derive(Debug, Clone)]
pub struct Rsclumb {
    name: &'static str,
    settings: UcbSettings,
    robust: bool,
    table: UserTable,
    clusters: BTreeMap<usize, SetCluster>,
    assignment: Vec<usize>,
    checked: Vec<bool>,
    tau: u64,
    next_id: usize,
    serving: Vec<usize>,
    snapshot: Option<PhaseSnapshot>,
}

impl Rsclumb {
    pub fn new(users: usize, settings: UcbSettings) -> Self {
        Self::build("rsclumb", users, settings, true)
    }

    /// The non-robust variant: no `ε*` terms anywhere.
    pub fn sclub(users: usize, settings: UcbSettings) -> Self {
        Self::build("sclub", users, settings, false)
    }

    fn build(name: &'static str, users: usize, settings: UcbSettings, robust: bool) -> Self {
        let p = &settings.params;
        let mut all = SetCluster::empty(p.dim);
        all.members.extend(0..users);
        Self {
            name,
            table: UserTable::new(users, p.dim, p.lambda),
            clusters: BTreeMap::from([(0, all)]),
            assignment: vec![0; users],
            checked: vec![false; users],
            tau: 0,
            next_id: 1,
            serving: Vec::new(),
            snapshot: None,
            settings,
            robust,
        }
    }

    pub fn clusters(&self) -> &BTreeMap<usize, SetCluster> {
        &self.clusters
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn is_checked(&self, user: usize) -> bool {
        self.checked[user]
    }

    pub fn table(&self) -> &UserTable {
        &self.table
    }

    pub fn rounds(&self) -> u64 {
        self.tau
    }

    pub fn phase_snapshot(&self) -> Option<&PhaseSnapshot> {
        self.snapshot.as_ref()
    }

    fn eps_star(&self) -> f64 {
        if self.robust {
            self.settings.params.eps_star
        } else {
            0.0
        }
    }

    /// Mean of the members' ridge estimates.
    pub fn theta_tilde(&self, id: usize) -> DVector<f64> {
        let c = &self.clusters[&id];
        let mut sum = DVector::zeros(self.table.dim());
        for &m in &c.members {
            sum += self.table.theta(m);
        }
        sum / c.members.len().max(1) as f64
    }

    /// Pooled estimate `(λI + M_V)⁻¹ b_V`.
    pub fn theta_hat(&self, id: usize) -> DVector<f64> {
        let c = &self.clusters[&id];
        solve_regularized(&c.gram, &c.moment, self.table.lambda())
    }

    fn cluster_checked(&self, c: &SetCluster) -> bool {
        c.members.iter().all(|&m| self.checked[m])
    }

    fn start_phase(&mut self, phase: u32) {
        self.checked.iter_mut().for_each(|c| *c = false);
        let clusters = self
            .clusters
            .iter()
            .map(|(&id, c)| (id, c.pulls, self.theta_hat(id), self.theta_tilde(id)))
            .collect();
        self.snapshot = Some(PhaseSnapshot { phase, clusters });
    }

    /// Splits `user` out of its cluster when its estimate strays from the
    /// cluster average. Returns the new cluster id.
    pub fn split(&mut self, user: usize) -> Option<usize> {
        let p = self.settings.params;
        let id = self.assignment[user];
        let gap = (self.table.theta(user) - self.theta_tilde(id)).norm();
        let c = &self.clusters[&id];
        let threshold = p.alpha1 * (f_threshold(self.table.pulls(user) as f64) + f_threshold(c.pulls as f64))
            + p.alpha2 * self.eps_star();
        if !(gap > threshold) {
            return None;
        }
        let state = self.table.state(user);
        let mut fresh = SetCluster::empty(self.table.dim());
        fresh.members.insert(user);
        fresh.gram.copy_from(state.gram());
        fresh.moment.copy_from(state.moment());
        fresh.pulls = state.pulls();
        fresh.counts = self.table.counts(user).clone();

        let c = self.clusters.get_mut(&id).expect("assigned cluster exists");
        c.members.remove(&user);
        c.gram -= &fresh.gram;
        c.moment -= &fresh.moment;
        c.pulls -= fresh.pulls;
        c.counts.accumulate(&fresh.counts, -1.0);

        let new_id = self.next_id;
        self.next_id += 1;
        self.clusters.insert(new_id, fresh);
        self.assignment[user] = new_id;
        Some(new_id)
    }

    /// Merges checked clusters with close averages until no pair qualifies.
    /// Returns the number of merges.
    pub fn merge(&mut self) -> usize {
        let p = self.settings.params;
        let eps = self.eps_star();
        let mut merges = 0;
        loop {
            let checked: Vec<(usize, usize, DVector<f64>)> = self
                .clusters
                .iter()
                .filter(|(_, c)| self.cluster_checked(c))
                .map(|(&id, c)| (id, c.pulls, self.theta_tilde(id)))
                .collect();
            let mut found = None;
            'scan: for (a, (id1, t1, th1)) in checked.iter().enumerate() {
                for (id2, t2, th2) in &checked[a + 1..] {
                    let gap = (th1 - th2).norm();
                    let threshold = 0.5 * p.alpha1 * (f_threshold(*t1 as f64) + f_threshold(*t2 as f64))
                        + 0.5 * p.alpha2 * eps;
                    if gap < threshold {
                        found = Some((*id1, *id2));
                        break 'scan;
                    }
                }
            }
            let Some((keep, gone)) = found else { break };
            let other = self.clusters.remove(&gone).expect("scanned cluster exists");
            for &m in &other.members {
                self.assignment[m] = keep;
            }
            self.clusters.get_mut(&keep).expect("scanned cluster exists").absorb(&other);
            merges += 1;
        }
        merges
    }
}

impl Policy for Rsclumb {
    fn name(&self) -> &str {
        self.name
    }

    fn choose(&mut self, round: &Round<'_>) -> Result<usize> {
        if round.features.is_empty() {
            return Err(Error::EmptyArms);
        }
        self.tau += 1;
        let (s, t) = phase_schedule(self.tau);
        if t == 1 {
            self.start_phase(s);
        }
        let id = self.assignment[round.user];
        let index = self.settings.index(self.robust);
        let c = &self.clusters[&id];
        self.serving = c.members.iter().copied().collect();
        let history = if index.eps_star > 0.0 {
            self.table.catalog().history(&c.counts)
        } else {
            History::empty()
        };
        let stats = ClusterStats::from_parts(&c.gram, &c.moment, c.pulls, self.table.lambda(), history);
        stats.select(round.features, index)
    }

    fn feedback(&mut self, user: usize, x: &DVector<f64>, reward: f64) -> Result<()> {
        let slot = self.table.update(user, x, reward)?;
        let id = self.assignment[user];
        let c = self.clusters.get_mut(&id).expect("assigned cluster exists");
        c.gram.ger(1.0, x, x, 1.0);
        c.moment.axpy(reward, x, 1.0);
        c.pulls += 1;
        c.counts.add(slot, 1.0);
        if !self.checked[user] {
            self.split(user);
            self.checked[user] = true;
            self.merge();
        }
        Ok(())
    }

    fn inferred_cluster(&self) -> Option<&[usize]> {
        Some(&self.serving)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::ConfidenceParams;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn settings(eps: f64, a1: f64, a2: f64) -> UcbSettings {
        UcbSettings::new(ConfidenceParams::new(2, 100).with_eps_star(eps).with_alphas(a1, a2))
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(phase_schedule(1), (1, 1));
        assert_eq!(phase_schedule(2), (1, 2));
        assert_eq!(phase_schedule(3), (2, 1));
        assert_eq!(phase_schedule(6), (2, 4));
        assert_eq!(phase_schedule(7), (3, 1));
        for tau in 1..5000u64 {
            let (s, t) = phase_schedule(tau);
            assert!(t >= 1 && t <= 1 << s);
            assert_eq!((1u64 << s) - 2 + t, tau);
        }
    }

    #[test]
    fn phase_boundary_resets_marks() {
        let mut p = Rsclumb::new(2, settings(0.0, 1.0, 1.0));
        let feats = [v(&[1.0, 0.0])];
        for (tau, user) in [(1, 0), (2, 1)] {
            let r = Round { user, arm_ids: &[0], features: &feats };
            p.choose(&r).unwrap();
            p.feedback(user, &feats[0], 0.5).unwrap();
            assert_eq!(p.rounds(), tau);
        }
        assert!(p.is_checked(0) && p.is_checked(1));
        let r = Round { user: 0, arm_ids: &[0], features: &feats };
        p.choose(&r).unwrap();
        assert!(!p.is_checked(0) && !p.is_checked(1));
        assert_eq!(p.phase_snapshot().unwrap().phase, 2);
    }

    #[test]
    fn no_split_on_identical_estimates() {
        let mut p = Rsclumb::new(3, settings(0.1, 1.0, 1.0));
        assert_eq!(p.split(0), None);
        assert_eq!(p.clusters().len(), 1);
    }

    #[test]
    fn split_subtracts_statistics() {
        let mut p = Rsclumb::new(3, settings(0.01, 0.01, 0.01));
        let x = v(&[1.0, 0.0]);
        p.checked[0] = true;
        p.table.update(0, &x, 20.0).unwrap();
        let c = p.clusters.get_mut(&0).unwrap();
        c.gram.ger(1.0, &x, &x, 1.0);
        c.moment.axpy(20.0, &x, 1.0);
        c.pulls += 1;
        let before = p.clusters[&0].gram.clone();
        let id = p.split(0).expect("gap of ~6.7 is far above the threshold");
        assert_eq!(p.clusters[&id].gram(), p.table.state(0).gram());
        assert_eq!(&(before - p.table.state(0).gram()), p.clusters[&0].gram());
        assert_eq!(p.clusters[&0].pulls(), 0);
        assert_eq!(p.assignment()[0], id);
        // a singleton's average is its own estimate
        assert_eq!(p.split(0), None);
    }

    #[test]
    fn merge_requires_checked_clusters() {
        let mut p = Rsclumb::new(2, settings(0.0, 1.0, 1.0));
        let x = v(&[1.0, 0.0]);
        p.table.update(0, &x, 20.0).unwrap();
        let c = p.clusters.get_mut(&0).unwrap();
        c.gram.ger(1.0, &x, &x, 1.0);
        c.moment.axpy(20.0, &x, 1.0);
        c.pulls += 1;
        p.split(0).unwrap();
        // bring the estimates back together through user 1
        p.table.update(1, &x, 20.0).unwrap();
        let c = p.clusters.get_mut(&0).unwrap();
        c.gram.ger(1.0, &x, &x, 1.0);
        c.moment.axpy(20.0, &x, 1.0);
        c.pulls += 1;
        p.checked[0] = true;
        assert_eq!(p.merge(), 0, "user 1 is unchecked");
        p.checked[1] = true;
        assert_eq!(p.merge(), 1);
        assert_eq!(p.clusters().len(), 1);
        assert_eq!(p.assignment(), &[0, 0]);
    }

    #[test]
    fn far_clusters_stay_apart() {
        let mut p = Rsclumb::new(2, settings(0.0, 0.01, 0.0));
        let x = v(&[1.0, 0.0]);
        p.table.update(0, &x, 20.0).unwrap();
        let c = p.clusters.get_mut(&0).unwrap();
        c.gram.ger(1.0, &x, &x, 1.0);
        c.moment.axpy(20.0, &x, 1.0);
        c.pulls += 1;
        p.split(0).unwrap();
        p.checked = vec![true, true];
        assert_eq!(p.merge(), 0);
        assert_eq!(p.clusters().len(), 2);
    }

    fn audit(p: &Rsclumb, users: usize) {
        let mut seen = vec![false; users];
        let d = p.table.dim();
        let mut gram = DMatrix::zeros(d, d);
        for (&id, c) in p.clusters() {
            assert!(!c.members().is_empty());
            let mut g = DMatrix::zeros(d, d);
            let mut pulls = 0;
            for &m in c.members() {
                assert!(!seen[m], "user {m} in two clusters");
                seen[m] = true;
                assert_eq!(p.assignment()[m], id);
                g += p.table.state(m).gram();
                pulls += p.table.pulls(m);
            }
            assert!((&g - c.gram()).amax() < 1e-10);
            assert_eq!(pulls, c.pulls());
            gram += c.gram();
            let mut mean = DVector::zeros(d);
            for &m in c.members() {
                mean += p.table.state(m).estimate(p.table.lambda());
            }
            mean /= c.members().len() as f64;
            assert!((mean - p.theta_tilde(id)).amax() < 1e-10);
        }
        assert!(seen.iter().all(|&s| s));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn partition_and_conservation(seed in any::<u64>(), users in 1usize..7, a1 in 0.05f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = Rsclumb::new(users, settings(0.05, a1, 0.5));
            let thetas: Vec<DVector<f64>> = (0..users)
                .map(|i| if i % 2 == 0 { v(&[0.8, 0.0]) } else { v(&[-0.8, 0.2]) })
                .collect();
            let mut checks = vec![0u32; users];
            let mut phase = 0;
            for _ in 0..300 {
                let user = rng.random_range(0..users);
                let feats: Vec<DVector<f64>> = (0..4)
                    .map(|_| {
                        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                        v(&[a.cos(), a.sin()])
                    })
                    .collect();
                let r = Round { user, arm_ids: &[0, 1, 2, 3], features: &feats };
                let k = p.choose(&r).unwrap();
                let (s, _) = phase_schedule(p.rounds());
                if s != phase {
                    phase = s;
                    checks.iter_mut().for_each(|c| *c = 0);
                }
                let was_checked = p.is_checked(user);
                let reward = feats[k].dot(&thetas[user]) + rng.random_range(-0.1..0.1);
                p.feedback(user, &feats[k], reward).unwrap();
                if !was_checked {
                    checks[user] += 1;
                }
                prop_assert!(checks[user] <= 1);
                prop_assert!(p.is_checked(user));
                audit(&p, users);
            }
        }
    }
}
