//! Comparison policies: LinUCB with one shared or per-user estimates (and
//! their `ε*`-inflated variants), graph clustering over connected
//! components, and the ground-truth oracle.

use std::sync::Arc;

use nalgebra::DVector;

use super::table::UserTable;
use super::{Policy, Round, UcbSettings, UserGraph};
use crate::cluster::argmax_first;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::theory::f_threshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinUcbScope {
    /// One estimate shared by every user.
    Global,
    PerUser,
}

#[derive(Debug, Clone)]
pub struct LinUcb {
    name: &'static str,
    settings: UcbSettings,
    scope: LinUcbScope,
    robust: bool,
    table: UserTable,
    serving: Vec<usize>,
    users: usize,
}

impl LinUcb {
    pub fn new(users: usize, settings: UcbSettings, scope: LinUcbScope, robust: bool) -> Self {
        let name = match (scope, robust) {
            (LinUcbScope::Global, false) => "linucb-one",
            (LinUcbScope::PerUser, false) => "linucb-ind",
            (LinUcbScope::Global, true) => "rlinucb",
            (LinUcbScope::PerUser, true) => "rlinucb-ind",
        };
        let slots = match scope {
            LinUcbScope::Global => 1,
            LinUcbScope::PerUser => users,
        };
        let p = &settings.params;
        Self {
            name,
            table: UserTable::new(slots, p.dim, p.lambda),
            settings,
            scope,
            robust,
            serving: Vec::new(),
            users,
        }
    }

    fn slot(&self, user: usize) -> usize {
        match self.scope {
            LinUcbScope::Global => 0,
            LinUcbScope::PerUser => user,
        }
    }

    /// Current estimate backing `user`.
    pub fn theta(&self, user: usize) -> &DVector<f64> {
        self.table.theta(self.slot(user))
    }
}

impl Policy for LinUcb {
    fn name(&self) -> &str {
        self.name
    }

    fn choose(&mut self, round: &Round<'_>) -> Result<usize> {
        if round.features.is_empty() {
            return Err(Error::EmptyArms);
        }
        self.serving = match self.scope {
            LinUcbScope::Global => (0..self.users).collect(),
            LinUcbScope::PerUser => vec![round.user],
        };
        let index = self.settings.index(self.robust);
        let stats = self.table.cluster(&[self.slot(round.user)], index.eps_star > 0.0);
        stats.select(round.features, index)
    }

    fn feedback(&mut self, user: usize, x: &DVector<f64>, reward: f64) -> Result<()> {
        self.table.update(self.slot(user), x, reward)?;
        Ok(())
    }

    fn inferred_cluster(&self) -> Option<&[usize]> {
        Some(&self.serving)
    }
}

/// Graph clustering without misspecification terms: the cluster is the
/// connected component of the serving user and edges are deleted once the
/// estimate gap reaches `α₁(f(Tᵢ) + f(T_ℓ))`.
#[derive(Debug, Clone)]
pub struct Club {
    settings: UcbSettings,
    table: UserTable,
    graph: UserGraph,
    cluster: Vec<usize>,
}

impl Club {
    pub fn new(users: usize, settings: UcbSettings) -> Self {
        let p = &settings.params;
        Self {
            table: UserTable::new(users, p.dim, p.lambda),
            graph: UserGraph::complete(users),
            settings,
            cluster: Vec::new(),
        }
    }

    pub fn graph(&self) -> &UserGraph {
        &self.graph
    }
}

impl Policy for Club {
    fn name(&self) -> &str {
        "club"
    }

    fn choose(&mut self, round: &Round<'_>) -> Result<usize> {
        if round.features.is_empty() {
            return Err(Error::EmptyArms);
        }
        self.cluster = self.graph.component(round.user);
        let stats = self.table.cluster(&self.cluster, false);
        stats.select(round.features, self.settings.index(false))
    }

    fn feedback(&mut self, user: usize, x: &DVector<f64>, reward: f64) -> Result<()> {
        self.table.update(user, x, reward)?;
        let alpha1 = self.settings.params.alpha1;
        let f_user = f_threshold(self.table.pulls(user) as f64);
        let theta = self.table.theta(user);
        let doomed: Vec<usize> = self
            .graph
            .neighbors(user)
            .filter(|&l| {
                (theta - self.table.theta(l)).norm() >= alpha1 * (f_user + f_threshold(self.table.pulls(l) as f64))
            })
            .collect();
        for l in doomed {
            self.graph.delete(user, l);
        }
        Ok(())
    }

    fn inferred_cluster(&self) -> Option<&[usize]> {
        Some(&self.cluster)
    }
}

/// Picks the candidate with the largest true expected reward.
pub struct Oracle {
    env: Arc<dyn Environment>,
}

impl Oracle {
    pub fn new(env: Arc<dyn Environment>) -> Self {
        Self { env }
    }
}

impl Policy for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn choose(&mut self, round: &Round<'_>) -> Result<usize> {
        if round.arm_ids.is_empty() {
            return Err(Error::EmptyArms);
        }
        let values: Vec<f64> = round
            .arm_ids
            .iter()
            .map(|&a| self.env.expected_reward(round.user, a))
            .collect();
        Ok(argmax_first(&values))
    }

    fn feedback(&mut self, _user: usize, _x: &DVector<f64>, _reward: f64) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::ConfidenceParams;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn settings(eps: f64) -> UcbSettings {
        UcbSettings::new(ConfidenceParams::new(2, 100).with_eps_star(eps))
    }

    #[test]
    fn global_scope_shares_estimate() {
        let mut p = LinUcb::new(2, settings(0.0), LinUcbScope::Global, false);
        p.feedback(0, &v(&[1.0, 0.0]), 1.0).unwrap();
        p.feedback(1, &v(&[0.0, 1.0]), 1.0).unwrap();
        assert_eq!(p.theta(0), &v(&[0.5, 0.5]));
        assert_eq!(p.theta(0), p.theta(1));
    }

    #[test]
    fn per_user_scope_isolates() {
        let mut p = LinUcb::new(2, settings(0.1), LinUcbScope::PerUser, true);
        p.feedback(0, &v(&[1.0, 0.0]), 1.0).unwrap();
        assert_eq!(p.theta(1), &v(&[0.0, 0.0]));
        assert_eq!(p.name(), "rlinucb-ind");
    }

    #[test]
    fn club_clusters_are_components() {
        let mut p = Club::new(3, settings(0.0));
        let feats = [v(&[1.0, 0.0])];
        let round = Round { user: 0, arm_ids: &[0], features: &feats };
        p.choose(&round).unwrap();
        assert_eq!(p.inferred_cluster().unwrap(), &[0, 1, 2]);
        p.graph.delete(0, 2);
        p.choose(&round).unwrap();
        assert_eq!(p.inferred_cluster().unwrap(), &[0, 1, 2]);
        p.graph.delete(0, 1);
        p.choose(&round).unwrap();
        assert_eq!(p.inferred_cluster().unwrap(), &[0]);
    }
}
