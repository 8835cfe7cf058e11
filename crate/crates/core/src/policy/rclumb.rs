//! Graph-based robust clustering: 1-hop cluster extraction, the enlarged
//! UCB index and misspecification-aware edge deletion.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::table::UserTable;
use super::{Policy, Round, UcbSettings, UserGraph};
use crate::error::{Error, Result};
use crate::theory::f_threshold;

/// Which users of the graph back the serving user's estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMode {
    /// The serving user and its direct neighbors.
    #[default]
    OneHop,
    /// The whole connected component.
    Component,
}

impl std::str::FromStr for ClusterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "one-hop" | "onehop" | "1-hop" => Ok(ClusterMode::OneHop),
            "component" => Ok(ClusterMode::Component),
            other => Err(Error::Config(format!("unknown cluster mode `{other}`"))),
        }
    }
}

/// `α₁(f(Tᵢ) + f(T_ℓ)) + α₂ε*`
pub fn deletion_threshold(alpha1: f64, alpha2: f64, eps_star: f64, pulls_i: usize, pulls_l: usize) -> f64 {
    alpha1 * (f_threshold(pulls_i as f64) + f_threshold(pulls_l as f64)) + alpha2 * eps_star
}

#[derive(Debug, Clone)]
pub struct Rclumb {
    settings: UcbSettings,
    mode: ClusterMode,
    table: UserTable,
    graph: UserGraph,
    cluster: Vec<usize>,
}

impl Rclumb {
    pub fn new(users: usize, settings: UcbSettings, mode: ClusterMode) -> Self {
        let p = &settings.params;
        Self {
            table: UserTable::new(users, p.dim, p.lambda),
            graph: UserGraph::complete(users),
            settings,
            mode,
            cluster: Vec::new(),
        }
    }

    pub fn graph(&self) -> &UserGraph {
        &self.graph
    }

    pub fn table(&self) -> &UserTable {
        &self.table
    }

    pub fn settings(&self) -> &UcbSettings {
        &self.settings
    }

    fn cluster_of(&mut self, user: usize) -> Vec<usize> {
        match self.mode {
            ClusterMode::OneHop => self.graph.one_hop(user),
            ClusterMode::Component => self.graph.component(user),
        }
    }

    /// Removes every edge `(user, ℓ)` whose estimate gap reaches the
    /// threshold. Returns the number of deletions.
    pub fn delete_edges(&mut self, user: usize) -> usize {
        let p = self.settings.params;
        let theta = self.table.theta(user);
        let pulls = self.table.pulls(user);
        let doomed: Vec<usize> = self
            .graph
            .neighbors(user)
            .filter(|&l| {
                let gap = (theta - self.table.theta(l)).norm();
                gap >= deletion_threshold(p.alpha1, p.alpha2, p.eps_star, pulls, self.table.pulls(l))
            })
            .collect();
        for &l in &doomed {
            self.graph.delete(user, l);
        }
        doomed.len()
    }
}

impl Policy for Rclumb {
    fn name(&self) -> &str {
        "rclumb"
    }

    fn choose(&mut self, round: &Round<'_>) -> Result<usize> {
        if round.features.is_empty() {
            return Err(Error::EmptyArms);
        }
        self.cluster = self.cluster_of(round.user);
        let index = self.settings.index(true);
        let stats = self.table.cluster(&self.cluster, index.eps_star > 0.0);
        stats.select(round.features, index)
    }

    fn feedback(&mut self, user: usize, x: &DVector<f64>, reward: f64) -> Result<()> {
        self.table.update(user, x, reward)?;
        self.delete_edges(user);
        Ok(())
    }

    fn inferred_cluster(&self) -> Option<&[usize]> {
        Some(&self.cluster)
    }
}
