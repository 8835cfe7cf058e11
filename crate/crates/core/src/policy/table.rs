use nalgebra::{DMatrix, DVector};

use crate::cluster::{ClusterStats, History};
use crate::error::Result;
use crate::history::{ArmCatalog, ArmCounts};
use crate::ridge::{CachedRidge, RidgeState};

/// Per-user ridge statistics with compressed histories, shared by every
/// learning policy.
#[derive(Debug, Clone)]
pub struct UserTable {
    dim: usize,
    lambda: f64,
    ridges: Vec<CachedRidge>,
    counts: Vec<ArmCounts>,
    total: ArmCounts,
    catalog: ArmCatalog,
}

impl UserTable {
    pub fn new(users: usize, dim: usize, lambda: f64) -> Self {
        Self {
            dim,
            lambda,
            ridges: (0..users).map(|_| CachedRidge::new(dim, lambda)).collect(),
            counts: vec![ArmCounts::default(); users],
            total: ArmCounts::default(),
            catalog: ArmCatalog::new(dim),
        }
    }

    pub fn user_count(&self) -> usize {
        self.ridges.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn update(&mut self, user: usize, x: &DVector<f64>, reward: f64) -> Result<usize> {
        self.ridges[user].update(x, reward)?;
        let slot = self.catalog.intern(x);
        self.counts[user].add(slot, 1.0);
        self.total.add(slot, 1.0);
        Ok(slot)
    }

    pub fn state(&self, user: usize) -> &RidgeState {
        self.ridges[user].state()
    }

    pub fn theta(&self, user: usize) -> &DVector<f64> {
        self.ridges[user].theta()
    }

    pub fn pulls(&self, user: usize) -> usize {
        self.ridges[user].pulls()
    }

    pub fn counts(&self, user: usize) -> &ArmCounts {
        &self.counts[user]
    }

    pub fn catalog(&self) -> &ArmCatalog {
        &self.catalog
    }

    /// Multiplicities over the union of `members` (ascending, distinct).
    pub fn member_counts(&self, members: &[usize]) -> ArmCounts {
        let users = self.user_count();
        let mut out = ArmCounts::default();
        if 2 * members.len() <= users {
            for &m in members {
                out.accumulate(&self.counts[m], 1.0);
            }
        } else {
            out.accumulate(&self.total, 1.0);
            let mut next = members.iter().peekable();
            for l in 0..users {
                if next.peek() == Some(&&l) {
                    next.next();
                } else {
                    out.accumulate(&self.counts[l], -1.0);
                }
            }
        }
        out
    }

    /// Pooled statistics of `members`. The history is only materialized when
    /// `with_history` is set.
    pub fn cluster(&self, members: &[usize], with_history: bool) -> ClusterStats<'_> {
        let mut gram = DMatrix::zeros(self.dim, self.dim);
        let mut moment = DVector::zeros(self.dim);
        let mut pulls = 0;
        for &m in members {
            let s = self.ridges[m].state();
            gram += s.gram();
            moment += s.moment();
            pulls += s.pulls();
        }
        let history = if with_history {
            self.catalog.history(&self.member_counts(members))
        } else {
            History::empty()
        };
        ClusterStats::from_parts(&gram, &moment, pulls, self.lambda, history)
    }
}
