//! Policies behind a common round interface.
//!
//! A trial calls [`Policy::choose`] with the serving user and the candidate
//! features, then reports the realized reward through [`Policy::feedback`].

pub mod baselines;
pub mod graph;
pub mod rclumb;
pub mod rsclumb;
pub mod table;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cluster::{EpsSum, IndexParams};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::theory::ConfidenceParams;

pub use baselines::{Club, LinUcb, LinUcbScope, Oracle};
pub use graph::UserGraph;
pub use rclumb::{ClusterMode, Rclumb};
pub use rsclumb::Rsclumb;

/// One decision point.
#[derive(Debug, Clone, Copy)]
pub struct Round<'a> {
    pub user: usize,
    /// Pool indices of the candidates. Learning policies only look at
    /// `features`; the oracle uses the ids to query ground truth.
    pub arm_ids: &'a [usize],
    pub features: &'a [DVector<f64>],
}

pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Position in `round.features` of the recommended arm.
    fn choose(&mut self, round: &Round<'_>) -> Result<usize>;

    fn feedback(&mut self, user: usize, x: &DVector<f64>, reward: f64) -> Result<()>;

    /// Users whose statistics backed the most recent `choose`, ascending.
    fn inferred_cluster(&self) -> Option<&[usize]> {
        None
    }
}

/// Shared UCB settings resolved for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbSettings {
    pub params: ConfidenceParams,
    pub beta: f64,
    pub eps_sum: EpsSum,
}

impl UcbSettings {
    pub fn new(params: ConfidenceParams) -> Self {
        Self {
            beta: params.beta(),
            params,
            eps_sum: EpsSum::Exact,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn index(&self, robust: bool) -> IndexParams {
        IndexParams {
            beta: self.beta,
            eps_star: if robust { self.params.eps_star } else { 0.0 },
            eps_sum: self.eps_sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    Rclumb,
    Rsclumb,
    Club,
    Sclub,
    LinUcbOne,
    LinUcbInd,
    RLinUcb,
    RLinUcbInd,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 9] = [
        PolicyKind::Rclumb,
        PolicyKind::Rsclumb,
        PolicyKind::Club,
        PolicyKind::Sclub,
        PolicyKind::LinUcbOne,
        PolicyKind::LinUcbInd,
        PolicyKind::RLinUcb,
        PolicyKind::RLinUcbInd,
        PolicyKind::Oracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Rclumb => "rclumb",
            PolicyKind::Rsclumb => "rsclumb",
            PolicyKind::Club => "club",
            PolicyKind::Sclub => "sclub",
            PolicyKind::LinUcbOne => "linucb-one",
            PolicyKind::LinUcbInd => "linucb-ind",
            PolicyKind::RLinUcb => "rlinucb",
            PolicyKind::RLinUcbInd => "rlinucb-ind",
            PolicyKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

/// Declarative hyperparameters for one policy; unset values fall back to
/// run-level defaults when the policy is built.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyOverrides {
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub eps_star: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub beta: Option<f64>,
    pub eps_sum: Option<EpsSum>,
    pub cluster_mode: Option<ClusterMode>,
}

impl PolicyOverrides {
    /// Values set in `self` win over `base`.
    pub fn or(&self, base: &PolicyOverrides) -> PolicyOverrides {
        PolicyOverrides {
            lambda: self.lambda.or(base.lambda),
            delta: self.delta.or(base.delta),
            eps_star: self.eps_star.or(base.eps_star),
            alpha1: self.alpha1.or(base.alpha1),
            alpha2: self.alpha2.or(base.alpha2),
            beta: self.beta.or(base.beta),
            eps_sum: self.eps_sum.or(base.eps_sum),
            cluster_mode: self.cluster_mode.or(base.cluster_mode),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub overrides: PolicyOverrides,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            overrides: PolicyOverrides::default(),
        }
    }

    /// Resolves hyperparameters against the environment.
    ///
    /// `α₂` defaults to `2√(1/(2λ̃ₓ))` when the environment reports `λ̃ₓ`,
    /// otherwise to 1.
    pub fn settings(&self, env: &dyn Environment, horizon: usize) -> Result<UcbSettings> {
        let o = &self.overrides;
        let mut params = ConfidenceParams::new(env.dim(), horizon);
        if let Some(v) = o.lambda {
            params.lambda = v;
        }
        if let Some(v) = o.delta {
            params.delta = v;
        }
        params.eps_star = o.eps_star.unwrap_or(0.0);
        params.alpha1 = o.alpha1.unwrap_or(1.0);
        params.alpha2 = match (o.alpha2, env.tilde_lambda_x()) {
            (Some(v), _) => v,
            (None, Some(tlx)) => 2.0 * (1.0 / (2.0 * tlx)).sqrt(),
            (None, None) => 1.0,
        };
        params.validate()?;
        let mut settings = UcbSettings::new(params);
        if let Some(beta) = o.beta {
            settings.beta = beta;
        }
        if let Some(mode) = o.eps_sum {
            settings.eps_sum = mode;
        }
        Ok(settings)
    }

    pub fn build(&self, env: Arc<dyn Environment>, horizon: usize) -> Result<Box<dyn Policy>> {
        let settings = self.settings(env.as_ref(), horizon)?;
        let users = env.user_count();
        let dim = env.dim();
        let policy: Box<dyn Policy> = match self.kind {
            PolicyKind::Rclumb => Box::new(Rclumb::new(
                users,
                settings,
                self.overrides.cluster_mode.unwrap_or(ClusterMode::OneHop),
            )),
            PolicyKind::Rsclumb => Box::new(Rsclumb::new(users, settings)),
            PolicyKind::Club => Box::new(Club::new(users, settings)),
            PolicyKind::Sclub => Box::new(Rsclumb::sclub(users, settings)),
            PolicyKind::LinUcbOne => Box::new(LinUcb::new(users, settings, LinUcbScope::Global, false)),
            PolicyKind::LinUcbInd => Box::new(LinUcb::new(users, settings, LinUcbScope::PerUser, false)),
            PolicyKind::RLinUcb => Box::new(LinUcb::new(users, settings, LinUcbScope::Global, true)),
            PolicyKind::RLinUcbInd => Box::new(LinUcb::new(users, settings, LinUcbScope::PerUser, true)),
            PolicyKind::Oracle => Box::new(Oracle::new(env)),
        };
        debug_assert_eq!(settings.params.dim, dim);
        Ok(policy)
    }
}
