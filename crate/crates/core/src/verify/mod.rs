//! Numeric checks of the supporting inequalities and the reduction
//! identities. Every suite is seeded and returns a [`LemmaReport`].

pub mod chain;
pub mod f1;
pub mod partition;
pub mod reduction;
pub mod tlx;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use serde_json::Value;

use crate::env::synthetic::unit_gaussian;
use crate::env::TrialRng;
use crate::error::{Error, Result};

pub use chain::{check_misclustering_chain, chain_case, ChainCase};
pub use f1::{check_lemma_f1, f1_sides, f1_tightness};
pub use partition::{check_good_partition, PartitionCheck};
pub use reduction::{check_reductions, ReductionCheck};
pub use tlx::{check_tilde_lambda_mc, ArmLaw, TlxCheck};

/// Absolute slack allowed for the deterministic inequalities.
pub const DETERMINISTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub suite: String,
    pub cases: usize,
    /// Largest signed slack `lhs − rhs` seen; negative means room to spare.
    pub max_violation: f64,
    pub tolerance: f64,
    pub status: Status,
    pub worst_case: Option<Value>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    #[serde(skip)]
    failures: Vec<String>,
    #[serde(skip)]
    inconclusive: bool,
}

impl LemmaReport {
    pub fn new(suite: &str, tolerance: f64) -> Self {
        Self {
            suite: suite.to_string(),
            cases: 0,
            max_violation: f64::NEG_INFINITY,
            tolerance,
            status: Status::Pass,
            worst_case: None,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
            failures: Vec::new(),
            inconclusive: false,
        }
    }

    /// Counts one case; `describe` runs only when the case is the new worst.
    pub fn record(&mut self, violation: f64, describe: impl FnOnce() -> Value) {
        self.cases += 1;
        if violation > self.max_violation || violation.is_nan() {
            self.max_violation = if violation.is_nan() { f64::INFINITY } else { violation };
            self.worst_case = Some(describe());
        }
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Marks the report failed independently of the slack.
    pub fn fail(&mut self, reason: impl Into<String>) {
        let reason = reason.into();
        self.notes.push(format!("failed: {reason}"));
        self.failures.push(reason);
    }

    pub fn mark_inconclusive(&mut self, reason: impl Into<String>) {
        self.notes.push(format!("inconclusive: {}", reason.into()));
        self.inconclusive = true;
    }

    pub fn finish(mut self) -> Self {
        self.status = if !self.failures.is_empty() || self.max_violation > self.tolerance {
            Status::Fail
        } else if self.inconclusive {
            Status::Inconclusive
        } else {
            Status::Pass
        };
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Suites runnable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    F1,
    Chain,
    Tlx,
    Reduction,
    Partition,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::F1, Suite::Chain, Suite::Tlx, Suite::Reduction, Suite::Partition];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::F1 => "f1",
            Suite::Chain => "chain",
            Suite::Tlx => "tlx",
            Suite::Reduction => "reduction",
            Suite::Partition => "partition",
        }
    }

    /// Runs the suite at its default (acceptance-sized) settings.
    pub fn run_default(self, seed: u64) -> Result<LemmaReport> {
        match self {
            Suite::F1 => Ok(check_lemma_f1(10_000, 50, 10, 1.0, seed)),
            Suite::Chain => Ok(check_misclustering_chain(&ChainCase::default(), 10_000, seed)),
            Suite::Tlx => check_tilde_lambda_mc(&TlxCheck::default(), seed),
            Suite::Reduction => check_reductions(&ReductionCheck::default(), seed),
            Suite::Partition => check_good_partition(&PartitionCheck::default(), seed),
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}` (f1, chain, tlx, reduction, partition, all)")))
    }
}

/// A vector with a uniform direction and norm uniform in `[0, cap]`, or
/// exactly `cap` when `on_boundary`.
fn bounded_vector(rng: &mut TrialRng, dim: usize, cap: f64, on_boundary: bool) -> DVector<f64> {
    let radius = if on_boundary { cap } else { cap * rng.random::<f64>() };
    unit_gaussian(rng, dim) * radius
}

/// `Σ xᵢxᵢᵀ` for column vectors `xs`.
fn gram(xs: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(dim, dim);
    for x in xs {
        g.ger(1.0, x, x, 1.0);
    }
    g
}

/// Eigenvalue range `(λ_min, λ_max)` of a symmetric matrix.
fn eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let e = m.clone().symmetric_eigenvalues();
    (e.min(), e.max())
}

fn to_json(v: &DVector<f64>) -> Value {
    Value::from(v.iter().copied().collect::<Vec<_>>())
}
