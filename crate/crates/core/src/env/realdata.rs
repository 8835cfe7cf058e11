//! Rating files to bandit environments: binarize the most active block,
//! embed it by truncated SVD, and serve either linear-plus-deviation
//! rewards (case 1) or a held-out feedback matrix (case 2).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{Environment, ProblemInstance, TrialRng};
use crate::error::{Error, Result};

/// Sparse `(user, item) → rating` triples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingMatrix {
    entries: BTreeMap<(usize, usize), f64>,
}

impl RatingMatrix {
    pub fn from_triples(triples: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut entries = BTreeMap::new();
        for (u, i, r) in triples {
            entries.insert((u, i), r);
        }
        Self { entries }
    }

    /// Parses `user,item,rating` lines. A first line whose leading field
    /// is not an integer is treated as a header; blank lines are skipped.
    /// Later duplicates overwrite earlier ones.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if k == 0 && fields[0].parse::<usize>().is_err() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                message,
            };
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let user = fields[0].parse().map_err(|e| err(format!("user id `{}`: {e}", fields[0])))?;
            let item = fields[1].parse().map_err(|e| err(format!("item id `{}`: {e}", fields[1])))?;
            let rating: f64 = fields[2].parse().map_err(|e| err(format!("rating `{}`: {e}", fields[2])))?;
            if !rating.is_finite() {
                return Err(err(format!("rating `{}` is not finite", fields[2])));
            }
            entries.insert((user, item), rating);
        }
        if entries.is_empty() {
            return Err(Error::EmptyInput(path.to_path_buf()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, user: usize, item: usize) -> Option<f64> {
        self.entries.get(&(user, item)).copied()
    }

    pub fn user_count(&self) -> usize {
        self.counts(|&(u, _)| u).len()
    }

    pub fn item_count(&self) -> usize {
        self.counts(|&(_, i)| i).len()
    }

    fn counts(&self, key: impl Fn(&(usize, usize)) -> usize) -> HashMap<usize, usize> {
        let mut c = HashMap::new();
        for k in self.entries.keys() {
            *c.entry(key(k)).or_insert(0) += 1;
        }
        c
    }

    /// The `n` ids with the most ratings, ties to the lower id.
    fn top(&self, n: usize, what: &'static str, key: impl Fn(&(usize, usize)) -> usize) -> Result<Vec<usize>> {
        let mut ranked: Vec<(usize, usize)> = self.counts(key).into_iter().collect();
        if ranked.len() < n {
            return Err(Error::NotEnough {
                what,
                requested: n,
                available: ranked.len(),
            });
        }
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranked.into_iter().take(n).map(|(id, _)| id).collect())
    }

    /// Dense 0/1 matrix over the most active users (rows, by rank) and most
    /// rated items (columns, by rank); 1 iff the rating exceeds `threshold`.
    pub fn binarize(&self, top_users: usize, top_items: usize, threshold: f64) -> Result<DMatrix<f64>> {
        let users = self.top(top_users, "users", |&(u, _)| u)?;
        let items = self.top(top_items, "items", |&(_, i)| i)?;
        Ok(DMatrix::from_fn(top_users, top_items, |r, c| {
            match self.get(users[r], items[c]) {
                Some(v) if v > threshold => 1.0,
                _ => 0.0,
            }
        }))
    }
}

/// Rank-`d` factors `H ≈ U diag(σ) Vᵀ` with descending `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl TruncatedSvd {
    /// Components beyond the numerical rank are zero, with a warning.
    pub fn new(h: &DMatrix<f64>, d: usize) -> Result<Self> {
        let (rows, cols) = h.shape();
        let k = rows.min(cols);
        if d == 0 || d > k {
            return Err(Error::Config(format!("SVD rank {d} must lie in 1..={k} for a {rows}x{cols} matrix")));
        }
        let svd = h.clone().svd(true, true);
        let u_full = svd.u.expect("requested U");
        let vt_full = svd.v_t.expect("requested Vᵀ");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

        let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let tol = rows.max(cols) as f64 * f64::EPSILON * top;
        let mut u = DMatrix::zeros(rows, d);
        let mut v = DMatrix::zeros(cols, d);
        let mut sigma = DVector::zeros(d);
        let mut rank = 0;
        for (slot, &c) in order.iter().take(d).enumerate() {
            let s = svd.singular_values[c];
            if s <= tol {
                continue;
            }
            rank += 1;
            let mut uc = u_full.column(c).into_owned();
            let mut vc = vt_full.row(c).transpose();
            let pivot = uc.iter().copied().enumerate().fold((0, 0.0f64), |best, (i, x)| {
                if x.abs() > best.1.abs() { (i, x) } else { best }
            });
            if pivot.1 < 0.0 {
                uc = -uc;
                vc = -vc;
            }
            u.set_column(slot, &uc);
            v.set_column(slot, &vc);
            sigma[slot] = s;
        }
        if rank < d {
            warn!("matrix has numerical rank {rank} < {d}; trailing components are zero");
        }
        Ok(Self { u, sigma, v })
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.sigma) * self.v.transpose()
    }

    /// Rows of `U√Σ` and `V√Σ`, each scaled to unit norm (zero rows stay zero).
    pub fn embeddings(&self) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let root = self.sigma.map(f64::sqrt);
        let rows = |m: &DMatrix<f64>| -> Vec<DVector<f64>> {
            (0..m.nrows())
                .map(|r| {
                    let x = m.row(r).transpose().component_mul(&root);
                    let n = x.norm();
                    if n > 0.0 { x / n } else { x }
                })
                .collect()
        };
        (rows(&self.u), rows(&self.v))
    }
}

/// Row and column embeddings.
pub type Embeddings = (Vec<DVector<f64>>, Vec<DVector<f64>>);

/// Unit row and column embeddings of `H` at rank `d`.
pub fn svd_features(h: &DMatrix<f64>, d: usize) -> Result<Embeddings> {
    Ok(TruncatedSvd::new(h, d)?.embeddings())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RealCase {
    /// Linear rewards on SVD vectors plus a random deviation matrix.
    Linear,
    /// Rewards read from held-out rows of the binary matrix.
    Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealEnvSpec {
    pub case: RealCase,
    pub dim: usize,
    pub top_users: usize,
    pub top_items: usize,
    pub threshold: f64,
    pub eps_range: f64,
    pub noise_std: f64,
    /// Leading rows used to learn item features (matrix case only).
    pub feature_rows: usize,
    pub per_round_arms: usize,
}

impl Default for RealEnvSpec {
    fn default() -> Self {
        Self {
            case: RealCase::Linear,
            dim: 50,
            top_users: 1000,
            top_items: 1000,
            threshold: 3.0,
            eps_range: 0.2,
            noise_std: 0.0,
            feature_rows: 100,
            per_round_arms: 20,
        }
    }
}

impl RealEnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.per_round_arms == 0 || self.per_round_arms > self.top_items {
            return Err(Error::Config(format!(
                "per_round_arms must lie in 1..={}, got {}",
                self.top_items, self.per_round_arms
            )));
        }
        if self.case == RealCase::Matrix && self.feature_rows >= self.top_users {
            return Err(Error::Config(format!(
                "feature_rows ({}) must leave feedback rows out of {} users",
                self.feature_rows, self.top_users
            )));
        }
        if !(self.eps_range >= 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::Config("eps_range and noise_std must be >= 0".into()));
        }
        Ok(())
    }
}

/// Case 1: every selected user is its own cluster.
pub fn build_linear(spec: &RealEnvSpec, ratings: &RatingMatrix, seed: u64) -> Result<ProblemInstance> {
    spec.validate()?;
    let h = ratings.binarize(spec.top_users, spec.top_items, spec.threshold)?;
    let (users, items) = svd_features(&h, spec.dim)?;
    let mut rng = TrialRng::seed_from_u64(seed);
    let r = spec.eps_range;
    let deviation = if r > 0.0 {
        DMatrix::from_fn(users.len(), items.len(), |_, _| rng.random_range(-r..r))
    } else {
        DMatrix::zeros(users.len(), items.len())
    };
    Ok(ProblemInstance {
        user_cluster: (0..users.len()).collect(),
        cluster_thetas: users,
        arm_pool: items,
        deviation,
        noise_std: spec.noise_std,
        per_round_arms: spec.per_round_arms,
        tilde_lambda: None,
    })
}

/// Case 2: item features from the leading rows, feedback from the rest.
pub fn build_matrix(spec: &RealEnvSpec, ratings: &RatingMatrix) -> Result<MatrixFeedbackEnv> {
    spec.validate()?;
    let h = ratings.binarize(spec.top_users, spec.top_items, spec.threshold)?;
    let head = h.rows(0, spec.feature_rows).into_owned();
    let (_, items) = svd_features(&head, spec.dim)?;
    let feedback = h.rows(spec.feature_rows, spec.top_users - spec.feature_rows).into_owned();
    MatrixFeedbackEnv::new(items, feedback, spec.per_round_arms)
}

/// Noise-free rewards looked up in a fixed matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFeedbackEnv {
    pub features: Vec<DVector<f64>>,
    /// `users × items`
    pub feedback: DMatrix<f64>,
    pub per_round_arms: usize,
}

impl MatrixFeedbackEnv {
    pub fn new(features: Vec<DVector<f64>>, feedback: DMatrix<f64>, per_round_arms: usize) -> Result<Self> {
        if features.len() != feedback.ncols() {
            return Err(Error::DimensionMismatch {
                expected: feedback.ncols(),
                got: features.len(),
            });
        }
        if per_round_arms == 0 || per_round_arms > features.len() {
            return Err(Error::Config(format!("per_round_arms {per_round_arms} out of range")));
        }
        Ok(Self {
            features,
            feedback,
            per_round_arms,
        })
    }
}

impl Environment for MatrixFeedbackEnv {
    fn user_count(&self) -> usize {
        self.feedback.nrows()
    }

    fn dim(&self) -> usize {
        self.features.first().map_or(0, |x| x.len())
    }

    fn arm_count(&self) -> usize {
        self.features.len()
    }

    fn per_round_arms(&self) -> usize {
        self.per_round_arms
    }

    fn features(&self, arm: usize) -> &DVector<f64> {
        &self.features[arm]
    }

    fn expected_reward(&self, user: usize, arm: usize) -> f64 {
        self.feedback[(user, arm)]
    }

    fn noise_std(&self) -> f64 {
        0.0
    }

    fn export(&self, out: &mut dyn std::io::Write) -> Result<()> {
        super::export::write_matrix(self, out)
    }
}
