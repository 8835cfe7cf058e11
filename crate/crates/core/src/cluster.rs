//! Pooled cluster statistics and the misspecification-robust UCB index.
//!
//! For a cluster `V` with pooled Gram `M̄ = λI + Σ Mᵢ` and moment `b̄`, the
//! index of an arm `x` is
//!
//! ```text
//! min{1, xᵀθ̂ + β‖x‖_{M̄⁻¹} + ε* S(x)}
//! ```
//!
//! where `S(x) = Σₛ |xᵀ M̄⁻¹ xₛ|` over every feature served to a member of
//! `V` (exact form), or `√T_V ‖x‖_{M̄⁻¹}` (Cauchy–Schwarz surrogate).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::ridge::RidgeState;

/// How the `ε*` history term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum EpsSum {
    /// Exact sum over the stored history.
    #[default]
    Exact,
    /// `√pulls · ‖x‖_{M̄⁻¹}`, an upper bound on the exact sum.
    Surrogate,
}

/// Index hyperparameters for one scoring pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexParams {
    pub beta: f64,
    pub eps_star: f64,
    pub eps_sum: EpsSum,
}

/// Unclamped components of the index for one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexTerms {
    pub estimate: f64,
    /// `β‖x‖_{M̄⁻¹}`
    pub width: f64,
    /// `ε* S(x)`
    pub misspecification: f64,
}

impl IndexTerms {
    pub fn unclamped(&self) -> f64 {
        self.estimate + self.width + self.misspecification
    }

    pub fn index(&self) -> f64 {
        self.unclamped().min(1.0)
    }
}

/// Served features behind the `ε*` sum.
#[derive(Debug, Clone)]
pub enum History<'a> {
    /// Raw rows borrowed from member states, one slice of `pulls * d` values
    /// per member, in member order.
    Segments(Vec<&'a [f64]>),
    /// Distinct rows (`weights.len() * d` values) with their multiplicities.
    Weighted { rows: &'a [f64], weights: Vec<f64> },
}

impl History<'_> {
    pub fn empty() -> Self {
        History::Segments(Vec::new())
    }

    /// Number of served rows represented, counting multiplicity.
    pub fn total_weight(&self, dim: usize) -> f64 {
        match self {
            History::Segments(s) => s.iter().map(|seg| (seg.len() / dim.max(1)) as f64).sum(),
            History::Weighted { weights, .. } => weights.iter().sum(),
        }
    }
}

/// Statistics of one inferred cluster for the current round.
#[derive(Debug, Clone)]
pub struct ClusterStats<'a> {
    dim: usize,
    gram_reg: DMatrix<f64>,
    moment: DVector<f64>,
    theta_hat: DVector<f64>,
    pulls: usize,
    factor: Cholesky<f64, Dyn>,
    history: History<'a>,
}

impl<'a> ClusterStats<'a> {
    /// Builds the statistics from an unregularized Gram matrix and moment.
    pub fn from_parts(
        gram: &DMatrix<f64>,
        moment: &DVector<f64>,
        pulls: usize,
        lambda: f64,
        history: History<'a>,
    ) -> Self {
        let dim = moment.len();
        let mut gram_reg = gram.clone();
        for k in 0..dim {
            gram_reg[(k, k)] += lambda;
        }
        let factor = Cholesky::new(gram_reg.clone()).unwrap_or_else(|| {
            // Only reachable through round-off on near-singular sums;
            // symmetrize and retry before giving up.
            let sym = (&gram_reg + gram_reg.transpose()) * 0.5;
            Cholesky::new(sym).expect("λI + M must be positive definite")
        });
        let theta_hat = factor.solve(moment);
        Self {
            dim,
            gram_reg,
            moment: moment.clone(),
            theta_hat,
            pulls,
            factor,
            history,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram_reg(&self) -> &DMatrix<f64> {
        &self.gram_reg
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn pulls(&self) -> usize {
        self.pulls
    }

    pub fn history(&self) -> &History<'a> {
        &self.history
    }

    /// `M̄⁻¹ x`
    pub fn solve(&self, x: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(x)
    }

    /// Index components for every arm, computed in one pass over the history.
    pub fn index_terms(&self, arms: &[DVector<f64>], params: IndexParams) -> Result<Vec<IndexTerms>> {
        let n = arms.len();
        let d = self.dim;
        let mut solved = Vec::with_capacity(n);
        let mut terms = Vec::with_capacity(n);
        for x in arms {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
            let y = self.factor.solve(x);
            let quad = x.dot(&y).max(0.0);
            terms.push(IndexTerms {
                estimate: x.dot(&self.theta_hat),
                width: params.beta * quad.sqrt(),
                misspecification: 0.0,
            });
            solved.push((y, quad));
        }
        if params.eps_star == 0.0 {
            return Ok(terms);
        }
        match params.eps_sum {
            EpsSum::Surrogate => {
                let root = (self.pulls as f64).sqrt();
                for (t, (_, quad)) in terms.iter_mut().zip(&solved) {
                    t.misspecification = params.eps_star * root * quad.sqrt();
                }
            }
            EpsSum::Exact => {
                // Transposed layout: row k holds coordinate k of every M̄⁻¹x,
                // so the inner loop runs contiguously over arms.
                let mut yt = vec![0.0; d * n];
                for (a, (y, _)) in solved.iter().enumerate() {
                    for k in 0..d {
                        yt[k * n + a] = y[k];
                    }
                }
                let mut sums = vec![0.0; n];
                let mut acc = vec![0.0; n];
                let mut accumulate = |row: &[f64], weight: f64| {
                    acc.iter_mut().for_each(|v| *v = 0.0);
                    for (k, &xk) in row.iter().enumerate() {
                        let col = &yt[k * n..(k + 1) * n];
                        for (v, &c) in acc.iter_mut().zip(col) {
                            *v += xk * c;
                        }
                    }
                    for (s, v) in sums.iter_mut().zip(&acc) {
                        *s += weight * v.abs();
                    }
                };
                match &self.history {
                    History::Segments(segments) => {
                        for segment in segments {
                            for row in segment.chunks_exact(d) {
                                accumulate(row, 1.0);
                            }
                        }
                    }
                    History::Weighted { rows, weights } => {
                        for (row, &w) in rows.chunks_exact(d).zip(weights) {
                            if w != 0.0 {
                                accumulate(row, w);
                            }
                        }
                    }
                }
                for (t, s) in terms.iter_mut().zip(sums) {
                    t.misspecification = params.eps_star * s;
                }
            }
        }
        Ok(terms)
    }

    pub fn ucb_index(&self, x: &DVector<f64>, params: IndexParams) -> Result<f64> {
        Ok(self.index_terms(std::slice::from_ref(x), params)?[0].index())
    }

    /// Index of every arm.
    pub fn ucb_scores(&self, arms: &[DVector<f64>], params: IndexParams) -> Result<Vec<f64>> {
        Ok(self.index_terms(arms, params)?.iter().map(IndexTerms::index).collect())
    }

    /// Arm with the largest index; ties go to the lowest position.
    pub fn select(&self, arms: &[DVector<f64>], params: IndexParams) -> Result<usize> {
        if arms.is_empty() {
            return Err(Error::EmptyArms);
        }
        Ok(argmax_first(&self.ucb_scores(arms, params)?))
    }
}

/// Aggregates member statistics: `M̄ = λI + Σ Mᵢ`, `b̄ = Σ bᵢ`.
///
/// An empty member set yields the prior (`M̄ = λI`, `θ̂ = 0`).
pub fn aggregate_cluster<'a, I>(members: I, dim: usize, lambda: f64) -> Result<ClusterStats<'a>>
where
    I: IntoIterator<Item = &'a RidgeState>,
{
    let mut gram = DMatrix::zeros(dim, dim);
    let mut moment = DVector::zeros(dim);
    let mut pulls = 0;
    let mut history = Vec::new();
    for state in members {
        if state.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: state.dim() });
        }
        gram += state.gram();
        moment += state.moment();
        pulls += state.pulls();
        if state.pulls() > 0 {
            history.push(state.history());
        }
    }
    Ok(ClusterStats::from_parts(&gram, &moment, pulls, lambda, History::Segments(history)))
}

/// Index of the first maximum. NaN scores never win.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] || (scores[best].is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    best
}
