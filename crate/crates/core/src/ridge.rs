//! Running sufficient statistics for regularized least squares.
//!
//! A [`RidgeState`] stores the unregularized Gram matrix `M = Σ x xᵀ`, the
//! moment vector `b = Σ r x`, the pull count and the served feature history.
//! The ridge estimate for a regularizer `λ` solves `(λI + M) θ = b`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Slack allowed on the unit-norm precondition for feature vectors.
pub const NORM_SLACK: f64 = 1e-9;

pub(crate) fn check_feature(x: &DVector<f64>, dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let norm = x.norm();
    if norm > 1.0 + NORM_SLACK {
        return Err(Error::FeatureNorm { norm });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RidgeState {
    dim: usize,
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    pulls: usize,
    /// Served features, one row of `dim` values per observation.
    history: Vec<f64>,
}

impl RidgeState {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            gram: DMatrix::zeros(dim, dim),
            moment: DVector::zeros(dim),
            pulls: 0,
            history: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
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

    /// Flat history buffer (`pulls * dim` values, row-major).
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn history_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.history.chunks_exact(self.dim.max(1))
    }

    /// Adds one observation: `M += x xᵀ`, `b += r x`.
    pub fn update(&mut self, x: &DVector<f64>, reward: f64) -> Result<()> {
        check_feature(x, self.dim)?;
        self.gram.ger(1.0, x, x, 1.0);
        self.moment.axpy(reward, x, 1.0);
        self.pulls += 1;
        self.history.extend_from_slice(x.as_slice());
        Ok(())
    }

    /// Solves `(λI + M) θ = b`.
    pub fn estimate(&self, lambda: f64) -> DVector<f64> {
        solve_regularized(&self.gram, &self.moment, lambda)
    }
}

/// Dense SPD solve of `(λI + gram) θ = moment`.
pub fn solve_regularized(gram: &DMatrix<f64>, moment: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let mut reg = gram.clone();
    for k in 0..reg.nrows() {
        reg[(k, k)] += lambda;
    }
    match reg.clone().cholesky() {
        Some(chol) => chol.solve(moment),
        // λ > 0 keeps the system positive definite; LU only guards against
        // round-off on degenerate inputs.
        None => reg
            .lu()
            .solve(moment)
            .unwrap_or_else(|| DVector::zeros(moment.len())),
    }
}

/// Ridge statistics paired with a rank-1 maintained inverse of `λI + M`.
///
/// The dense factorization in [`RidgeState::estimate`] is the reference path;
/// this cache is the fast path used by policies that need per-user estimates
/// every round.
#[derive(Debug, Clone)]
pub struct CachedRidge {
    state: RidgeState,
    lambda: f64,
    inverse: DMatrix<f64>,
    theta: DVector<f64>,
}

impl CachedRidge {
    pub fn new(dim: usize, lambda: f64) -> Self {
        Self {
            state: RidgeState::new(dim),
            lambda,
            inverse: DMatrix::identity(dim, dim) / lambda,
            theta: DVector::zeros(dim),
        }
    }

    pub fn state(&self) -> &RidgeState {
        &self.state
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Current estimate `(λI + M)⁻¹ b`.
    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn pulls(&self) -> usize {
        self.state.pulls
    }

    pub fn update(&mut self, x: &DVector<f64>, reward: f64) -> Result<()> {
        self.state.update(x, reward)?;
        // Sherman–Morrison: (A + x xᵀ)⁻¹ = A⁻¹ − (A⁻¹x)(A⁻¹x)ᵀ / (1 + xᵀA⁻¹x)
        let ax = &self.inverse * x;
        let denom = 1.0 + x.dot(&ax);
        self.inverse.ger(-1.0 / denom, &ax, &ax, 1.0);
        self.theta = &self.inverse * &self.state.moment;
        Ok(())
    }

    /// Recomputes the inverse from the Gram matrix, discarding accumulated
    /// round-off.
    pub fn refresh(&mut self) {
        let mut reg = self.state.gram.clone();
        for k in 0..reg.nrows() {
            reg[(k, k)] += self.lambda;
        }
        if let Some(chol) = reg.cholesky() {
            self.inverse = chol.inverse();
        }
        self.theta = &self.inverse * &self.state.moment;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn single_update() {
        let mut s = RidgeState::new(2);
        s.update(&v(&[1.0, 0.0]), 1.0).unwrap();
        assert_eq!(s.gram(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(s.moment(), &v(&[1.0, 0.0]));
        assert_eq!(s.pulls(), 1);
        assert_eq!(s.history(), &[1.0, 0.0]);
    }

    #[test]
    fn orthogonal_updates() {
        let mut s = RidgeState::new(2);
        s.update(&v(&[1.0, 0.0]), 1.0).unwrap();
        s.update(&v(&[0.0, 1.0]), 0.5).unwrap();
        assert_eq!(s.gram(), &DMatrix::identity(2, 2));
        assert_eq!(s.moment(), &v(&[1.0, 0.5]));
    }

    #[test]
    fn estimates() {
        let mut s = RidgeState::new(2);
        assert_eq!(s.estimate(1.0), v(&[0.0, 0.0]));
        s.update(&v(&[1.0, 0.0]), 1.0).unwrap();
        assert_relative_eq!(s.estimate(1.0), v(&[0.5, 0.0]), epsilon = 1e-15);
        s.update(&v(&[0.0, 1.0]), 0.5).unwrap();
        // (I + I)⁻¹ (1, 0.5) = (0.5, 0.25)
        assert_relative_eq!(s.estimate(1.0), v(&[0.5, 0.25]), epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let mut s = RidgeState::new(2);
        assert!(matches!(
            s.update(&v(&[1.0, 0.0, 0.0]), 1.0),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(
            s.update(&v(&[1.0, 1.0]), 1.0),
            Err(Error::FeatureNorm { .. })
        ));
        assert_eq!(s.pulls(), 0);
    }

    #[test]
    fn gram_matches_history_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 6;
        let mut s = RidgeState::new(d);
        let mut rewards = Vec::new();
        for _ in 0..100 {
            let raw = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let x = &raw / (raw.norm() * rng.random_range(1.0..2.0));
            let r = rng.random_range(-1.0..1.0);
            rewards.push(r);
            s.update(&x, r).unwrap();
        }
        let mut gram = DMatrix::zeros(d, d);
        let mut moment = DVector::zeros(d);
        for (row, r) in s.history_rows().zip(&rewards) {
            let x = DVector::from_column_slice(row);
            gram += &x * x.transpose();
            moment += &x * *r;
        }
        assert_eq!(s.pulls(), 100);
        assert!((s.gram() - gram).amax() < 1e-10);
        assert!((s.moment() - moment).amax() < 1e-10);
        assert!((s.gram() - s.gram().transpose()).amax() <= 1e-12 * s.gram().amax());
    }

    #[test]
    fn cached_inverse_tracks_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 5;
        let mut c = CachedRidge::new(d, 1.0);
        for _ in 0..500 {
            let raw = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let x = &raw / raw.norm();
            c.update(&x, rng.random_range(0.0..1.0)).unwrap();
        }
        let dense = c.state().estimate(1.0);
        assert!((c.theta() - dense).amax() < 1e-10);
        c.refresh();
        assert!((c.theta() - c.state().estimate(1.0)).amax() < 1e-12);
    }
}
