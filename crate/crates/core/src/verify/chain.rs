//! Deterministic bound on the bias from pooling users whose preference
//! vectors differ by at most `ζ`:
//!
//! `|xᵀ M̄⁻¹ Σₛ xₛxₛᵀΔₛ| ≤ ζ√d · λ_max(Σₛ xₛxₛᵀ) / λ_min(M̄)`
//!
//! with `M̄ = λI + Σₛ xₛxₛᵀ`, `‖x‖, ‖xₛ‖ ≤ 1` and `‖Δₛ‖ ≤ ζ`. The looser
//! `ζ√(2d)` constant is reported alongside.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde_json::json;

use super::{bounded_vector, eig_range, gram, to_json, LemmaReport, DETERMINISTIC_TOL};
use crate::env::TrialRng;

/// Sampling ranges for the random cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainCase {
    pub max_len: usize,
    pub max_dim: usize,
    pub zeta_cap: f64,
    /// `λ` is drawn log-uniformly from this range.
    pub lambda_range: (f64, f64),
}

impl Default for ChainCase {
    fn default() -> Self {
        Self {
            max_len: 60,
            max_dim: 10,
            zeta_cap: 1.0,
            lambda_range: (0.01, 10.0),
        }
    }
}

/// `(lhs, ζ√d·ratio, ζ√(2d)·ratio)` for one history.
pub fn chain_case(
    x: &DVector<f64>,
    history: &[DVector<f64>],
    deltas: &[DVector<f64>],
    zeta: f64,
    lambda: f64,
) -> (f64, f64, f64) {
    let dim = x.len();
    let g = gram(history, dim);
    let m = &g + DMatrix::identity(dim, dim) * lambda;
    let mut drift = DVector::zeros(dim);
    for (xs, d) in history.iter().zip(deltas) {
        drift.axpy(xs.dot(d), xs, 1.0);
    }
    let solved = m.clone().cholesky().expect("λI + Gram is positive definite").solve(&drift);
    let lhs = x.dot(&solved).abs();
    let (_, g_max) = eig_range(&g);
    let (m_min, _) = eig_range(&m);
    let ratio = g_max / m_min;
    let d = dim as f64;
    (lhs, zeta * d.sqrt() * ratio, zeta * (2.0 * d).sqrt() * ratio)
}

pub fn check_misclustering_chain(cfg: &ChainCase, cases: usize, seed: u64) -> LemmaReport {
    let mut report = LemmaReport::new("chain", DETERMINISTIC_TOL);
    let mut rng = TrialRng::seed_from_u64(seed);
    let (lo, hi) = cfg.lambda_range;
    let mut loose_worst = f64::NEG_INFINITY;
    for case in 0..cases {
        let len = rng.random_range(1..=cfg.max_len.max(1));
        let dim = rng.random_range(1..=cfg.max_dim.max(1));
        let zeta = cfg.zeta_cap * rng.random::<f64>();
        let lambda = (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp();
        let edge = case % 2 == 1;
        let history: Vec<_> = (0..len).map(|_| bounded_vector(&mut rng, dim, 1.0, edge)).collect();
        let deltas: Vec<_> = if case % 4 == 3 {
            history.iter().map(|x| x.normalize() * zeta).collect()
        } else {
            (0..len).map(|_| bounded_vector(&mut rng, dim, zeta, edge)).collect()
        };
        let mut x = bounded_vector(&mut rng, dim, 1.0, edge);
        if case % 3 == 2 {
            // the query that maximizes the left side
            let m = gram(&history, dim) + DMatrix::identity(dim, dim) * lambda;
            let mut drift = DVector::zeros(dim);
            for (xs, d) in history.iter().zip(&deltas) {
                drift.axpy(xs.dot(d), xs, 1.0);
            }
            let w = m.cholesky().expect("positive definite").solve(&drift);
            if w.norm() > 0.0 {
                x = w.normalize();
            }
        }
        let (lhs, tight, loose) = chain_case(&x, &history, &deltas, zeta, lambda);
        loose_worst = loose_worst.max(lhs - loose);
        report.record(lhs - tight, || {
            json!({
                "case": case, "len": len, "dim": dim, "zeta": zeta, "lambda": lambda,
                "lhs": lhs, "bound": tight, "x": to_json(&x),
            })
        });
    }
    report.metric("max_slack_sqrt_2d_form", loose_worst);
    report.finish()
}
