//! `‖Σᵢ xᵢxᵢᵀθᵢ‖₂ ≤ C√d ‖Σᵢ xᵢxᵢᵀ‖₂` for `‖xᵢ‖ ≤ 1`, `‖θᵢ‖ ≤ C`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use serde_json::json;

use super::{bounded_vector, eig_range, gram, to_json, LemmaReport, DETERMINISTIC_TOL};
use crate::env::TrialRng;

/// Both sides of the inequality.
pub fn f1_sides(xs: &[DVector<f64>], thetas: &[DVector<f64>], c_norm: f64) -> (f64, f64) {
    let dim = xs[0].len();
    let mut lhs = DVector::zeros(dim);
    for (x, th) in xs.iter().zip(thetas) {
        lhs.axpy(x.dot(th), x, 1.0);
    }
    let (_, top) = eig_range(&gram(xs, dim));
    (lhs.norm(), c_norm * (dim as f64).sqrt() * top)
}

/// The equality case `X = I₂`, `θᵢ = xᵢ`, `C = 1`: both sides are `√2`.
///
/// Pairing `θ₁ = (1,0)` with `x₁ = (0,1)` instead makes every `xᵢᵀθᵢ`
/// zero; the `[1, 1]` sum needs each `θᵢ` aligned with its own `xᵢ`.
pub fn f1_tightness() -> (f64, f64) {
    let xs = [DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![1.0, 0.0])];
    f1_sides(&xs, &xs, 1.0)
}

/// `cases` random instances with `k ≤ max_k`, `d ≤ max_d`, plus the
/// equality case. Half the draws put every vector on its norm boundary.
pub fn check_lemma_f1(cases: usize, max_k: usize, max_d: usize, c_norm: f64, seed: u64) -> LemmaReport {
    let mut report = LemmaReport::new("f1", DETERMINISTIC_TOL);
    let mut rng = TrialRng::seed_from_u64(seed);
    for case in 0..cases {
        let k = rng.random_range(1..=max_k.max(1));
        let d = rng.random_range(1..=max_d.max(1));
        let edge = case % 2 == 1;
        let xs: Vec<_> = (0..k).map(|_| bounded_vector(&mut rng, d, 1.0, edge)).collect();
        let thetas: Vec<_> = if case % 4 == 3 {
            // aligned with the arms, the regime where the bound is tightest
            xs.iter().map(|x| x.normalize() * c_norm).collect()
        } else {
            (0..k).map(|_| bounded_vector(&mut rng, d, c_norm, edge)).collect()
        };
        let (lhs, rhs) = f1_sides(&xs, &thetas, c_norm);
        report.record(lhs - rhs, || {
            json!({
                "case": case, "k": k, "d": d, "lhs": lhs, "rhs": rhs,
                "xs": xs.iter().map(to_json).collect::<Vec<_>>(),
                "thetas": thetas.iter().map(to_json).collect::<Vec<_>>(),
            })
        });
    }
    let (lhs, rhs) = f1_tightness();
    report.metric("tightness_lhs", lhs);
    report.metric("tightness_rhs", rhs);
    if (lhs - rhs).abs() > 1e-12 || (lhs - 2f64.sqrt()).abs() > 1e-12 {
        report.fail(format!("equality case gave {lhs} vs {rhs}"));
    }
    report.finish()
}
