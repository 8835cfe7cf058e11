//! Confidence-radius constants and the instance-level theory quantities:
//! the deletion threshold `f`, the radius `β`, the arm-regularity constant
//! `λ̃ₓ`, the distinguishable gap `ζ` and the sufficient burn-in times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters shared by every UCB-style policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    pub lambda: f64,
    pub delta: f64,
    pub eps_star: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub dim: usize,
    pub horizon: usize,
}

impl ConfidenceParams {
    /// Defaults: `λ = 1`, `δ = 1/T`, `ε* = 0`, `α₁ = α₂ = 1`.
    pub fn new(dim: usize, horizon: usize) -> Self {
        Self {
            lambda: 1.0,
            delta: 1.0 / horizon.max(2) as f64,
            eps_star: 0.0,
            alpha1: 1.0,
            alpha2: 1.0,
            dim,
            horizon,
        }
    }

    pub fn with_eps_star(mut self, eps_star: f64) -> Self {
        self.eps_star = eps_star;
        self
    }

    pub fn with_alphas(mut self, alpha1: f64, alpha2: f64) -> Self {
        self.alpha1 = alpha1;
        self.alpha2 = alpha2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.eps_star >= 0.0) {
            return Err(Error::Config(format!("eps_star must be >= 0, got {}", self.eps_star)));
        }
        if !(self.alpha1 > 0.0) || !(self.alpha2 >= 0.0) {
            return Err(Error::Config(format!(
                "need alpha1 > 0 and alpha2 >= 0, got {} and {}",
                self.alpha1, self.alpha2
            )));
        }
        if self.dim == 0 {
            return Err(Error::Config("dimension must be >= 1".into()));
        }
        Ok(())
    }

    /// `β` evaluated at the configured horizon.
    pub fn beta(&self) -> f64 {
        beta_radius(self, self.horizon as f64)
    }
}

/// `f(T) = √((1 + ln(1+T)) / (1 + T))`.
pub fn f_threshold(pulls: f64) -> f64 {
    ((1.0 + pulls.ln_1p()) / (1.0 + pulls)).sqrt()
}

/// `β = √λ + √(2 ln(1/δ) + d ln(1 + t/(λd)))`.
pub fn beta_radius(params: &ConfidenceParams, t_eff: f64) -> f64 {
    let lambda = params.lambda;
    let d = params.dim as f64;
    lambda.sqrt() + (2.0 * (1.0 / params.delta).ln() + d * (t_eff / (lambda * d)).ln_1p()).sqrt()
}

/// `ζ = 2ε*√(2/λ̃ₓ)`.
pub fn zeta(eps_star: f64, tilde_lambda: f64) -> f64 {
    2.0 * eps_star * (2.0 / tilde_lambda).sqrt()
}

pub const QUADRATURE_TOL: f64 = 1e-8;
pub const QUADRATURE_MAX_DEPTH: u32 = 40;

/// `λ̃ₓ = ∫₀^{λₓ} (1 − exp(−(λₓ − x)² / 2σ²))^C dx`, by adaptive Simpson.
pub fn tilde_lambda_x(lambda_x: f64, sigma: f64, arm_cap: u32) -> Result<f64> {
    if !(lambda_x > 0.0 && sigma > 0.0 && arm_cap > 0) {
        return Err(Error::Quadrature(format!(
            "inputs must be positive (lambda_x={lambda_x}, sigma={sigma}, C={arm_cap})"
        )));
    }
    let two_var = 2.0 * sigma * sigma;
    let integrand = |x: f64| {
        let gap = lambda_x - x;
        (-(-(gap * gap) / two_var).exp_m1()).powi(arm_cap as i32)
    };
    let value = adaptive_simpson(integrand, 0.0, lambda_x, QUADRATURE_TOL, QUADRATURE_MAX_DEPTH)?;
    if value <= 0.0 {
        return Err(Error::Quadrature(format!(
            "integral underflowed to {value} (lambda_x={lambda_x}, sigma={sigma}, C={arm_cap})"
        )));
    }
    Ok(value.min(lambda_x))
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
///
/// Fails if any subinterval still misses its share of the tolerance after
/// `max_depth` bisections.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64> {
    struct Seg {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let mut stack = vec![Seg {
        a,
        b,
        fa,
        fm,
        fb,
        whole: simpson(a, b, fa, fm, fb),
        tol,
        depth: 0,
    }];
    let mut total = 0.0;
    while let Some(seg) = stack.pop() {
        let m = 0.5 * (seg.a + seg.b);
        let lm = 0.5 * (seg.a + m);
        let rm = 0.5 * (m + seg.b);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(seg.a, m, seg.fa, flm, seg.fm);
        let right = simpson(m, seg.b, seg.fm, frm, seg.fb);
        let diff = left + right - seg.whole;
        // The first level always refines once so a coarse 3-point sample
        // cannot hide a narrow feature.
        if seg.depth > 0 && diff.abs() <= 15.0 * seg.tol {
            total += left + right + diff / 15.0;
            continue;
        }
        if seg.depth >= max_depth {
            return Err(Error::Quadrature(format!(
                "tolerance {tol} not met on [{}, {}] after {max_depth} refinements",
                seg.a, seg.b
            )));
        }
        let depth = seg.depth + 1;
        let half_tol = 0.5 * seg.tol;
        stack.push(Seg { a: m, b: seg.b, fa: seg.fm, fm: frm, fb: seg.fb, whole: right, tol: half_tol, depth });
        stack.push(Seg { a: seg.a, b: m, fa: seg.fa, fm: flm, fb: seg.fm, whole: left, tol: half_tol, depth });
    }
    Ok(total)
}

/// Sufficient burn-in times for the graph-based (`t0`) and set-based (`t1`)
/// clustering policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SufficientTime {
    pub t0: f64,
    /// `None` when `γ₁/6` does not clear the misspecification term.
    pub t1: Option<f64>,
}

/// Burn-in time after which the graph policy keeps a good partition w.h.p.
///
/// `T₀ = 16u ln(u/δ) + 4u max{8d ln(u/δ) / (λ̃ (γ₁/4 − ε*√(1/2λ̃))²), 16/λ̃² ln(8d/(λ̃²δ))}`,
/// and `T₁` is the same expression with `γ₁/6`.
pub fn sufficient_time(
    users: usize,
    dim: usize,
    tilde_lambda: f64,
    gamma1: f64,
    eps_star: f64,
    delta: f64,
) -> Result<SufficientTime> {
    let u = users as f64;
    let d = dim as f64;
    let slack = eps_star * (1.0 / (2.0 * tilde_lambda)).sqrt();
    let log_u = (u / delta).ln();
    let eig_term = 16.0 / (tilde_lambda * tilde_lambda) * (8.0 * d / (tilde_lambda * tilde_lambda * delta)).ln();
    let eval = |divisor: f64| {
        let margin = gamma1 / divisor - slack;
        let gap_term = 8.0 * d / (tilde_lambda * margin * margin) * log_u;
        16.0 * u * log_u + 4.0 * u * gap_term.max(eig_term)
    };
    if !(gamma1 / 4.0 > slack) {
        return Err(Error::NotSeparable {
            divisor: 4,
            lhs: gamma1 / 4.0,
            rhs: slack,
        });
    }
    let t1 = (gamma1 / 6.0 > slack).then(|| eval(6.0));
    Ok(SufficientTime { t0: eval(4.0), t1 })
}
