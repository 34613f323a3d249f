//! Closed forms for Gaussian measures under Gaussian kernels
//! `k(x, y) = exp(-γ/2 ‖x − y‖²)`.
//!
//! Every determinant is evaluated as a log-determinant and exponentiated
//! once, so `(2γ+1)^d` never has to be formed directly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::gaussian::{BlockStructure, GaussianMeasure};
use crate::linalg::Cholesky;

/// `HSIC² = term_i + term_ii − 2·term_iii`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hsic2Decomposition {
    /// `⟨μ(P), μ(P)⟩` for the joint measure.
    pub term_i: f64,
    /// `⟨μ(Q), μ(Q)⟩` for the product of marginals.
    pub term_ii: f64,
    /// `⟨μ(P), μ(Q)⟩`.
    pub term_iii: f64,
    pub value: f64,
}

impl Hsic2Decomposition {
    fn from_terms(term_i: f64, term_ii: f64, term_iii: f64) -> Self {
        let raw = term_i + term_ii - 2.0 * term_iii;
        let value = if (-1e-12..0.0).contains(&raw) { 0.0 } else { raw };
        Self {
            term_i,
            term_ii,
            term_iii,
            value,
        }
    }

    /// HSIC itself, `√max(0, value)`.
    pub fn hsic(&self) -> f64 {
        self.value.max(0.0).sqrt()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must be positive")));
    }
    Ok(())
}

/// `ln |a·S₁ + b·S₂ + I|`.
fn log_det_shifted(s1: &DMatrix<f64>, a: f64, s2: &DMatrix<f64>, b: f64) -> Result<f64> {
    let d = s1.nrows();
    let m = s1 * a + s2 * b + DMatrix::<f64>::identity(d, d);
    Ok(Cholesky::new(&m)?.log_det())
}

/// `⟨μ_k(N(m₁,Σ₁)), μ_k(N(m₂,Σ₂))⟩ =
/// exp(−½ δᵀ(Σ₁+Σ₂+γ⁻¹I)⁻¹δ) / |γΣ₁+γΣ₂+I|^{1/2}` with `δ = m₁ − m₂`.
pub fn embedding_inner(g1: &GaussianMeasure, g2: &GaussianMeasure, gamma: f64) -> Result<f64> {
    ensure_dim(g1.dim(), g2.dim())?;
    check_gamma(gamma)?;
    let d = g1.dim();
    let a = g1.cov() + g2.cov() + DMatrix::<f64>::identity(d, d) / gamma;
    let chol = Cholesky::new(&a)?;
    let delta = g1.mean() - g2.mean();
    // |γA| = |γΣ₁ + γΣ₂ + I|
    let log_det = d as f64 * gamma.ln() + chol.log_det();
    Ok((-0.5 * chol.quad_inv(&delta) - 0.5 * log_det).exp())
}

pub fn mmd2_gaussian(g1: &GaussianMeasure, g2: &GaussianMeasure, gamma: f64) -> Result<f64> {
    let pp = embedding_inner(g1, g1, gamma)?;
    let qq = embedding_inner(g2, g2, gamma)?;
    let pq = embedding_inner(g1, g2, gamma)?;
    let v = pp + qq - 2.0 * pq;
    Ok(if (-1e-12..0.0).contains(&v) { 0.0 } else { v })
}

/// HSIC² of `g` under the Gaussian product kernel with a common bandwidth,
/// as the squared MMD between `g` and the product of its block marginals.
pub fn hsic2_gaussian(g: &GaussianMeasure, block: &BlockStructure, gamma: f64) -> Result<Hsic2Decomposition> {
    block.require_hsic()?;
    ensure_dim(block.total_dim(), g.dim())?;
    check_gamma(gamma)?;
    let joint = g.cov();
    let product = block.block_diagonal(joint);
    let term_i = (-0.5 * log_det_shifted(joint, 2.0 * gamma, joint, 0.0)?).exp();
    let term_ii = (-0.5 * log_det_shifted(&product, 2.0 * gamma, &product, 0.0)?).exp();
    let term_iii = (-0.5 * log_det_shifted(joint, gamma, &product, gamma)?).exp();
    Ok(Hsic2Decomposition::from_terms(term_i, term_ii, term_iii))
}

/// HSIC² of the correlated member of the two-point family in dimension `d`,
/// in the explicit three-term form with `z = 2γ + 1`.
///
/// Accepts `ρ ∈ [0, 1]`; the closed form stays finite at `ρ = 1`
/// (`n = 1` in `ρ = n^{-1/2}`) even though the covariance is singular there.
pub fn adversarial_hsic2(rho: f64, gamma: f64, d: usize) -> Result<Hsic2Decomposition> {
    check_gamma(gamma)?;
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension d = {d} must be at least 2")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho = {rho} must lie in [0, 1]")));
    }
    let z = 2.0 * gamma + 1.0;
    let lz = z.ln();
    let dm2 = (d - 2) as f64;
    let term = |shift: f64| (-0.5 * (dm2 * lz + (z * z - shift).ln())).exp();
    let term_i = term((2.0 * gamma * rho).powi(2));
    let term_ii = (-0.5 * d as f64 * lz).exp();
    let term_iii = term((gamma * rho).powi(2));
    Ok(Hsic2Decomposition::from_terms(term_i, term_ii, term_iii))
}

/// [`adversarial_hsic2`] at `ρ_n = n^{-1/2}`.
pub fn adversarial_hsic2_for_n(n: usize, gamma: f64, d: usize) -> Result<Hsic2Decomposition> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    adversarial_hsic2(1.0 / (n as f64).sqrt(), gamma, d)
}

/// `c = γ / (2 (2γ+1)^{d/4+1})`; the HSIC gap of the two-point pair is at
/// least `2c/√n`.
pub fn theorem_constant(gamma: f64, d: usize) -> f64 {
    let z = 2.0 * gamma + 1.0;
    gamma / (2.0 * (z.ln() * (d as f64 / 4.0 + 1.0)).exp())
}

/// Slope `c* = γ² / ((2γ+1)² √((2γ+1)^d))` that makes [`f_c`] nondecreasing.
/// Equals `(2·theorem_constant)²`.
pub fn optimal_slope(gamma: f64, d: usize) -> f64 {
    let z = 2.0 * gamma + 1.0;
    gamma * gamma * (-(2.0 + d as f64 / 2.0) * z.ln()).exp()
}

/// `f_c(x) = [z^{d−2}(z² − 4γ²x)]^{−1/2} + z^{−d/2} − 2[z^{d−2}(z² − γ²x)]^{−1/2} − c·x`,
/// defined for `0 ≤ x < (1 + 1/(2γ))²`. At `x = ρ²` this is the
/// adversarial HSIC² minus `c·ρ²`.
pub fn f_c(x: f64, gamma: f64, d: usize, c: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let upper = (1.0 + 1.0 / (2.0 * gamma)).powi(2);
    if !(x >= 0.0 && x < upper) {
        return Err(Error::Domain(format!("x = {x} outside [0, {upper})")));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension d = {d} must be at least 2")));
    }
    let z = 2.0 * gamma + 1.0;
    let lz = z.ln();
    let dm2 = (d - 2) as f64;
    let term = |shift: f64| (-0.5 * (dm2 * lz + (z * z - shift).ln())).exp();
    let g2 = gamma * gamma;
    Ok(term(4.0 * g2 * x) + (-0.5 * d as f64 * lz).exp() - 2.0 * term(g2 * x) - c * x)
}

/// Two-point lower bound `max(e^{−α}/4, (1 − √(α/2))/2)`; the second branch
/// only applies for `α < 2`.
pub fn lecam_bound(alpha: f64) -> f64 {
    assert!(alpha > 0.0, "KL budget must be positive, got {alpha}");
    let first = (-alpha).exp() / 4.0;
    if alpha < 2.0 {
        first.max((1.0 - (alpha / 2.0).sqrt()) / 2.0)
    } else {
        first
    }
}
