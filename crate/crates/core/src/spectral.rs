//! Characteristic-function form of MMD and the Monte Carlo gap constant
//! for translation-invariant kernels.
//!
//! For a normalized translation-invariant kernel with spectral probability
//! measure `Λ`, `MMD²(P, Q) = E_{ω∼Λ} |ψ_P(ω) − ψ_Q(ω)|²`, so sampling
//! frequencies gives an unbiased estimate with a standard error.

use serde::{Deserialize, Serialize};

use crate::analytic::adversarial_hsic2;
use crate::error::{ensure_dim, Error, Result};
use crate::gaussian::{BlockStructure, GaussianMeasure};
use crate::kernels::{KernelSpec, ProductKernel};
use crate::rng;

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub samples: usize,
}

impl McEstimate {
    fn from_sums(sum: f64, sum_sq: f64, count: usize) -> Self {
        let n = count as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Self {
            estimate: mean,
            standard_error: (var / n).sqrt(),
            samples: count,
        }
    }

    /// `|estimate − target| ≤ k · SE`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.estimate - target).abs() <= k * self.standard_error
    }
}

fn check_count(count: usize) -> Result<()> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo sample count {count} must be at least 2"
        )));
    }
    Ok(())
}

/// `MMD²(g1, g2)` for a product kernel via sampled frequencies.
pub fn mmd2_spectral_product(
    g1: &GaussianMeasure,
    g2: &GaussianMeasure,
    pk: &ProductKernel,
    count: usize,
    seed: u64,
) -> Result<McEstimate> {
    ensure_dim(g1.dim(), g2.dim())?;
    ensure_dim(pk.block().total_dim(), g1.dim())?;
    check_count(count)?;
    let mut rng = rng::stream(seed, "spectral.mmd2", 0);
    let mut w = vec![0.0; g1.dim()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..count {
        pk.draw_frequency(&mut rng, &mut w);
        let v = (g1.char_fn_unchecked(&w) - g2.char_fn_unchecked(&w)).norm_sqr();
        sum += v;
        sum_sq += v * v;
    }
    Ok(McEstimate::from_sums(sum, sum_sq, count))
}

/// `MMD²(g1, g2)` for a single kernel on all of `R^d`.
pub fn mmd2_spectral(
    g1: &GaussianMeasure,
    g2: &GaussianMeasure,
    spec: &KernelSpec,
    count: usize,
    seed: u64,
) -> Result<McEstimate> {
    ensure_dim(g1.dim(), g2.dim())?;
    let block = BlockStructure::new(vec![g1.dim()])?;
    mmd2_spectral_product(g1, g2, &ProductKernel::uniform(block, *spec), count, seed)
}

/// HSIC² of `g` under a product kernel: spectral MMD² between `g` and the
/// product of its block marginals. Works for kernels without a closed form.
pub fn hsic2_spectral(g: &GaussianMeasure, pk: &ProductKernel, count: usize, seed: u64) -> Result<McEstimate> {
    pk.block().require_hsic()?;
    ensure_dim(pk.block().total_dim(), g.dim())?;
    let product = GaussianMeasure::new(g.mean().clone(), pk.block().block_diagonal(g.cov()))?;
    mmd2_spectral_product(g, &product, pk, count, seed)
}

/// `h'_ω(c) = −ω_i ω_j exp(−½(ωᵀω + 2c ω_i ω_j))` with `(i, j)` the
/// 0-based monitored pair.
pub fn gap_derivative(omega: &[f64], i: usize, j: usize, c: f64) -> f64 {
    let cross = omega[i] * omega[j];
    let sq: f64 = omega.iter().map(|v| v * v).sum();
    -cross * (-0.5 * (sq + 2.0 * c * cross)).exp()
}

/// Monte Carlo estimate of `∫_A [h'_ω(0)]² dΛ(ω)`, the squared gap constant,
/// with `A = {ω : ω_{d₁} ω_{d₁+1} < 0}`.
pub fn gap_constant_partii(spec: &KernelSpec, block: &BlockStructure, count: usize, seed: u64) -> Result<McEstimate> {
    block.require_hsic()?;
    let d1 = block.dims()[0];
    gap_constant_at(spec, block.total_dim(), d1 - 1, d1, count, seed)
}

/// [`gap_constant_partii`] for an explicit 0-based coordinate pair.
pub fn gap_constant_at(spec: &KernelSpec, d: usize, i: usize, j: usize, count: usize, seed: u64) -> Result<McEstimate> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension d = {d} must be at least 2")));
    }
    if i >= d || j >= d || i == j {
        return Err(Error::InvalidArgument(format!(
            "coordinate pair ({i}, {j}) invalid for d = {d}"
        )));
    }
    check_count(count)?;
    let mut rng = rng::stream(seed, "spectral.gap_constant", 0);
    let mut w = vec![0.0; d];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..count {
        spec.draw_frequency(&mut rng, &mut w);
        if w[i] * w[j] < 0.0 {
            let v = gap_derivative(&w, i, j, 0.0).powi(2);
            sum += v;
            sum_sq += v * v;
        }
    }
    Ok(McEstimate::from_sums(sum, sum_sq, count))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub n: usize,
    pub rho: f64,
    /// Closed-form HSIC² of the correlated member.
    pub hsic2: f64,
    /// `ρ² (estimate − 4·SE)`.
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub constant: McEstimate,
    pub records: Vec<GapRecord>,
}

impl GapReport {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }
}

/// Check `HSIC²(p1) ≥ ρ_n² ((2c)² − 4·SE)` on a grid of sample sizes for the
/// Gaussian kernel with bandwidth `gamma`.
pub fn verify_gap_partii(
    gamma: f64,
    block: &BlockStructure,
    n_grid: &[usize],
    count: usize,
    seed: u64,
) -> Result<GapReport> {
    let spec = KernelSpec::gaussian(gamma)?;
    if let Some(&bad) = n_grid.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidArgument(format!(
            "grid entry n = {bad} must be at least 2"
        )));
    }
    let constant = gap_constant_partii(&spec, block, count, seed)?;
    let lower = constant.estimate - 4.0 * constant.standard_error;
    let d = block.total_dim();
    let mut records = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let rho = 1.0 / (n as f64).sqrt();
        let hsic2 = adversarial_hsic2(rho, gamma, d)?.value;
        let bound = rho * rho * lower;
        let margin = hsic2 - bound;
        records.push(GapRecord {
            n,
            rho,
            hsic2,
            bound,
            margin,
            pass: margin >= 0.0,
        });
    }
    Ok(GapReport { constant, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::mmd2_gaussian;
    use crate::gaussian::make_adversarial_cov;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn std1(mean: f64) -> GaussianMeasure {
        GaussianMeasure::new(DVector::from_vec(vec![mean]), DMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn identical_measures_give_zero() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let e = mmd2_spectral(&std1(0.4), &std1(0.4), &spec, 100, 1).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert_eq!(e.standard_error, 0.0);
    }

    #[test]
    fn matches_closed_form_mean_shift() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let e = mmd2_spectral(&std1(0.0), &std1(1.0), &spec, 100_000, 3).unwrap();
        assert!(e.within(0.177_267_634_919_861_94, 4.0), "{e:?}");
    }

    #[test]
    fn matches_closed_form_correlation() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let block = BlockStructure::pair(1, 1).unwrap();
        let g0 = GaussianMeasure::standard(2).unwrap();
        let g1 = GaussianMeasure::new(DVector::zeros(2), make_adversarial_cov(&block, 0.5).unwrap()).unwrap();
        let e = mmd2_spectral(&g0, &g1, &spec, 100_000, 4).unwrap();
        assert!(e.within(mmd2_gaussian(&g0, &g1, 1.0).unwrap(), 4.0), "{e:?}");
    }

    #[test]
    fn hsic2_spectral_matches_lemma() {
        let block = BlockStructure::pair(1, 1).unwrap();
        let pk = ProductKernel::uniform(block.clone(), KernelSpec::gaussian(1.0).unwrap());
        let g = GaussianMeasure::new(DVector::zeros(2), make_adversarial_cov(&block, 0.6).unwrap()).unwrap();
        let e = hsic2_spectral(&g, &pk, 200_000, 5).unwrap();
        assert!(e.within(0.016_615_999_620_215_65, 4.0), "{e:?}");
    }

    #[test]
    fn gap_constant_gaussian_unit() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let e = gap_constant_partii(&spec, &BlockStructure::pair(1, 1).unwrap(), 1_000_000, 6).unwrap();
        assert!(e.within(1.0 / 54.0, 4.0), "{e:?}");
        assert!(e.estimate > 0.0);
    }

    #[test]
    fn gap_constant_positive_for_laplace() {
        let spec = KernelSpec::laplace(1.0).unwrap();
        let e = gap_constant_partii(&spec, &BlockStructure::pair(1, 1).unwrap(), 50_000, 7).unwrap();
        assert!(e.estimate > 0.0);
    }

    #[test]
    fn gap_constant_symmetric_in_monitored_pair() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        // same draws, the two coordinates swapped: the integrand is symmetric
        let a = gap_constant_at(&spec, 3, 1, 2, 10_000, 8).unwrap();
        let b = gap_constant_at(&spec, 3, 2, 1, 10_000, 8).unwrap();
        assert_eq!(a, b);
        // a different coordinate pair is a different estimate of the same quantity
        let c = gap_constant_at(&spec, 3, 0, 1, 10_000, 8).unwrap();
        let se = (a.standard_error.powi(2) + c.standard_error.powi(2)).sqrt();
        assert!((a.estimate - c.estimate).abs() <= 4.0 * se);
        assert!(gap_constant_at(&spec, 1, 0, 1, 10, 0).is_err());
        assert!(gap_constant_partii(&spec, &BlockStructure::new(vec![2]).unwrap(), 10, 0).is_err());
    }

    #[test]
    fn derivative_increasing_on_a() {
        let mut rng = rng::stream(9, "test.omega", 0);
        let mut checked = 0;
        while checked < 100 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            if w[0] * w[1] >= 0.0 {
                continue;
            }
            let a = gap_derivative(&w, 0, 1, 0.0);
            let b = gap_derivative(&w, 0, 1, 0.5);
            let c = gap_derivative(&w, 0, 1, 1.0);
            assert!(a <= b && b <= c);
            checked += 1;
        }
    }

    #[test]
    fn verify_gap_example() {
        let block = BlockStructure::pair(1, 1).unwrap();
        let report = verify_gap_partii(1.0, &block, &[4], 1_000_000, 10).unwrap();
        let r = report.records[0];
        assert_relative_eq!(r.hsic2, 0.010_763_320_143_793_886, epsilon = 1e-15);
        assert!(r.pass);
        // bound uses the lower 4-SE edge of the constant, so the margin is at least the closed-form one
        assert!(r.margin >= 0.006_133_690_514_164_257 - 4.0 * 0.25 * 4.0 * report.constant.standard_error);
        assert!(verify_gap_partii(1.0, &block, &[1], 100, 0).is_err());
    }

    #[test]
    fn verify_gap_grid() {
        let block = BlockStructure::pair(1, 1).unwrap();
        let grid: Vec<usize> = (2..=12).map(|k| 1usize << k).collect();
        let report = verify_gap_partii(1.0, &block, &grid, 200_000, 11).unwrap();
        assert!(report.all_pass());
        for r in &report.records {
            assert!(r.hsic2 / r.bound >= 1.0);
        }
    }
}
