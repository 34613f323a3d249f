//! Multivariate normal measures, the correlated-coordinate covariance
//! family used by the two-point construction, and KL divergences.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{max_asymmetry, Cholesky};
use crate::rng;

/// Per-entry symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Ordered block dimensions `(d_1, ..., d_M)` partitioning `R^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockStructure {
    dims: Vec<usize>,
}

impl BlockStructure {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Structure("at least one block is required".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Structure(format!("block {} has dimension 0", pos + 1)));
        }
        Ok(Self { dims })
    }

    /// Two-component structure `(d_1, d_2)`.
    pub fn pair(d1: usize, d2: usize) -> Result<Self> {
        Self::new(vec![d1, d2])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Column offset of block `m` (0-based).
    pub fn offset(&self, m: usize) -> usize {
        self.dims[..m].iter().sum()
    }

    /// Column ranges of every block.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.dims
            .iter()
            .map(|&d| {
                let r = start..start + d;
                start += d;
                r
            })
            .collect()
    }

    /// Fails unless there are at least two blocks.
    pub fn require_hsic(&self) -> Result<()> {
        if self.num_blocks() < 2 {
            return Err(Error::Structure(format!(
                "HSIC needs at least 2 blocks, got {}",
                self.num_blocks()
            )));
        }
        Ok(())
    }

    /// Block-diagonal restriction of `cov`: off-block entries set to zero.
    pub fn block_diagonal(&self, cov: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(cov.nrows(), cov.ncols());
        for r in self.ranges() {
            for i in r.clone() {
                for j in r.clone() {
                    out[(i, j)] = cov[(i, j)];
                }
            }
        }
        out
    }
}

impl TryFrom<Vec<usize>> for BlockStructure {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<BlockStructure> for Vec<usize> {
    fn from(b: BlockStructure) -> Self {
        b.dims
    }
}

impl std::fmt::Display for BlockStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// `N(mean, cov)` on `R^d` with a validated positive-definite covariance.
#[derive(Debug, Clone)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        ensure_dim(d, cov.nrows())?;
        ensure_dim(d, cov.ncols())?;
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite mean or covariance entry".into()));
        }
        let asym = max_asymmetry(&cov);
        if asym > SYMMETRY_TOL {
            return Err(Error::Domain(format!(
                "covariance is not symmetric (max |a_ij - a_ji| = {asym:e})"
            )));
        }
        let chol = Cholesky::new(&cov)?;
        Ok(Self { mean, cov, chol })
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Result<Self> {
        Self::new(DVector::zeros(d), DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// Same covariance, different mean.
    pub fn with_mean(&self, mean: DVector<f64>) -> Result<Self> {
        ensure_dim(self.dim(), mean.len())?;
        Ok(Self {
            mean,
            cov: self.cov.clone(),
            chol: self.chol.clone(),
        })
    }

    /// `n` i.i.d. draws as the rows of an `n × d` matrix; pure in `(self, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        self.sample_with(n, &mut rng::stream(seed, "gaussian.sample", 0))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let d = self.dim();
        let l = self.chol.factor();
        let mut out = DMatrix::zeros(n, d);
        let mut z = vec![0.0; d];
        for row in 0..n {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            for i in 0..d {
                let mut v = self.mean[i];
                for (k, zk) in z.iter().enumerate().take(i + 1) {
                    v += l[(i, k)] * zk;
                }
                out[(row, i)] = v;
            }
        }
        Ok(out)
    }

    /// Characteristic function `exp(i⟨μ,ω⟩ − ½⟨ω,Σω⟩)`.
    pub fn char_fn(&self, omega: &[f64]) -> Result<Complex64> {
        ensure_dim(self.dim(), omega.len())?;
        Ok(self.char_fn_unchecked(omega))
    }

    pub(crate) fn char_fn_unchecked(&self, omega: &[f64]) -> Complex64 {
        let d = self.dim();
        let mut phase = 0.0;
        let mut quad = 0.0;
        for i in 0..d {
            phase += self.mean[i] * omega[i];
            let row: f64 = omega.iter().enumerate().map(|(j, w)| self.cov[(i, j)] * w).sum();
            quad += omega[i] * row;
        }
        Complex64::from_polar((-0.5 * quad).exp(), phase)
    }
}

impl PartialEq for GaussianMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

/// `Σ(i, i+1, ρ)` with `i = d_1`: the identity with the pair of coordinates
/// straddling the first block boundary correlated at `rho`.
pub fn make_adversarial_cov(block: &BlockStructure, rho: f64) -> Result<DMatrix<f64>> {
    block.require_hsic()?;
    make_adversarial_cov_at(block, block.dims()[0], rho)
}

/// `Σ(i, i+1, ρ)` for an explicit 1-based coordinate `i ∈ [1, d-1]`.
pub fn make_adversarial_cov_at(block: &BlockStructure, i: usize, rho: f64) -> Result<DMatrix<f64>> {
    block.require_hsic()?;
    let d = block.total_dim();
    if i == 0 || i >= d {
        return Err(Error::InvalidArgument(format!(
            "coordinate index {i} outside [1, {}]",
            d - 1
        )));
    }
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "|rho| = {} must be < 1 for a positive-definite covariance",
            rho.abs()
        )));
    }
    let mut cov = DMatrix::identity(d, d);
    cov[(i - 1, i)] = rho;
    cov[(i, i - 1)] = rho;
    Ok(cov)
}

/// Clamp tiny negative round-off to zero.
pub(crate) fn clamp_nonneg(v: f64) -> f64 {
    if v < 0.0 && v > -1e-12 {
        0.0
    } else {
        v
    }
}

/// `KL(g1 ‖ g0)` between multivariate normals.
pub fn kl_gaussians(g1: &GaussianMeasure, g0: &GaussianMeasure) -> Result<f64> {
    ensure_dim(g0.dim(), g1.dim())?;
    let d = g0.dim() as f64;
    let c0 = g0.cholesky();
    let trace = c0.trace_inv_times(g1.cholesky());
    let diff = g0.mean() - g1.mean();
    let maha = c0.quad_inv(&diff);
    let log_ratio = c0.log_det() - g1.cholesky().log_det();
    Ok(clamp_nonneg(0.5 * (trace + maha - d + log_ratio)))
}

fn check_rho_unit(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rho = {rho} must lie in (0, 1)")));
    }
    Ok(())
}

/// KL between the `n`-fold products of the two-point pair:
/// `1/(2n) + (n/2) ln(1/(1−ρ²))`.
///
/// The block structure only fixes where the correlation sits; the value
/// does not depend on it.
pub fn kl_adversarial_exact(n: usize, rho: f64, block: &BlockStructure) -> Result<f64> {
    block.require_hsic()?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n = {n} must be at least 2")));
    }
    check_rho_unit(rho)?;
    let nf = n as f64;
    Ok(1.0 / (2.0 * nf) - 0.5 * nf * (-rho * rho).ln_1p())
}

/// Upper bound `1/(2n) + (n/2) ρ²/(1−ρ²)` from `ln x ≤ x − 1`.
pub fn kl_adversarial_bound(n: usize, rho: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n = {n} must be at least 2")));
    }
    check_rho_unit(rho)?;
    let nf = n as f64;
    let r2 = rho * rho;
    Ok(1.0 / (2.0 * nf) + 0.5 * nf * r2 / (1.0 - r2))
}

/// Two-point family: `p0 = N(0, I)` and `p1 = N((1/(√d n))·1, Σ(d_1, d_1+1, ρ))`.
#[derive(Debug, Clone)]
pub struct AdversarialPair {
    pub p0: GaussianMeasure,
    pub p1: GaussianMeasure,
    pub n: usize,
    pub rho: f64,
    pub gamma: f64,
    pub block: BlockStructure,
}

impl AdversarialPair {
    /// Pair for sample budget `n` with the correlation `ρ_n = n^{-1/2}`.
    pub fn new(n: usize, gamma: f64, block: &BlockStructure) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("n = {n} must be at least 2")));
        }
        Self::with_rho(n, 1.0 / (n as f64).sqrt(), gamma, block)
    }

    pub fn with_rho(n: usize, rho: f64, gamma: f64, block: &BlockStructure) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma = {gamma} must be positive")));
        }
        check_rho_unit(rho)?;
        let d = block.total_dim();
        let p0 = GaussianMeasure::standard(d)?;
        let shift = 1.0 / ((d as f64).sqrt() * n as f64);
        let p1 = GaussianMeasure::new(DVector::from_element(d, shift), make_adversarial_cov(block, rho)?)?;
        Ok(Self {
            p0,
            p1,
            n,
            rho,
            gamma,
            block: block.clone(),
        })
    }
}
