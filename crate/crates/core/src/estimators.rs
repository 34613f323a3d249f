//! Sample-based HSIC and MMD estimators.
//!
//! `hsic_v` and `hsic_u` estimate HSIC², `hsic_nystrom` estimates HSIC
//! itself (the Frobenius norm of a finite-dimensional cross-covariance).
//! The V- and U-statistics only need a handful of Gram sums, which
//! [`GramStats`] accumulates over the upper triangle without storing any
//! `n × n` matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;

use crate::error::{ensure_dim, Error, Result};
use crate::gaussian::{clamp_nonneg, BlockStructure, GaussianMeasure};
use crate::kernels::{KernelSpec, ProductKernel};
use crate::rng;

/// Relative eigenvalue floor for the landmark Gram pseudo-inverse.
pub const NYSTROM_EIGEN_FLOOR: f64 = 1e-10;

/// `n` samples in `R^d` with an attached block structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    block: BlockStructure,
}

impl Dataset {
    pub fn new(values: DMatrix<f64>, block: BlockStructure) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if values.ncols() != block.total_dim() {
            return Err(Error::Structure(format!(
                "block dims sum {} ≠ {} columns",
                block.total_dim(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("dataset contains non-finite values".into()));
        }
        Ok(Self { values, block })
    }

    /// `n` i.i.d. draws from `g`, split by `block`.
    pub fn sample(g: &GaussianMeasure, block: &BlockStructure, n: usize, seed: u64) -> Result<Self> {
        Self::new(g.sample(n, seed)?, block.clone())
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn block(&self) -> &BlockStructure {
        &self.block
    }

    /// Columns of block `m` as an `n × d_m` matrix.
    pub fn block_matrix(&self, m: usize) -> DMatrix<f64> {
        let r = &self.block.ranges()[m];
        self.values.columns(r.start, r.len()).into_owned()
    }

    /// Block `m` as a row-major buffer of length `n · d_m`.
    fn block_rows(&self, m: usize) -> Vec<f64> {
        let r = self.block.ranges()[m].clone();
        let mut out = Vec::with_capacity(self.n() * r.len());
        for i in 0..self.n() {
            for j in r.clone() {
                out.push(self.values[(i, j)]);
            }
        }
        out
    }

    /// Rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        ensure_dim(self.n(), perm.len())?;
        let values = DMatrix::from_fn(self.n(), self.dim(), |i, j| self.values[(perm[i], j)]);
        Self::new(values, self.block.clone())
    }
}

/// Gram sums shared by the V- and U-statistics.
///
/// All kernels here have unit diagonal, so only off-diagonal quantities are
/// stored.
#[derive(Debug, Clone)]
pub struct GramStats {
    n: usize,
    /// `Σ_{j≠i} K_m[i, j]` for each block `m` and row `i`.
    offdiag_row_sums: Vec<Vec<f64>>,
    /// `Σ_{i<j} Π_m K_m[i, j]`.
    upper_product_sum: f64,
}

impl GramStats {
    pub fn compute(pk: &ProductKernel, data: &Dataset) -> Result<Self> {
        pk.check_data(data)?;
        let n = data.n();
        let blocks: Vec<(Vec<f64>, usize, KernelSpec)> = (0..pk.num_blocks())
            .map(|m| (data.block_rows(m), pk.block().dims()[m], pk.specs()[m]))
            .collect();
        let mut sums = vec![vec![0.0; n]; blocks.len()];
        let mut upper = 0.0;
        let mut kij = vec![0.0; blocks.len()];
        for i in 0..n {
            let mut row_acc = 0.0;
            for j in (i + 1)..n {
                let mut prod = 1.0;
                for (m, (buf, dm, spec)) in blocks.iter().enumerate() {
                    let k = spec.eval_unchecked(&buf[i * dm..(i + 1) * dm], &buf[j * dm..(j + 1) * dm]);
                    kij[m] = k;
                    prod *= k;
                }
                for (m, k) in kij.iter().enumerate() {
                    sums[m][i] += k;
                    sums[m][j] += k;
                }
                row_acc += prod;
            }
            upper += row_acc;
        }
        Ok(Self {
            n,
            offdiag_row_sums: sums,
            upper_product_sum: upper,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.offdiag_row_sums.len()
    }

    /// Biased V-statistic of HSIC² for any number of blocks:
    /// `(1/n²)ΣΠK + Π(ΣK/n²) − (2/n)Σ_i Π_m (K_m 1)_i / n`.
    pub fn hsic_v(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "V-statistic requires n ≥ 2, got {}",
                self.n
            )));
        }
        if self.num_blocks() < 2 {
            return Err(Error::Structure("HSIC needs at least 2 blocks".into()));
        }
        let nf = self.n as f64;
        let joint = (nf + 2.0 * self.upper_product_sum) / (nf * nf);
        let marginal: f64 = self
            .offdiag_row_sums
            .iter()
            .map(|s| (nf + s.iter().sum::<f64>()) / (nf * nf))
            .product();
        let mut cross = 0.0;
        for i in 0..self.n {
            cross += self.offdiag_row_sums.iter().map(|s| (s[i] + 1.0) / nf).product::<f64>();
        }
        let v = joint + marginal - 2.0 * cross / nf;
        Ok(clamp_nonneg(v).max(0.0))
    }

    /// Unbiased U-statistic of HSIC² (two blocks only); may be negative.
    pub fn hsic_u(&self) -> Result<f64> {
        if self.num_blocks() != 2 {
            return Err(Error::Structure(format!(
                "U-statistic requires exactly 2 blocks, got {}",
                self.num_blocks()
            )));
        }
        if self.n < 4 {
            return Err(Error::InvalidArgument(format!(
                "U-statistic requires n ≥ 4, got {}",
                self.n
            )));
        }
        let nf = self.n as f64;
        let (k, l) = (&self.offdiag_row_sums[0], &self.offdiag_row_sums[1]);
        let trace = 2.0 * self.upper_product_sum;
        let sk: f64 = k.iter().sum();
        let sl: f64 = l.iter().sum();
        let skl: f64 = k.iter().zip(l).map(|(a, b)| a * b).sum();
        Ok((trace + sk * sl / ((nf - 1.0) * (nf - 2.0)) - 2.0 / (nf - 2.0) * skl) / (nf * (nf - 3.0)))
    }
}

/// Biased V-statistic estimate of HSIC².
pub fn hsic_v(pk: &ProductKernel, data: &Dataset) -> Result<f64> {
    if data.n() < 2 {
        return Err(Error::InvalidArgument(format!(
            "V-statistic requires n ≥ 2, got {}",
            data.n()
        )));
    }
    pk.block().require_hsic()?;
    GramStats::compute(pk, data)?.hsic_v()
}

/// Unbiased U-statistic estimate of HSIC² for two blocks.
pub fn hsic_u(pk: &ProductKernel, data: &Dataset) -> Result<f64> {
    if pk.num_blocks() != 2 {
        return Err(Error::Structure(format!(
            "U-statistic requires exactly 2 blocks, got {}",
            pk.num_blocks()
        )));
    }
    if data.n() < 4 {
        return Err(Error::InvalidArgument(format!(
            "U-statistic requires n ≥ 4, got {}",
            data.n()
        )));
    }
    GramStats::compute(pk, data)?.hsic_u()
}

/// Empirical centered cross-covariance in Nyström feature coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovEstimate {
    pub dims: (usize, usize),
    pub matrix: DMatrix<f64>,
}

impl CrossCovEstimate {
    pub fn frobenius(&self) -> f64 {
        self.matrix.norm()
    }

    /// Frobenius distance to another estimate built on the same landmarks.
    pub fn distance(&self, other: &CrossCovEstimate) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Structure(format!(
                "feature dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok((&self.matrix - &other.matrix).norm())
    }
}

/// Landmark points and the symmetric `W^{-1/2}` map of each block.
#[derive(Debug, Clone)]
pub struct NystromEmbedding {
    kernel: ProductKernel,
    landmarks: Vec<DMatrix<f64>>,
    whiten: Vec<DMatrix<f64>>,
}

fn inverse_sqrt(w: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w);
    let top = eig.eigenvalues.max();
    let floor = NYSTROM_EIGEN_FLOOR * top;
    let mut scaled = eig.eigenvectors.clone();
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = if lambda > floor { lambda.sqrt().recip() } else { 0.0 };
        scaled.column_mut(c).scale_mut(s);
    }
    scaled * eig.eigenvectors.transpose()
}

impl NystromEmbedding {
    /// Two-block embedding with `landmarks` rows of `data` drawn uniformly
    /// without replacement.
    pub fn fit(pk: &ProductKernel, data: &Dataset, landmarks: usize, seed: u64) -> Result<Self> {
        if landmarks < 2 || landmarks > data.n() {
            return Err(Error::InvalidArgument(format!(
                "landmark count {landmarks} must lie in [2, n = {}]",
                data.n()
            )));
        }
        let mut rng = rng::stream(seed, "estimators.nystrom.landmarks", 0);
        let rows = index::sample(&mut rng, data.n(), landmarks).into_vec();
        Self::from_rows(pk, data, &rows)
    }

    /// Embedding whose landmarks are the given rows of `data`.
    pub fn from_rows(pk: &ProductKernel, data: &Dataset, rows: &[usize]) -> Result<Self> {
        pk.check_data(data)?;
        if pk.num_blocks() != 2 {
            return Err(Error::Structure(format!(
                "Nyström HSIC requires exactly 2 blocks, got {}",
                pk.num_blocks()
            )));
        }
        if rows.len() < 2 {
            return Err(Error::InvalidArgument("at least 2 landmarks are required".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= data.n()) {
            return Err(Error::InvalidArgument(format!("landmark row {bad} out of range")));
        }
        let mut landmarks = Vec::new();
        let mut whiten = Vec::new();
        for (m, spec) in pk.specs().iter().enumerate() {
            let block = data.block_matrix(m);
            let pts = DMatrix::from_fn(rows.len(), block.ncols(), |i, j| block[(rows[i], j)]);
            let w = crate::kernels::gram(spec, &pts, &pts)?;
            whiten.push(inverse_sqrt(w));
            landmarks.push(pts);
        }
        Ok(Self {
            kernel: pk.clone(),
            landmarks,
            whiten,
        })
    }

    pub fn num_landmarks(&self) -> usize {
        self.landmarks[0].nrows()
    }

    /// `n × ℓ` matrix whose rows are `φ̂_m(x_i)ᵀ = (W_m^{-1/2} k_m(L_m, x_i))ᵀ`.
    pub fn features(&self, data: &Dataset, m: usize) -> Result<DMatrix<f64>> {
        self.kernel.check_data(data)?;
        let k = crate::kernels::gram(&self.kernel.specs()[m], &data.block_matrix(m), &self.landmarks[m])?;
        Ok(k * &self.whiten[m])
    }

    /// `(1/n) Σ φ̂₁(x_i) φ̂₂(x_i)ᵀ − φ̄₁ φ̄₂ᵀ`.
    pub fn cross_cov(&self, data: &Dataset) -> Result<CrossCovEstimate> {
        let mut f1 = self.features(data, 0)?;
        let mut f2 = self.features(data, 1)?;
        let n = data.n() as f64;
        for f in [&mut f1, &mut f2] {
            for mut col in f.column_iter_mut() {
                let mean = col.sum() / n;
                col.add_scalar_mut(-mean);
            }
        }
        let matrix = f1.transpose() * f2 / n;
        Ok(CrossCovEstimate {
            dims: (matrix.nrows(), matrix.ncols()),
            matrix,
        })
    }
}

/// Nyström estimate of HSIC (not HSIC²) with `landmarks` uniformly chosen
/// landmark rows; returns the norm and the cross-covariance it came from.
pub fn hsic_nystrom(
    pk: &ProductKernel,
    data: &Dataset,
    landmarks: usize,
    seed: u64,
) -> Result<(f64, CrossCovEstimate)> {
    if pk.num_blocks() != 2 {
        return Err(Error::Structure(format!(
            "Nyström HSIC requires exactly 2 blocks, got {}",
            pk.num_blocks()
        )));
    }
    let emb = NystromEmbedding::fit(pk, data, landmarks, seed)?;
    let cc = emb.cross_cov(data)?;
    Ok((cc.frobenius(), cc))
}

/// Biased V-statistic estimate of MMD² between the rows of `x` and `y`.
pub fn mmd_v(spec: &KernelSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    ensure_dim(x.ncols(), y.ncols())?;
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::Data("empty sample".into()));
    }
    let rows =
        |m: &DMatrix<f64>| -> Vec<Vec<f64>> { (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect() };
    let xr = rows(x);
    let yr = rows(y);
    let mean_gram = |a: &[Vec<f64>], b: &[Vec<f64>]| -> f64 {
        let mut total = 0.0;
        for p in a {
            let mut row = 0.0;
            for q in b {
                row += spec.eval_unchecked(p, q);
            }
            total += row;
        }
        total / (a.len() * b.len()) as f64
    };
    let v = mean_gram(&xr, &xr) + mean_gram(&yr, &yr) - 2.0 * mean_gram(&xr, &yr);
    Ok(clamp_nonneg(v).max(0.0))
}
