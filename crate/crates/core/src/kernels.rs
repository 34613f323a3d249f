//! Translation-invariant kernels, Gram matrices, tensor-product kernels over
//! a block structure, and sampling from their spectral measures.
//!
//! Both families are normalized (`k(x, x) = 1`), so each spectral measure is
//! a probability measure with full support on `R^d`:
//!
//! | family   | `k(x, y)`                  | spectral measure                 |
//! |----------|----------------------------|----------------------------------|
//! | Gaussian | `exp(-γ/2 ‖x − y‖₂²)`      | `N(0, γ I)`                      |
//! | Laplace  | `exp(-γ ‖x − y‖₁)`         | i.i.d. Cauchy coordinates, scale γ |

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::estimators::Dataset;
use crate::gaussian::BlockStructure;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelFamily::Gaussian => write!(f, "gaussian"),
            KernelFamily::Laplace => write!(f, "laplace"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub gamma: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel bandwidth gamma = {gamma} must be positive"
            )));
        }
        Ok(Self { family, gamma })
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, gamma)
    }

    pub fn laplace(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Laplace, gamma)
    }

    /// Kernel value on equal-length slices; lengths are not checked.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-0.5 * self.gamma * sq).exp()
            }
            KernelFamily::Laplace => {
                let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-self.gamma * l1).exp()
            }
        }
    }

    /// Kernel as a function of the lag `x − y`.
    #[inline]
    pub fn eval_lag(&self, lag: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-0.5 * self.gamma * lag.iter().map(|v| v * v).sum::<f64>()).exp(),
            KernelFamily::Laplace => (-self.gamma * lag.iter().map(|v| v.abs()).sum::<f64>()).exp(),
        }
    }

    /// One frequency vector from the spectral measure, written into `out`.
    pub fn draw_frequency<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.family {
            KernelFamily::Gaussian => {
                let scale = self.gamma.sqrt();
                for w in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *w = scale * z;
                }
            }
            KernelFamily::Laplace => {
                let cauchy = Cauchy::new(0.0, self.gamma).expect("gamma validated positive");
                for w in out.iter_mut() {
                    *w = cauchy.sample(rng);
                }
            }
        }
    }
}

pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    ensure_dim(x.len(), y.len())?;
    Ok(spec.eval_unchecked(x, y))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

/// Dense Gram matrix between the rows of `x` and the rows of `y`.
pub fn gram(spec: &KernelSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_dim(x.ncols(), y.ncols())?;
    let xr = rows(x);
    let yr = rows(y);
    Ok(DMatrix::from_fn(x.nrows(), y.nrows(), |i, j| {
        spec.eval_unchecked(&xr[i], &yr[j])
    }))
}

/// Tensor product `k = ⊗ k_m` over the blocks of a [`BlockStructure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductKernel {
    block: BlockStructure,
    specs: Vec<KernelSpec>,
}

impl ProductKernel {
    pub fn new(block: BlockStructure, specs: Vec<KernelSpec>) -> Result<Self> {
        if specs.len() != block.num_blocks() {
            return Err(Error::Structure(format!(
                "{} kernel specs for {} blocks",
                specs.len(),
                block.num_blocks()
            )));
        }
        Ok(Self { block, specs })
    }

    /// The same kernel on every block.
    pub fn uniform(block: BlockStructure, spec: KernelSpec) -> Self {
        let specs = vec![spec; block.num_blocks()];
        Self { block, specs }
    }

    pub fn block(&self) -> &BlockStructure {
        &self.block
    }

    pub fn specs(&self) -> &[KernelSpec] {
        &self.specs
    }

    pub fn num_blocks(&self) -> usize {
        self.specs.len()
    }

    /// Product kernel evaluated on full concatenated coordinates.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        ensure_dim(self.block.total_dim(), x.len())?;
        ensure_dim(self.block.total_dim(), y.len())?;
        Ok(self
            .block
            .ranges()
            .into_iter()
            .zip(&self.specs)
            .map(|(r, s)| s.eval_unchecked(&x[r.clone()], &y[r]))
            .product())
    }

    pub(crate) fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.block() != &self.block {
            return Err(Error::Structure(format!(
                "dataset blocks ({}) differ from kernel blocks ({})",
                data.block(),
                self.block
            )));
        }
        Ok(())
    }

    /// One frequency vector of the product spectral measure (independent per block).
    pub fn draw_frequency<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (r, s) in self.block.ranges().into_iter().zip(&self.specs) {
            s.draw_frequency(rng, &mut out[r]);
        }
    }
}

/// Per-block Gram matrices and their entrywise product.
#[derive(Debug, Clone)]
pub struct ProductGram {
    pub blocks: Vec<DMatrix<f64>>,
    pub product: DMatrix<f64>,
}

pub fn product_gram(pk: &ProductKernel, data: &Dataset) -> Result<ProductGram> {
    pk.check_data(data)?;
    let n = data.n();
    let mut product = DMatrix::from_element(n, n, 1.0);
    let mut blocks = Vec::with_capacity(pk.num_blocks());
    for (m, spec) in pk.specs().iter().enumerate() {
        let x = data.block_matrix(m);
        let g = gram(spec, &x, &x)?;
        product.component_mul_assign(&g);
        blocks.push(g);
    }
    Ok(ProductGram { blocks, product })
}

/// `count × dim` matrix of i.i.d. draws from the spectral measure of `spec`.
pub fn spectral_sample(spec: &KernelSpec, dim: usize, count: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, "kernels.spectral_sample", 0);
    let mut out = DMatrix::zeros(count, dim);
    let mut w = vec![0.0; dim];
    for i in 0..count {
        spec.draw_frequency(&mut rng, &mut w);
        for (j, v) in w.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    #[test]
    fn kernel_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(eval_kernel(&g, &[0.3, 0.4], &[0.3, 0.4]).unwrap(), 1.0);
        assert_relative_eq!(
            eval_kernel(&g, &[0.0], &[1.0]).unwrap(),
            0.606_530_659_712_633_4,
            epsilon = 1e-15
        );
        let l = KernelSpec::laplace(2.0).unwrap();
        assert_relative_eq!(
            eval_kernel(&l, &[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            (-4f64).exp(),
            epsilon = 1e-15
        );
        assert!(eval_kernel(&g, &[0.0], &[1.0, 2.0]).is_err());
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::laplace(-1.0).is_err());
    }

    #[test]
    fn gram_examples() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let x = DMatrix::from_row_slice(1, 2, &[0.1, 0.2]);
        assert_eq!(gram(&spec, &x, &x).unwrap(), DMatrix::from_element(1, 1, 1.0));
        let y = DMatrix::from_row_slice(1, 2, &[0.5, -0.2]);
        let g = gram(&spec, &x, &y).unwrap();
        assert_eq!(g[(0, 0)], eval_kernel(&spec, &[0.1, 0.2], &[0.5, -0.2]).unwrap());

        let x3 = DMatrix::from_row_slice(3, 1, &[0.0, 0.7, 2.0]);
        let g = gram(&spec, &x3, &x3).unwrap();
        assert_eq!(g, g.transpose());
        let eig = SymmetricEigen::new(g).eigenvalues;
        assert!(eig.iter().all(|&v| v >= -1e-10));
        assert!(gram(&spec, &x3, &x).is_err());
    }

    #[test]
    fn product_gram_examples() {
        let block = BlockStructure::pair(1, 1).unwrap();
        let pk = ProductKernel::uniform(block.clone(), KernelSpec::gaussian(1.0).unwrap());
        let data = Dataset::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 2.0]), block.clone()).unwrap();
        let pg = product_gram(&pk, &data).unwrap();
        let want = (-0.5f64).exp() * (-2.0f64).exp();
        assert_relative_eq!(pg.product[(0, 1)], want, epsilon = 1e-15);
        assert_eq!(pg.product[(0, 0)], 1.0);

        // constant second block => product equals the first block's Gram
        let data = Dataset::new(
            DMatrix::from_row_slice(3, 2, &[0.0, 5.0, 1.0, 5.0, -0.4, 5.0]),
            block.clone(),
        )
        .unwrap();
        let pg = product_gram(&pk, &data).unwrap();
        assert_eq!(pg.blocks[1], DMatrix::from_element(3, 3, 1.0));
        assert_eq!(pg.product, pg.blocks[0]);

        let other = Dataset::new(DMatrix::zeros(2, 3), BlockStructure::pair(2, 1).unwrap()).unwrap();
        assert!(product_gram(&pk, &other).is_err());
        assert!(ProductKernel::new(block, vec![KernelSpec::gaussian(1.0).unwrap()]).is_err());
    }

    #[test]
    fn product_gram_matches_tensor_eval() {
        let block = BlockStructure::new(vec![2, 1, 1]).unwrap();
        let pk = ProductKernel::new(
            block.clone(),
            vec![
                KernelSpec::gaussian(0.7).unwrap(),
                KernelSpec::laplace(1.3).unwrap(),
                KernelSpec::gaussian(2.0).unwrap(),
            ],
        )
        .unwrap();
        let x = crate::gaussian::GaussianMeasure::standard(4)
            .unwrap()
            .sample(12, 3)
            .unwrap();
        let data = Dataset::new(x.clone(), block).unwrap();
        let pg = product_gram(&pk, &data).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let xi: Vec<f64> = x.row(i).iter().cloned().collect();
                let xj: Vec<f64> = x.row(j).iter().cloned().collect();
                assert_relative_eq!(pg.product[(i, j)], pk.eval(&xi, &xj).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn spectral_sample_shape_and_determinism() {
        let spec = KernelSpec::laplace(1.0).unwrap();
        let a = spectral_sample(&spec, 3, 5, 9);
        assert_eq!(a.shape(), (5, 3));
        assert_eq!(a, spectral_sample(&spec, 3, 5, 9));
    }

    fn cos_average(w: &DMatrix<f64>, lag: &[f64]) -> f64 {
        let n = w.nrows();
        (0..n)
            .map(|i| w.row(i).iter().zip(lag).map(|(a, b)| a * b).sum::<f64>().cos())
            .sum::<f64>()
            / n as f64
    }

    fn cos_se(w: &DMatrix<f64>, lag: &[f64]) -> f64 {
        let n = w.nrows() as f64;
        let vals: Vec<f64> = (0..w.nrows())
            .map(|i| w.row(i).iter().zip(lag).map(|(a, b)| a * b).sum::<f64>().cos())
            .collect();
        let m = vals.iter().sum::<f64>() / n;
        (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    }

    #[test]
    fn bochner_gaussian() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let w = spectral_sample(&spec, 2, 1_000_000, 1);
        let lag = [1.0, 0.0];
        let est = cos_average(&w, &lag);
        assert!((est - (-0.5f64).exp()).abs() < 4.0 * cos_se(&w, &lag));
        assert_eq!(cos_average(&w, &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn bochner_laplace() {
        let spec = KernelSpec::laplace(1.0).unwrap();
        let w = spectral_sample(&spec, 1, 1_000_000, 2);
        let est = cos_average(&w, &[1.0]);
        assert!((est - (-1f64).exp()).abs() < 4.0 * cos_se(&w, &[1.0]));
    }

    #[test]
    fn bochner_consistency_grid() {
        use rand::Rng;
        let n = 40_000;
        let bound = 4.0 / (n as f64).sqrt();
        let mut rng = rng::stream(5, "test.lags", 0);
        for spec in [KernelSpec::gaussian(0.8).unwrap(), KernelSpec::laplace(0.6).unwrap()] {
            let w = spectral_sample(&spec, 2, n, 17);
            for _ in 0..10 {
                let lag = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let est = cos_average(&w, &lag);
                assert!((est - spec.eval_lag(&lag)).abs() <= bound, "{spec:?} {lag:?}");
            }
        }
    }

    #[test]
    fn random_grams_are_psd() {
        for (seed, n) in [(1u64, 10usize), (2, 30), (3, 50)] {
            let x = crate::gaussian::GaussianMeasure::standard(3)
                .unwrap()
                .sample(n, seed)
                .unwrap();
            for spec in [KernelSpec::gaussian(1.5).unwrap(), KernelSpec::laplace(0.5).unwrap()] {
                let g = gram(&spec, &x, &x).unwrap();
                let min = SymmetricEigen::new(g).eigenvalues.min();
                assert!(min >= -1e-8, "min eigenvalue {min}");
            }
        }
    }

    proptest! {
        #[test]
        fn translation_invariant_and_symmetric(
            x in proptest::collection::vec(-3.0f64..3.0, 3),
            y in proptest::collection::vec(-3.0f64..3.0, 3),
            c in proptest::collection::vec(-10.0f64..10.0, 3),
            gamma in 0.1f64..3.0,
            laplace in any::<bool>(),
        ) {
            let family = if laplace { KernelFamily::Laplace } else { KernelFamily::Gaussian };
            let spec = KernelSpec::new(family, gamma).unwrap();
            let k = eval_kernel(&spec, &x, &y).unwrap();
            prop_assert_eq!(k, eval_kernel(&spec, &y, &x).unwrap());
            prop_assert!(k > 0.0 && k <= 1.0);
            let xs: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a + b).collect();
            let ys: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a + b).collect();
            let shifted = eval_kernel(&spec, &xs, &ys).unwrap();
            prop_assert!((shifted - k).abs() <= 1e-12);
        }
    }
}
