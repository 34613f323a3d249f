//! Kernel independence measures for Gaussian models.
//!
//! * [`gaussian`]: multivariate normals, the correlated two-point family and
//!   KL divergences.
//! * [`kernels`]: Gaussian and Laplace kernels, Gram matrices, product
//!   kernels over blocks, spectral sampling.
//! * [`analytic`]: closed-form mean-embedding inner products, MMD² and HSIC²
//!   under Gaussian kernels, and the separation constants.
//! * [`estimators`]: V-, U- and Nyström HSIC estimators and a biased MMD².
//! * [`spectral`]: characteristic-function MMD and the Monte Carlo gap
//!   constant for translation-invariant kernels.
//! * [`lecam`]: the two-point minimax harness and log-log rate fits.
//! * [`cli`]: the `hsic` command-line front end and its report formats.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod gaussian;
pub mod kernels;
pub mod lecam;
pub mod linalg;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use estimators::Dataset;
pub use gaussian::{AdversarialPair, BlockStructure, GaussianMeasure};
pub use kernels::{KernelFamily, KernelSpec, ProductKernel};
