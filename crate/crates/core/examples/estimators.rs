//! V-, U- and Nyström estimates of HSIC on one sample, next to the truth.
//!
//! `cargo run --release --example estimators -- 1000`

use hsic_minimax::analytic::hsic2_gaussian;
use hsic_minimax::estimators::{hsic_nystrom, GramStats};
use hsic_minimax::gaussian::make_adversarial_cov;
use hsic_minimax::{BlockStructure, Dataset, GaussianMeasure, KernelSpec, ProductKernel};
use nalgebra::DVector;

fn main() -> hsic_minimax::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("n must be an integer"))
        .unwrap_or(500);
    let block = BlockStructure::pair(1, 1)?;
    let pk = ProductKernel::uniform(block.clone(), KernelSpec::gaussian(1.0)?);

    for rho in [0.0, 0.3, 0.6, 0.9] {
        let g = GaussianMeasure::new(DVector::zeros(2), make_adversarial_cov(&block, rho)?)?;
        let truth = hsic2_gaussian(&g, &block, 1.0)?.value;
        let data = Dataset::sample(&g, &block, n, 17)?;
        let stats = GramStats::compute(&pk, &data)?;
        let (v, u) = (stats.hsic_v()?, stats.hsic_u()?);
        let (ny, _) = hsic_nystrom(&pk, &data, n.min(100), 17)?;
        println!(
            "rho {rho:.1}: truth {truth:.6}  V {v:.6}  U {u:.6}  Nyström² {:.6}",
            ny * ny
        );
    }
    Ok(())
}
