//! Closed-form HSIC² of a correlated Gaussian and its three embedding terms.
//!
//! `cargo run --example closed_form_hsic -- 0.6`

use hsic_minimax::analytic::{adversarial_hsic2, hsic2_gaussian};
use hsic_minimax::gaussian::make_adversarial_cov;
use hsic_minimax::{BlockStructure, GaussianMeasure};
use nalgebra::DVector;

fn main() -> hsic_minimax::Result<()> {
    let rho: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("rho must be a number"))
        .unwrap_or(0.6);
    let block = BlockStructure::pair(1, 1)?;
    let g = GaussianMeasure::new(DVector::zeros(2), make_adversarial_cov(&block, rho)?)?;

    println!("gamma   hsic2        hsic         ‖μ_P‖²       ‖μ_⊗‖²       ⟨μ_P, μ_⊗⟩");
    for gamma in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let h = hsic2_gaussian(&g, &block, gamma)?;
        println!(
            "{gamma:<7} {:<12.6e} {:<12.6e} {:<12.6} {:<12.6} {:.6}",
            h.value,
            h.hsic(),
            h.term_i,
            h.term_ii,
            h.term_iii
        );
    }

    // Larger blocks: correlation only between the last coordinate of block 1
    // and the first coordinate of block 2.
    println!("\nadversarial covariance, rho = {rho}, gamma = 1");
    for d in 2..=6 {
        println!("d = {d}: hsic = {:.6}", adversarial_hsic2(rho.abs(), 1.0, d)?.hsic());
    }
    Ok(())
}
