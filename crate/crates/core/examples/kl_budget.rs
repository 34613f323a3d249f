//! KL divergence between the n-fold products of the adversarial pair, against
//! the 5/4 budget, and the Le Cam bound it implies.

use hsic_minimax::analytic::lecam_bound;
use hsic_minimax::gaussian::{kl_adversarial_bound, kl_adversarial_exact, kl_gaussians};
use hsic_minimax::lecam::KL_BUDGET;
use hsic_minimax::{AdversarialPair, BlockStructure};

fn main() -> hsic_minimax::Result<()> {
    let block = BlockStructure::pair(2, 2)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "n", "n·KL", "closed", "bound");
    for n in [2, 4, 16, 64, 256, 1024, 4096] {
        let pair = AdversarialPair::new(n, 1.0, &block)?;
        let direct = n as f64 * kl_gaussians(&pair.p1, &pair.p0)?;
        let exact = kl_adversarial_exact(n, pair.rho, &block)?;
        let bound = kl_adversarial_bound(n, pair.rho)?;
        assert!(exact <= bound && bound <= KL_BUDGET);
        println!("{n:>6} {direct:>12.8} {exact:>12.8} {bound:>12.8}");
    }
    println!("\nLe Cam lower bound at KL = 5/4: {:.9}", lecam_bound(KL_BUDGET));
    Ok(())
}
