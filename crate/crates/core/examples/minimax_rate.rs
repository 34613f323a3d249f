//! Two-point risk simulation with a log-log rate fit. Uses a smaller grid
//! than the full experiment so it finishes in seconds.
//!
//! `cargo run --release --example minimax_rate`

use hsic_minimax::lecam::{run_experiment, Estimator, ExperimentConfig};

fn main() -> hsic_minimax::Result<()> {
    let config = ExperimentConfig {
        n_grid: vec![32, 64, 128, 256, 512],
        estimators: vec![Estimator::v(), Estimator::u(), Estimator::nystrom(30)],
        reps: 100,
        seed: 7,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config)?;

    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "n", "2c/√n", "v", "u", "nystrom");
    for r in &report.records {
        let risk = |name: &str| {
            r.risks
                .iter()
                .find(|s| s.estimator == name)
                .map(|s| s.sup_risk)
                .unwrap_or(f64::NAN)
        };
        println!(
            "{:>5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            r.n,
            r.gap_lower,
            risk("v"),
            risk("u"),
            risk("nystrom")
        );
    }
    for (name, fit) in &report.rate_fits {
        println!("{name:>8}: slope {:+.3}  R² {:.3}", fit.slope, fit.r_squared);
    }
    println!("certificates hold: {}", report.all_certificates_pass());
    println!("Le Cam lower bound on P(|error| ≥ c/√n): {:.6}", report.lecam_value);
    Ok(())
}
