//! Write a sample from the correlated member of the adversarial pair as CSV,
//! ready for `hsic estimate --input`.
//!
//! `cargo run --example write_dataset -- sample.csv 256`

use std::fs::File;
use std::io::BufWriter;

use hsic_minimax::cli::io::write_matrix;
use hsic_minimax::{AdversarialPair, BlockStructure};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "sample.csv".into());
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(256);

    let block = BlockStructure::pair(1, 1)?;
    let pair = AdversarialPair::new(n, 1.0, &block)?;
    let x = pair.p1.sample(n, 0)?;
    write_matrix(&mut BufWriter::new(File::create(&path)?), &x)?;
    eprintln!("wrote {n} rows to {path}; try: hsic estimate --input {path} --blocks {block} --est v --est u");
    Ok(())
}
