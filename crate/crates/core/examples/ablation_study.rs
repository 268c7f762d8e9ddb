//! The pairwise protocol against its two ablations: regression on the
//! difference vectors, and keeping only one direction of each pair.

use pairank::dataset;
use pairank::evaluation;
use pairank::models::ModelKind;
use pairank::protocol::Protocol;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = dataset::generate_synthetic(60, 8, 11, 0.02)?;
    let report = evaluation::run_ablation(
        &data,
        "synthetic-60",
        &[ModelKind::DTree, ModelKind::RForest],
        2,
        3,
        1,
    )?;
    print!("{}", report.to_table());
    for p in [Protocol::Proposed, Protocol::G1, Protocol::G2] {
        println!("{p:>8}: mean {:.4}", report.average(p).unwrap_or(f64::NAN));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
