//! Pairwise protocol against the regression baseline on a sorted 70/30
//! split. Pass a CSV path to use your own records; otherwise a synthetic
//! space is sampled.
//!
//! ```text
//! cargo run --release --example compare_protocols -- data.csv 20
//! ```

use pairank::dataset::{self, ArchitectureDataset};
use pairank::evaluation;
use pairank::models::ModelKind;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = dataset::generate_synthetic(60, 8, 3, 0.02)?;
    let report = evaluation::run_comparison(
        &data,
        "synthetic-60",
        &[ModelKind::DTree, ModelKind::Gbdt],
        2,
        3,
        0,
    )?;
    print!("{}", report.to_table());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    match args.next() {
        Some(path) => {
            let trials = args.next().map(|t| t.parse()).transpose()?.unwrap_or(10);
            let data = ArchitectureDataset::load(&path)?;
            let report = evaluation::run_comparison(&data, &path, &ModelKind::ALL, trials, 5, 0)?;
            print!("{}", report.to_table());
            print!("{}", report.to_key_values());
            Ok(())
        }
        None => run_example(),
    }
}
