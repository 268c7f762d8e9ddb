//! Save a trained predictor as JSON and reload it with identical answers.

use pairank::dataset;
use pairank::models::{ModelKind, TrainedPredictor};
use pairank::protocol::Protocol;
use pairank::tuning::{self, ParamConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = dataset::generate_synthetic(30, 5, 4, 0.02)?;
    let config = ParamConfig::parse("c=2.0 gamma=0.05")?;
    let predictor = tuning::fit_protocol(ModelKind::Svm, &config, Protocol::Proposed, &data, 0)?;

    let path = std::env::temp_dir().join("pairank-example-predictor.json");
    predictor.save(&path)?;
    let reloaded = TrainedPredictor::load(&path)?;
    std::fs::remove_file(&path)?;

    let (a, b) = (&data.records()[0].features, &data.records()[1].features);
    let before = predictor.predict_score(&(a - b))?;
    let after = reloaded.predict_score(&(a - b))?;
    println!(
        "score before {before}, after {after}, identical: {}",
        before.to_bits() == after.to_bits()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
