//! Turn a handful of architectures into mirrored difference instances,
//! fit a pairwise classifier and ask it which of two designs is better.

use pairank::dataset::{ArchitectureDataset, ArchitectureRecord};
use pairank::models::ModelKind;
use pairank::protocol::{self, Protocol};
use pairank::tuning::{self, ParamConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = ArchitectureDataset::new(vec![
        ArchitectureRecord::new(vec![3, 1, 64], 0.71),
        ArchitectureRecord::new(vec![5, 2, 128], 0.83),
        ArchitectureRecord::new(vec![2, 1, 32], 0.64),
        ArchitectureRecord::new(vec![6, 3, 128], 0.88),
        ArchitectureRecord::new(vec![4, 2, 64], 0.77),
    ])?;

    let pairs = protocol::build_training_data(&data)?;
    println!(
        "{} records -> {} pair instances, {} labeled FIRST",
        data.len(),
        pairs.len(),
        pairs.positives()
    );
    for s in pairs.samples.iter().take(4) {
        println!(
            "  {:?} diff={:?} label={}",
            s.source,
            s.diff.values(),
            s.label
        );
    }

    let config = ParamConfig::parse(
        "criterion=gini max_depth=8 min_samples_split=2 min_samples_leaf=1 max_features=log2",
    )?;
    let predictor = tuning::fit_protocol(ModelKind::DTree, &config, Protocol::Proposed, &data, 7)?;

    let a = &data.records()[1].features;
    let b = &data.records()[2].features;
    println!(
        "order({:?}, {:?}) = {:?}",
        a.values(),
        b.values(),
        predictor.predict_order(Protocol::Proposed, a, b)?
    );
    println!(
        "order({:?}, {:?}) = {:?}",
        b.values(),
        a.values(),
        predictor.predict_order(Protocol::Proposed, b, a)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
