//! Random search with record-level k-fold cross-validation. Pairs are
//! built inside each fold, so no record leaks across the fold boundary.

use pairank::dataset;
use pairank::models::ModelKind;
use pairank::protocol::Protocol;
use pairank::tuning::{self, ParamSpace};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = dataset::generate_synthetic(40, 6, 5, 0.02)?;
    let (train, _) = data.sorted_split(0.7)?;

    let mut rng = pairank::rng::seeded(1);
    let sample = ParamSpace::default().sample(ModelKind::Gbdt, Protocol::Proposed.mode(), &mut rng);
    println!("one draw from the GBDT space: {sample}");

    let search = tuning::random_search(ModelKind::DTree, Protocol::Proposed, &train, 5, 5, 42)?;
    print!("{}", search.history_lines());
    println!("best: trial {} -> {}", search.best_index, search.best);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
