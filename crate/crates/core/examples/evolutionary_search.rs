//! Evolutionary search where every selection decision is a pairwise
//! comparison, once with the true fitness and once with a trained predictor.

use pairank::dataset::SyntheticSpace;
use pairank::enas_sim::{self, Comparator, SearchConfig};
use pairank::evaluation;
use pairank::models::ModelKind;
use pairank::protocol::Protocol;
use pairank::tuning::{self, ParamConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let space = SyntheticSpace::new(6, 2)?;
    let config = SearchConfig {
        population: 12,
        generations: 10,
        ..SearchConfig::default()
    };

    let oracle = enas_sim::evolve(&config, &space, &Comparator::Oracle(&space))?;
    print!("{}", oracle.log_lines());

    let train = space.sample_dataset(40, 0.02, 9)?;
    let params = ParamConfig::parse(
        "criterion=gini max_depth=10 min_samples_split=2 min_samples_leaf=1 max_features=sqrt n_estimators=30 bootstrap=true",
    )?;
    let predictor =
        tuning::fit_protocol(ModelKind::RForest, &params, Protocol::Proposed, &train, 3)?;
    let ranker = predictor.ranker(Protocol::Proposed)?;
    let held_out = space.sample_dataset(30, 0.0, 10)?;
    println!(
        "predictor pairwise accuracy: {:.3}",
        evaluation::pairwise_accuracy_with(&ranker, &held_out)?
    );

    let guided = enas_sim::evolve(&config, &space, &Comparator::Predictor(&ranker))?;
    let random = enas_sim::random_sampling(&config, &space, &Comparator::Predictor(&ranker))?;
    println!(
        "final true fitness: oracle {:.4}, predictor {:.4}, random sampling {:.4}, optimum {:.4}",
        oracle.best.true_fitness.unwrap_or(f64::NAN),
        guided.best.true_fitness.unwrap_or(f64::NAN),
        random.true_fitness.unwrap_or(f64::NAN),
        space.performance(&space.optimum()),
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
