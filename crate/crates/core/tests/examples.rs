//! Every example runs to completion.

#[path = "../examples/ablation_study.rs"]
mod ablation_study;

#[test]
fn ablation_study_runs() {
    ablation_study::run_example().unwrap();
}

#[path = "../examples/compare_protocols.rs"]
mod compare_protocols;

#[test]
fn compare_protocols_runs() {
    compare_protocols::run_example().unwrap();
}

#[path = "../examples/cost_model.rs"]
mod cost_model;

#[test]
fn cost_model_runs() {
    cost_model::run_example().unwrap();
}

#[path = "../examples/evolutionary_search.rs"]
mod evolutionary_search;

#[test]
fn evolutionary_search_runs() {
    evolutionary_search::run_example().unwrap();
}

#[path = "../examples/hyperparameter_search.rs"]
mod hyperparameter_search;

#[test]
fn hyperparameter_search_runs() {
    hyperparameter_search::run_example().unwrap();
}

#[path = "../examples/pairwise_training.rs"]
mod pairwise_training;

#[test]
fn pairwise_training_runs() {
    pairwise_training::run_example().unwrap();
}

#[path = "../examples/predictor_persistence.rs"]
mod predictor_persistence;

#[test]
fn predictor_persistence_runs() {
    predictor_persistence::run_example().unwrap();
}

#[path = "../examples/sorted_split.rs"]
mod sorted_split;

#[test]
fn sorted_split_runs() {
    sorted_split::run_example().unwrap();
}
