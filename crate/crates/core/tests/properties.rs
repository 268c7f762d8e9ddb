use proptest::prelude::*;
use rand::Rng;

use pairank::dataset::{
    bin_index, ArchitectureDataset, ArchitectureRecord, FeatureVector, Histogram, SyntheticSpace,
};
use pairank::enas_sim::{evolve, Comparator, SearchConfig, SearchSpace};
use pairank::evaluation::{pairwise_accuracy_with, run_protocols, Inverted, Order};
use pairank::models::{self, FittedModel, ModelKind, ModelMode, Node};
use pairank::protocol::{build_pair_instances, build_pair_labels, build_training_data, Protocol};
use pairank::rng;
use pairank::tuning::{fit_protocol, k_fold_split, random_search, ParamConfig, ParamSpace};
use pairank::TrainedPredictor;

fn dataset_strategy(max_n: usize) -> impl Strategy<Value = ArchitectureDataset> {
    (2..=max_n, 1usize..8).prop_flat_map(|(n, d)| {
        prop::collection::vec((prop::collection::vec(-5i32..10, d), 1u32..=50), n).prop_map(
            |rows| {
                let records = rows
                    .into_iter()
                    .map(|(f, p)| ArchitectureRecord::new(f, f64::from(p) / 50.0))
                    .collect();
                ArchitectureDataset::new(records).unwrap()
            },
        )
    })
}

/// Distinct performances, so no ordered pair is a tie.
fn tie_free(n: usize, d: usize, seed: u64) -> ArchitectureDataset {
    let mut rng = rng::seeded(seed);
    let records = (0..n)
        .map(|i| {
            let f: Vec<i32> = (0..d).map(|_| rng.random_range(0..8)).collect();
            ArchitectureRecord::new(f, (i + 1) as f64 / (n + 1) as f64)
        })
        .collect();
    ArchitectureDataset::new(records).unwrap()
}

fn tree_config(criterion: &str, depth: usize, leaf: usize) -> ParamConfig {
    ParamConfig::parse(&format!(
        "criterion={criterion} max_depth={depth} max_features=all min_samples_leaf={leaf} min_samples_split=2"
    ))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairs_are_mirrored_balanced_and_consistent(ds in dataset_strategy(30)) {
        let n = ds.len();
        let pairs = build_training_data(&ds).unwrap();
        prop_assert_eq!(pairs.len(), n * (n - 1));
        prop_assert_eq!(2 * pairs.positives(), pairs.len());
        for m in pairs.samples.chunks(2) {
            prop_assert_eq!(&m[1].diff, &-&m[0].diff);
            prop_assert_eq!(m[0].label, 1 - m[1].label);
        }
        let instances = build_pair_instances(&ds.features()).unwrap();
        let labels = build_pair_labels(&ds.performances()).unwrap();
        prop_assert_eq!(instances.len(), pairs.len());
        for ((s, (diff, source)), label) in pairs.samples.iter().zip(instances).zip(labels) {
            prop_assert_eq!(&s.diff, &diff);
            prop_assert_eq!(s.source, source);
            prop_assert_eq!(s.label, label);
        }
    }

    #[test]
    fn sorted_split_partitions_in_order(ds in dataset_strategy(40), fraction in 0.05f64..0.95) {
        match ds.sorted_split(fraction) {
            Ok((train, test)) => {
                prop_assert_eq!(train.len() + test.len(), ds.len());
                prop_assert_eq!(train.len(), (fraction * ds.len() as f64).floor() as usize);
                let all: Vec<f64> = train.performances().into_iter().chain(test.performances()).collect();
                prop_assert!(all.windows(2).all(|w| w[0] <= w[1]));
            }
            Err(_) => {
                let n_train = (fraction * ds.len() as f64).floor() as usize;
                prop_assert!(n_train == 0 || n_train == ds.len());
            }
        }
    }

    #[test]
    fn csv_round_trips(ds in dataset_strategy(20)) {
        let again = ArchitectureDataset::parse(&ds.to_csv_string()).unwrap();
        prop_assert_eq!(again, ds);
    }

    #[test]
    fn histogram_counts_and_rebinning(values in prop::collection::vec(0.0f64..=1.0, 1..200), width in 0.001f64..0.3) {
        let h = Histogram::build(&values, width, 0.0).unwrap();
        prop_assert_eq!(h.total(), values.len());
        for &bin in h.counts.keys() {
            prop_assert_eq!(bin_index(h.lower_edge(bin), width, 0.0), bin);
        }
    }

    #[test]
    fn folds_partition_records(n in 2usize..80, k in 1usize..10, seed: u64) {
        prop_assume!(k <= n);
        let folds = k_fold_split(n, k, &mut rng::seeded(seed)).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen: Vec<usize> = folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn sampled_configs_stay_in_space(seed: u64) {
        let space = ParamSpace::default();
        let mut r = rng::seeded(seed);
        for kind in ModelKind::ALL {
            for mode in [ModelMode::Classifier, ModelMode::Regressor] {
                let config = space.sample(kind, mode, &mut r);
                prop_assert!(space.contains(&config, kind, mode), "{kind} {mode}: {config}");
                prop_assert_eq!(ParamConfig::parse(&config.to_string()).unwrap(), config);
            }
        }
    }

    #[test]
    fn trees_respect_structure(seed: u64, depth in 1usize..12, leaf in 1usize..6, gini: bool) {
        let ds = tie_free(30, 4, seed);
        let criterion = if gini { "gini" } else { "info_gain" };
        let p = fit_protocol(ModelKind::DTree, &tree_config(criterion, depth, leaf), Protocol::Proposed, &ds, seed).unwrap();
        let FittedModel::Tree(tree) = p.model() else { unreachable!() };
        prop_assert!(tree.depth() <= depth);
        for node in tree.nodes() {
            match *node {
                Node::Leaf { samples, .. } => prop_assert!(samples >= leaf),
                Node::Split { left, right, samples, impurity, .. } => {
                    let (l, r) = (&tree.nodes()[left], &tree.nodes()[right]);
                    prop_assert_eq!(l.samples() + r.samples(), samples);
                    let weighted = (l.samples() as f64 * l.impurity() + r.samples() as f64 * r.impurity()) / samples as f64;
                    prop_assert!(weighted <= impurity + 1e-12, "split raises impurity: {weighted} vs {impurity}");
                }
            }
        }
    }

    #[test]
    fn svm_duals_are_box_feasible(seed: u64, c in 0.05f64..20.0, gamma in 0.01f64..2.0, classify: bool) {
        let ds = tie_free(14, 3, seed);
        let (protocol, mode) = if classify { (Protocol::G2, ModelMode::Classifier) } else { (Protocol::Baseline, ModelMode::Regressor) };
        let config = ParamConfig::parse(&format!("c={c} gamma={gamma}")).unwrap();
        let p = fit_protocol(ModelKind::Svm, &config, protocol, &ds, seed).unwrap();
        prop_assert_eq!(p.mode(), mode);
        let FittedModel::Svm(svm) = p.model() else { unreachable!() };
        prop_assert!(svm.converged());
        prop_assert!(svm.kkt_gap() <= 1e-3);
        prop_assert!(svm.dual_coef().iter().all(|a| a.abs() <= c * (1.0 + 1e-12)));
    }

    #[test]
    fn baseline_order_is_transitive(seed: u64) {
        let ds = tie_free(20, 3, seed);
        let p = fit_protocol(ModelKind::Gbdt, &ParamConfig::parse(
            "criterion=mse learning_rate=0.5 max_depth=3 max_features=all min_samples_leaf=1 min_samples_split=2 n_estimators=10",
        ).unwrap(), Protocol::Baseline, &ds, seed).unwrap();
        let f = ds.features();
        let first = |a: &FeatureVector, b: &FeatureVector| p.predict_order(Protocol::Baseline, a, b).unwrap() == Order::First;
        for a in &f {
            for b in &f {
                for c in &f {
                    if first(a, b) && first(b, c) {
                        prop_assert!(first(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn inverted_ranker_complements_accuracy(seed: u64, n in 2usize..20) {
        let train = tie_free(15, 4, seed);
        let test = tie_free(n, 4, seed ^ 0xABCD);
        let p = fit_protocol(ModelKind::DTree, &tree_config("gini", 5, 1), Protocol::Proposed, &train, seed).unwrap();
        let r = p.ranker(Protocol::Proposed).unwrap();
        let a = pairwise_accuracy_with(&r, &test).unwrap();
        let b = pairwise_accuracy_with(&Inverted(&r), &test).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn best_search_score_dominates_history(seed: u64) {
        let ds = tie_free(18, 3, seed);
        let out = random_search(ModelKind::DTree, Protocol::Proposed, &ds, 5, 3, seed).unwrap();
        let best = out.best_result().mean_score;
        prop_assert!(out.history.iter().all(|r| r.mean_score <= best));
        prop_assert_eq!(&out.best, &out.history[out.best_index].config);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn populations_keep_size_bounds_and_elitist_progress(
        seed: u64,
        genes in 1usize..6,
        population in 2usize..12,
        generations in 0usize..8,
        mutation in 0.0f64..=1.0,
        crossover in 0.0f64..=1.0,
    ) {
        let space = SyntheticSpace::new(genes, seed).unwrap();
        let config = SearchConfig { population, generations, mutation, crossover, seed };
        let out = evolve(&config, &space, &Comparator::Oracle(&space)).unwrap();
        prop_assert_eq!(out.trajectory.populations.len(), generations + 1);
        for pop in &out.trajectory.populations {
            prop_assert_eq!(pop.len(), population);
            prop_assert!(pop.members.iter().all(|m| SearchSpace::contains(&space, &m.genotype)));
        }
        prop_assert!(out.log.windows(2).all(|w| w[1].best >= w[0].best));
        prop_assert_eq!(out.trajectory.final_calls, population - 1);
    }
}

/// Zero-gain splits must stay allowed: no single split separates XOR.
#[test]
fn unconstrained_tree_fits_xor() {
    let inputs: Vec<FeatureVector> = [[0, 0], [1, 1], [0, 1], [1, 0]]
        .iter()
        .map(|r| FeatureVector::new(r.to_vec()))
        .collect();
    let targets = [0.0, 0.0, 1.0, 1.0];
    let p = models::fit(
        ModelKind::DTree,
        ModelMode::Classifier,
        &tree_config("gini", 10, 1),
        &inputs,
        &targets,
        0,
    )
    .unwrap();
    for (x, t) in inputs.iter().zip(targets) {
        assert_eq!(p.predict_score(x).unwrap(), t);
    }
}

#[test]
fn fits_and_reports_are_reproducible() {
    let ds = tie_free(24, 4, 3);
    let a = run_protocols(
        &ds,
        "toy",
        &[ModelKind::DTree, ModelKind::Svm],
        &Protocol::ALL,
        2,
        3,
        11,
    )
    .unwrap();
    let b = run_protocols(
        &ds,
        "toy",
        &[ModelKind::DTree, ModelKind::Svm],
        &Protocol::ALL,
        2,
        3,
        11,
    )
    .unwrap();
    assert_eq!(a.to_key_values(), b.to_key_values());
    for c in &a.cells {
        let d = b.cell(c.kind, c.protocol).unwrap();
        assert_eq!(c.accuracy.to_bits(), d.accuracy.to_bits());
    }

    let inputs: Vec<FeatureVector> = ds.features();
    let targets = ds.performances();
    let probe = FeatureVector::new(vec![3, 1, 4, 1]);
    let mut r = rng::seeded(5);
    for kind in ModelKind::ALL {
        let config = ParamSpace::default().sample(kind, ModelMode::Regressor, &mut r);
        let x = models::fit(kind, ModelMode::Regressor, &config, &inputs, &targets, 8).unwrap();
        let y = models::fit(kind, ModelMode::Regressor, &config, &inputs, &targets, 8).unwrap();
        assert_eq!(
            x.predict_score(&probe).unwrap().to_bits(),
            y.predict_score(&probe).unwrap().to_bits()
        );
        assert_eq!(x, TrainedPredictor::from_json(&x.to_json()).unwrap());
    }
}
