//! Pairwise ranking accuracy and the protocol comparison grids.

use std::fmt::Write as _;

use crate::dataset::{ArchitectureDataset, FeatureVector, DEFAULT_TRAIN_FRACTION};
use crate::error::{Error, Result};
use crate::models::{ModelKind, TrainedPredictor};
use crate::protocol::{pair_order, Protocol};
use crate::rng;
use crate::tuning::{self, ParamConfig};

/// Which of two architectures is predicted to perform better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn flipped(self) -> Order {
        match self {
            Order::First => Order::Second,
            Order::Second => Order::First,
        }
    }
}

/// Anything that can order two architecture encodings.
pub trait PairRanker {
    fn order(&self, a: &FeatureVector, b: &FeatureVector) -> Result<Order>;
}

impl<T: PairRanker + ?Sized> PairRanker for &T {
    fn order(&self, a: &FeatureVector, b: &FeatureVector) -> Result<Order> {
        (**self).order(a, b)
    }
}

impl<T: PairRanker + ?Sized> PairRanker for Box<T> {
    fn order(&self, a: &FeatureVector, b: &FeatureVector) -> Result<Order> {
        (**self).order(a, b)
    }
}

/// Always answers the opposite of the wrapped ranker.
pub struct Inverted<R>(pub R);

impl<R: PairRanker> PairRanker for Inverted<R> {
    fn order(&self, a: &FeatureVector, b: &FeatureVector) -> Result<Order> {
        Ok(self.0.order(a, b)?.flipped())
    }
}

/// Fraction of ordered test pairs `(i, j)` where the ranker answers FIRST
/// exactly when `p_i >= p_j`.
pub fn pairwise_accuracy_with(ranker: &dyn PairRanker, test: &ArchitectureDataset) -> Result<f64> {
    let n = test.len();
    if n < 2 {
        return Err(Error::TooFewRecords {
            required: 2,
            actual: n,
        });
    }
    let records = test.records();
    let mut correct = 0usize;
    let mut total = 0usize;
    for (i, j) in pair_order(n) {
        let (a, b) = (&records[i], &records[j]);
        let truth = if a.performance - b.performance >= 0.0 {
            Order::First
        } else {
            Order::Second
        };
        if ranker.order(&a.features, &b.features)? == truth {
            correct += 1;
        }
        total += 1;
    }
    Ok(correct as f64 / total as f64)
}

pub fn pairwise_accuracy(
    predictor: &TrainedPredictor,
    protocol: Protocol,
    test: &ArchitectureDataset,
) -> Result<f64> {
    let ranker = predictor.ranker(protocol)?;
    pairwise_accuracy_with(&ranker, test)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportCell {
    pub kind: ModelKind,
    pub protocol: Protocol,
    pub accuracy: f64,
    pub cv_score: f64,
    pub config: ParamConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub dataset: String,
    pub seed: u64,
    pub trials: usize,
    pub folds: usize,
    pub kinds: Vec<ModelKind>,
    pub protocols: Vec<Protocol>,
    pub cells: Vec<ReportCell>,
}

impl EvaluationReport {
    pub fn accuracy(&self, kind: ModelKind, protocol: Protocol) -> Option<f64> {
        self.cell(kind, protocol).map(|c| c.accuracy)
    }

    pub fn cell(&self, kind: ModelKind, protocol: Protocol) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.kind == kind && c.protocol == protocol)
    }

    /// Mean accuracy of `protocol` across the report's models.
    pub fn average(&self, protocol: Protocol) -> Option<f64> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.protocol == protocol)
            .map(|c| c.accuracy)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset={}", self.dataset);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "trials={}", self.trials);
        let _ = writeln!(out, "folds={}", self.folds);
        for c in &self.cells {
            let prefix = format!("cell.{}.{}", c.kind, c.protocol);
            let _ = writeln!(out, "{prefix}.accuracy={}", c.accuracy);
            let _ = writeln!(out, "{prefix}.cv_score={}", c.cv_score);
            let _ = writeln!(out, "{prefix}.config={}", c.config);
        }
        for &p in &self.protocols {
            if let Some(avg) = self.average(p) {
                let _ = writeln!(out, "avg.{p}={avg}");
            }
        }
        out
    }

    /// Models as rows, protocols as columns, accuracies in percent.
    pub fn to_table(&self) -> String {
        let header = |p: Protocol| match p {
            Protocol::Proposed => "Proposed",
            Protocol::Baseline => "Baseline",
            Protocol::G1 => "G1",
            Protocol::G2 => "G2",
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.dataset);
        let _ = write!(out, "{:<9}", "");
        for &p in &self.protocols {
            let _ = write!(out, " | {:>9}", header(p));
        }
        out.push('\n');
        let width = 9 + 12 * self.protocols.len();
        let _ = writeln!(out, "{}", "-".repeat(width));
        for &k in &self.kinds {
            let _ = write!(out, "{:<9}", k.label());
            for &p in &self.protocols {
                match self.accuracy(k, p) {
                    Some(a) => {
                        let _ = write!(out, " | {:>8.2}%", 100.0 * a);
                    }
                    None => {
                        let _ = write!(out, " | {:>9}", "-");
                    }
                }
            }
            out.push('\n');
        }
        if self.kinds.len() > 1 {
            let _ = writeln!(out, "{}", "-".repeat(width));
            let _ = write!(out, "{:<9}", "Avg");
            for &p in &self.protocols {
                let _ = write!(
                    out,
                    " | {:>8.2}%",
                    100.0 * self.average(p).unwrap_or(f64::NAN)
                );
            }
            out.push('\n');
        }
        out
    }
}

/// Sorted 70/30 split, random search on the training part, refit, and
/// pairwise accuracy on the test part, for every model and protocol.
pub fn run_protocols(
    dataset: &ArchitectureDataset,
    name: &str,
    kinds: &[ModelKind],
    protocols: &[Protocol],
    trials: usize,
    k: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    if kinds.is_empty() || protocols.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one model and one protocol".into(),
        ));
    }
    let (train, test) = dataset.sorted_split(DEFAULT_TRAIN_FRACTION)?;
    let mut cells = Vec::new();
    for &kind in kinds {
        for &protocol in protocols {
            let search = tuning::random_search(kind, protocol, &train, trials, k, seed)?;
            let fit_seed = rng::derive_seed(seed, 0xF17);
            let predictor = tuning::fit_protocol(kind, &search.best, protocol, &train, fit_seed)?;
            let accuracy = pairwise_accuracy(&predictor, protocol, &test)?;
            cells.push(ReportCell {
                kind,
                protocol,
                accuracy,
                cv_score: search.best_result().mean_score,
                config: search.best,
            });
        }
    }
    Ok(EvaluationReport {
        dataset: name.to_string(),
        seed,
        trials,
        folds: k,
        kinds: kinds.to_vec(),
        protocols: protocols.to_vec(),
        cells,
    })
}

/// Proposed protocol against the regression baseline.
pub fn run_comparison(
    dataset: &ArchitectureDataset,
    name: &str,
    kinds: &[ModelKind],
    trials: usize,
    k: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    run_protocols(
        dataset,
        name,
        kinds,
        &[Protocol::Baseline, Protocol::Proposed],
        trials,
        k,
        seed,
    )
}

/// Proposed protocol against both ablations.
pub fn run_ablation(
    dataset: &ArchitectureDataset,
    name: &str,
    kinds: &[ModelKind],
    trials: usize,
    k: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    run_protocols(
        dataset,
        name,
        kinds,
        &[Protocol::Proposed, Protocol::G1, Protocol::G2],
        trials,
        k,
        seed,
    )
}
