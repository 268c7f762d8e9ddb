//! Hyperparameter spaces, random search, and record-level k-fold
//! cross-validation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::dataset::ArchitectureDataset;
use crate::error::{Error, Result};
use crate::evaluation::{pairwise_accuracy_with, PairRanker};
use crate::models::{self, ModelKind, ModelMode};
use crate::protocol::{self, Protocol};
use crate::rng::{self, StreamRng};

/// Split-quality criterion for tree learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Gini,
    /// Entropy reduction.
    InfoGain,
    Mse,
    Mae,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::InfoGain => "info_gain",
            Criterion::Mse => "mse",
            Criterion::Mae => "mae",
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, Criterion::Gini | Criterion::InfoGain)
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "info_gain" | "entropy" => Ok(Criterion::InfoGain),
            "mse" => Ok(Criterion::Mse),
            "mae" => Ok(Criterion::Mae),
            _ => Err(Error::InvalidConfig(format!("unknown criterion {s:?}"))),
        }
    }
}

/// Number of features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    /// Every feature; not part of the search space.
    All,
}

impl MaxFeatures {
    pub fn name(self) -> &'static str {
        match self {
            MaxFeatures::Sqrt => "sqrt",
            MaxFeatures::Log2 => "log2",
            MaxFeatures::All => "all",
        }
    }

    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (n_features as f64).log2().floor() as usize,
            MaxFeatures::All => n_features,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            "all" => Ok(MaxFeatures::All),
            _ => Err(Error::InvalidConfig(format!("unknown max_features {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Int(usize),
    Real(f64),
    Bool(bool),
    Criterion(Criterion),
    MaxFeatures(MaxFeatures),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Criterion(c) => f.write_str(c.name()),
            ParamValue::MaxFeatures(m) => f.write_str(m.name()),
        }
    }
}

pub const MIN_SAMPLES_SPLIT: &str = "min_samples_split";
pub const MIN_SAMPLES_LEAF: &str = "min_samples_leaf";
pub const MAX_DEPTH: &str = "max_depth";
pub const MAX_FEATURES: &str = "max_features";
pub const CRITERION: &str = "criterion";
pub const N_ESTIMATORS: &str = "n_estimators";
pub const BOOTSTRAP: &str = "bootstrap";
pub const LEARNING_RATE: &str = "learning_rate";
pub const C: &str = "c";
pub const GAMMA: &str = "gamma";

/// Parameter names relevant to a model kind.
pub fn param_names(kind: ModelKind) -> &'static [&'static str] {
    const TREE: &[&str] = &[
        CRITERION,
        MAX_DEPTH,
        MAX_FEATURES,
        MIN_SAMPLES_LEAF,
        MIN_SAMPLES_SPLIT,
    ];
    const FOREST: &[&str] = &[
        BOOTSTRAP,
        CRITERION,
        MAX_DEPTH,
        MAX_FEATURES,
        MIN_SAMPLES_LEAF,
        MIN_SAMPLES_SPLIT,
        N_ESTIMATORS,
    ];
    const GBDT: &[&str] = &[
        CRITERION,
        LEARNING_RATE,
        MAX_DEPTH,
        MAX_FEATURES,
        MIN_SAMPLES_LEAF,
        MIN_SAMPLES_SPLIT,
        N_ESTIMATORS,
    ];
    const SVM: &[&str] = &[C, GAMMA];
    match kind {
        ModelKind::DTree => TREE,
        ModelKind::RForest => FOREST,
        ModelKind::Gbdt => GBDT,
        ModelKind::Svm => SVM,
    }
}

/// One point of a [`ParamSpace`]: parameter name to value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(
    into = "BTreeMap<String, String>",
    try_from = "BTreeMap<String, String>"
)]
pub struct ParamConfig {
    values: BTreeMap<String, ParamValue>,
}

impl ParamConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn set(&mut self, key: &str, value: ParamValue) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<ParamValue> {
        self.values.get(key).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn missing(key: &str) -> Error {
        Error::InvalidConfig(format!("missing or mistyped parameter {key}"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        match self.get(key) {
            Some(ParamValue::Int(v)) => Ok(v),
            _ => Err(Self::missing(key)),
        }
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        match self.get(key) {
            Some(ParamValue::Real(v)) => Ok(v),
            _ => Err(Self::missing(key)),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            Some(ParamValue::Bool(v)) => Ok(v),
            _ => Err(Self::missing(key)),
        }
    }

    pub fn criterion(&self) -> Result<Criterion> {
        match self.get(CRITERION) {
            Some(ParamValue::Criterion(c)) => Ok(c),
            _ => Err(Self::missing(CRITERION)),
        }
    }

    pub fn max_features(&self) -> Result<MaxFeatures> {
        match self.get(MAX_FEATURES) {
            Some(ParamValue::MaxFeatures(m)) => Ok(m),
            _ => Err(Self::missing(MAX_FEATURES)),
        }
    }

    /// Checks that the config holds exactly the parameters of `kind` with
    /// usable values for `mode`.
    pub fn validate(&self, kind: ModelKind, mode: ModelMode) -> Result<()> {
        let expected = param_names(kind);
        let actual: Vec<&str> = self.keys().collect();
        if actual != expected {
            return Err(Error::InvalidConfig(format!(
                "{kind} expects parameters {expected:?}, got {actual:?}"
            )));
        }
        if kind == ModelKind::Svm {
            for key in [C, GAMMA] {
                let v = self.real(key)?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "{key} must be positive, got {v}"
                    )));
                }
            }
            return Ok(());
        }
        if self.usize(MIN_SAMPLES_SPLIT)? < 2 {
            return Err(Error::InvalidConfig(
                "min_samples_split must be >= 2".into(),
            ));
        }
        if self.usize(MIN_SAMPLES_LEAF)? < 1 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        if self.usize(MAX_DEPTH)? < 1 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        self.max_features()?;
        let criterion = self.criterion()?;
        let want_classification = kind != ModelKind::Gbdt && mode == ModelMode::Classifier;
        if criterion.is_classification() != want_classification {
            return Err(Error::InvalidConfig(format!(
                "criterion {} does not fit {kind} in {mode} mode",
                criterion.name()
            )));
        }
        if matches!(kind, ModelKind::RForest | ModelKind::Gbdt) && self.usize(N_ESTIMATORS)? < 1 {
            return Err(Error::InvalidConfig("n_estimators must be >= 1".into()));
        }
        if kind == ModelKind::RForest {
            self.flag(BOOTSTRAP)?;
        }
        if kind == ModelKind::Gbdt {
            let lr = self.real(LEARNING_RATE)?;
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "learning_rate must be positive, got {lr}"
                )));
            }
        }
        Ok(())
    }

    /// Parses space-separated `key=value` pairs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ParamConfig::new();
        for token in text.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("expected key=value, got {token:?}"))
            })?;
            config.set(key, parse_value(key, value)?);
        }
        Ok(config)
    }
}

fn parse_value(key: &str, value: &str) -> Result<ParamValue> {
    let bad = || Error::InvalidConfig(format!("bad value for {key}: {value:?}"));
    Ok(match key {
        MIN_SAMPLES_SPLIT | MIN_SAMPLES_LEAF | MAX_DEPTH | N_ESTIMATORS => {
            ParamValue::Int(value.parse().map_err(|_| bad())?)
        }
        LEARNING_RATE | C | GAMMA => ParamValue::Real(value.parse().map_err(|_| bad())?),
        BOOTSTRAP => ParamValue::Bool(value.parse().map_err(|_| bad())?),
        CRITERION => ParamValue::Criterion(value.parse()?),
        MAX_FEATURES => ParamValue::MaxFeatures(value.parse()?),
        _ => return Err(Error::InvalidConfig(format!("unknown parameter {key:?}"))),
    })
}

impl fmt::Display for ParamConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl From<ParamConfig> for BTreeMap<String, String> {
    fn from(config: ParamConfig) -> Self {
        config
            .values
            .into_iter()
            .map(|(k, v)| (k, v.to_string()))
            .collect()
    }
}

impl TryFrom<BTreeMap<String, String>> for ParamConfig {
    type Error = Error;

    fn try_from(map: BTreeMap<String, String>) -> Result<Self> {
        let mut config = ParamConfig::new();
        for (k, v) in &map {
            config.set(k, parse_value(k, v)?);
        }
        Ok(config)
    }
}

/// Search ranges; integer ranges are inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub min_samples_split: (usize, usize),
    pub max_depth: (usize, usize),
    pub min_samples_leaf: (usize, usize),
    pub n_estimators: (usize, usize),
    pub max_features: Vec<MaxFeatures>,
    pub classifier_criteria: Vec<Criterion>,
    pub regressor_criteria: Vec<Criterion>,
    /// Scale (mean) of the exponential distribution for learning rate, C and gamma.
    pub exp_scale: f64,
}

impl Default for ParamSpace {
    fn default() -> Self {
        ParamSpace {
            min_samples_split: (2, 200),
            max_depth: (2, 200),
            min_samples_leaf: (1, 300),
            n_estimators: (1, 200),
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Log2],
            classifier_criteria: vec![Criterion::Gini, Criterion::InfoGain],
            regressor_criteria: vec![Criterion::Mse, Criterion::Mae],
            exp_scale: 10.0,
        }
    }
}

impl ParamSpace {
    /// Draws one configuration for `kind` in `mode`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        kind: ModelKind,
        mode: ModelMode,
        rng: &mut R,
    ) -> ParamConfig {
        let exp = Exp::new(1.0 / self.exp_scale).expect("positive scale");
        let draw_exp = |rng: &mut R| loop {
            let v: f64 = exp.sample(rng);
            if v > 0.0 {
                break v;
            }
        };
        if kind == ModelKind::Svm {
            let c = draw_exp(rng);
            let gamma = draw_exp(rng);
            return ParamConfig::new()
                .with(C, ParamValue::Real(c))
                .with(GAMMA, ParamValue::Real(gamma));
        }
        let int =
            |rng: &mut R, (lo, hi): (usize, usize)| ParamValue::Int(rng.random_range(lo..=hi));
        let criteria = if kind == ModelKind::Gbdt || mode == ModelMode::Regressor {
            &self.regressor_criteria
        } else {
            &self.classifier_criteria
        };
        let mut config = ParamConfig::new()
            .with(MIN_SAMPLES_SPLIT, int(rng, self.min_samples_split))
            .with(MIN_SAMPLES_LEAF, int(rng, self.min_samples_leaf))
            .with(MAX_DEPTH, int(rng, self.max_depth))
            .with(
                MAX_FEATURES,
                ParamValue::MaxFeatures(*self.max_features.choose(rng).expect("non-empty")),
            )
            .with(
                CRITERION,
                ParamValue::Criterion(*criteria.choose(rng).expect("non-empty")),
            );
        match kind {
            ModelKind::RForest => {
                config.set(N_ESTIMATORS, int(rng, self.n_estimators));
                config.set(BOOTSTRAP, ParamValue::Bool(true));
            }
            ModelKind::Gbdt => {
                config.set(N_ESTIMATORS, int(rng, self.n_estimators));
                config.set(LEARNING_RATE, ParamValue::Real(draw_exp(rng)));
            }
            _ => {}
        }
        config
    }

    /// True when every sampled parameter lies inside this space.
    pub fn contains(&self, config: &ParamConfig, kind: ModelKind, mode: ModelMode) -> bool {
        if config.validate(kind, mode).is_err() {
            return false;
        }
        let within = |key: &str, (lo, hi): (usize, usize)| {
            config.usize(key).is_ok_and(|v| lo <= v && v <= hi)
        };
        let positive = |key: &str| config.real(key).is_ok_and(|v| v > 0.0);
        match kind {
            ModelKind::Svm => positive(C) && positive(GAMMA),
            _ => {
                let criteria = if kind == ModelKind::Gbdt || mode == ModelMode::Regressor {
                    &self.regressor_criteria
                } else {
                    &self.classifier_criteria
                };
                within(MIN_SAMPLES_SPLIT, self.min_samples_split)
                    && within(MIN_SAMPLES_LEAF, self.min_samples_leaf)
                    && within(MAX_DEPTH, self.max_depth)
                    && config
                        .max_features()
                        .is_ok_and(|m| self.max_features.contains(&m))
                    && config.criterion().is_ok_and(|c| criteria.contains(&c))
                    && match kind {
                        ModelKind::RForest => within(N_ESTIMATORS, self.n_estimators),
                        ModelKind::Gbdt => {
                            within(N_ESTIMATORS, self.n_estimators) && positive(LEARNING_RATE)
                        }
                        _ => true,
                    }
            }
        }
    }
}

/// Draws one configuration from `space` using `rng`.
pub fn sample_config(
    space: &ParamSpace,
    kind: ModelKind,
    mode: ModelMode,
    rng: &mut StreamRng,
) -> ParamConfig {
    space.sample(kind, mode, rng)
}

/// Partitions `0..n` into `k` shuffled folds whose sizes differ by at most one.
pub fn k_fold_split<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} records into {k} folds"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(indices[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub config: ParamConfig,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

impl CvResult {
    fn new(config: ParamConfig, fold_scores: Vec<f64>) -> Self {
        let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        CvResult {
            config,
            fold_scores,
            mean_score,
        }
    }
}

/// Fits a predictor for one CV fold and returns something that orders pairs.
/// The default trainer is [`models::fit`]; tests substitute stubs.
pub trait FoldTrainer {
    fn train(
        &self,
        config: &ParamConfig,
        protocol: Protocol,
        train: &ArchitectureDataset,
        seed: u64,
    ) -> Result<Box<dyn PairRanker>>;
}

/// Trains `kind` with the protocol's training data.
#[derive(Debug, Clone, Copy)]
pub struct ModelTrainer {
    pub kind: ModelKind,
}

impl FoldTrainer for ModelTrainer {
    fn train(
        &self,
        config: &ParamConfig,
        protocol: Protocol,
        train: &ArchitectureDataset,
        seed: u64,
    ) -> Result<Box<dyn PairRanker>> {
        let predictor = fit_protocol(self.kind, config, protocol, train, seed)?;
        Ok(Box::new(predictor.ranker(protocol)?))
    }
}

/// Builds the protocol's training data from `train` and fits `kind` on it.
pub fn fit_protocol(
    kind: ModelKind,
    config: &ParamConfig,
    protocol: Protocol,
    train: &ArchitectureDataset,
    seed: u64,
) -> Result<models::TrainedPredictor> {
    let (inputs, targets) =
        protocol::build_for_protocol(protocol, train, rng::derive_seed(seed, 0xD47A))?;
    models::fit(kind, protocol.mode(), config, &inputs, &targets, seed)
}

fn check_folds(folds: &[Vec<usize>], n: usize) -> Result<()> {
    for fold in folds {
        if fold.len() < 2 || n - fold.len() < 2 {
            return Err(Error::TooFewRecords {
                required: 2,
                actual: fold.len().min(n - fold.len()),
            });
        }
    }
    Ok(())
}

/// k-fold cross-validation over records; pairs are built inside each fold.
pub fn cross_validate(
    kind: ModelKind,
    config: &ParamConfig,
    protocol: Protocol,
    train_data: &ArchitectureDataset,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    config.validate(kind, protocol.mode())?;
    cross_validate_with(
        &ModelTrainer { kind },
        config,
        protocol,
        train_data,
        k,
        seed,
    )
}

/// [`cross_validate`] with a custom trainer.
pub fn cross_validate_with(
    trainer: &dyn FoldTrainer,
    config: &ParamConfig,
    protocol: Protocol,
    train_data: &ArchitectureDataset,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    let folds = k_fold_split(train_data.len(), k, &mut rng::stream(seed, 0xF01D))?;
    check_folds(&folds, train_data.len())?;
    let mut scores = Vec::with_capacity(k);
    for (f, held_out) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        let train = train_data.subset(&train_idx)?;
        let valid = train_data.subset(held_out)?;
        let ranker = trainer.train(config, protocol, &train, rng::derive_seed(seed, f as u64))?;
        scores.push(pairwise_accuracy_with(ranker.as_ref(), &valid)?);
    }
    Ok(CvResult::new(config.clone(), scores))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: ParamConfig,
    pub best_index: usize,
    pub history: Vec<CvResult>,
}

impl SearchOutcome {
    pub fn best_result(&self) -> &CvResult {
        &self.history[self.best_index]
    }

    /// One line per trial: index, config, fold scores, mean.
    pub fn history_lines(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.history.iter().enumerate() {
            let folds: Vec<String> = r.fold_scores.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!(
                "trial={i} {} folds={} mean={}\n",
                r.config,
                folds.join(","),
                r.mean_score
            ));
        }
        out
    }
}

/// Cross-validates each candidate and keeps the best mean score; ties go to
/// the earliest candidate.
pub fn search_candidates(
    trainer: &dyn FoldTrainer,
    candidates: Vec<ParamConfig>,
    protocol: Protocol,
    train_data: &ArchitectureDataset,
    k: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let mut history: Vec<CvResult> = Vec::with_capacity(candidates.len());
    let mut best_index = 0;
    for config in candidates {
        let result = cross_validate_with(trainer, &config, protocol, train_data, k, seed)?;
        if !history.is_empty() && result.mean_score > history[best_index].mean_score {
            best_index = history.len();
        }
        history.push(result);
    }
    Ok(SearchOutcome {
        best: history[best_index].config.clone(),
        best_index,
        history,
    })
}

/// The configurations random search would try, in trial order.
pub fn random_candidates(
    space: &ParamSpace,
    kind: ModelKind,
    mode: ModelMode,
    trials: usize,
    seed: u64,
) -> Vec<ParamConfig> {
    (0..trials)
        .map(|t| space.sample(kind, mode, &mut rng::stream(seed, 0x7121_0000 + t as u64)))
        .collect()
}

/// Random search over the default space with k-fold CV.
pub fn random_search(
    kind: ModelKind,
    protocol: Protocol,
    train_data: &ArchitectureDataset,
    trials: usize,
    k: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    let candidates = random_candidates(&ParamSpace::default(), kind, protocol.mode(), trials, seed);
    search_candidates(
        &ModelTrainer { kind },
        candidates,
        protocol,
        train_data,
        k,
        seed,
    )
}
