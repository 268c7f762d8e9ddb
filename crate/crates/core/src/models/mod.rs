//! Predictor backends behind one fit/predict interface.
//!
//! Every backend runs in classifier mode (0/1 ranking labels, score in
//! [0, 1]) or regressor mode (real targets, unbounded score). A
//! [`TrainedPredictor`] is immutable and serializes to JSON that reloads to
//! bit-identical predictions.

mod forest;
mod gbdt;
pub(crate) mod matrix;
pub mod svm;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{sigmoid, FeatureVector};
use crate::error::{Error, Result};
use crate::evaluation::{Order, PairRanker};
use crate::protocol::Protocol;
use crate::tuning::ParamConfig;

pub use forest::Forest;
pub use gbdt::{logistic_loss, squared_loss, Gbdt, LEAF_BOUND};
pub use svm::Svm;
pub use tree::{Node, Tree};

use matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    Svm,
    Gbdt,
    DTree,
    RForest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Svm,
        ModelKind::Gbdt,
        ModelKind::DTree,
        ModelKind::RForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Gbdt => "gbdt",
            ModelKind::DTree => "dtree",
            ModelKind::RForest => "rforest",
        }
    }

    /// Display label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Svm => "SVM",
            ModelKind::Gbdt => "GBDT",
            ModelKind::DTree => "DTree",
            ModelKind::RForest => "RForest",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(ModelKind::Svm),
            "gbdt" => Ok(ModelKind::Gbdt),
            "dtree" => Ok(ModelKind::DTree),
            "rforest" => Ok(ModelKind::RForest),
            other => Err(Error::InvalidArgument(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelMode {
    Classifier,
    Regressor,
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelMode::Classifier => "classifier",
            ModelMode::Regressor => "regressor",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum FittedModel {
    Tree(Tree),
    Forest(Forest),
    Gbdt(Gbdt),
    Svm(Svm),
}

const FORMAT: &str = "pairank-predictor/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPredictor {
    format: String,
    kind: ModelKind,
    mode: ModelMode,
    config: ParamConfig,
    feature_len: usize,
    model: FittedModel,
}

/// Fits `kind` in `mode` on `inputs`/`targets`. Deterministic in `seed`.
pub fn fit(
    kind: ModelKind,
    mode: ModelMode,
    config: &ParamConfig,
    inputs: &[FeatureVector],
    targets: &[f64],
    seed: u64,
) -> Result<TrainedPredictor> {
    config.validate(kind, mode)?;
    if inputs.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if inputs.len() < 2 {
        return Err(Error::TooFewRecords {
            required: 2,
            actual: inputs.len(),
        });
    }
    tree::check_targets(targets, mode == ModelMode::Classifier)?;
    let x = Matrix::from_vectors(inputs)?;
    if x.n_cols == 0 {
        return Err(Error::InvalidArgument(
            "feature vectors must be non-empty".into(),
        ));
    }
    let model = match kind {
        ModelKind::DTree => FittedModel::Tree(forest::fit_single_tree(&x, targets, config, seed)?),
        ModelKind::RForest => FittedModel::Forest(Forest::fit(&x, targets, config, seed)?),
        ModelKind::Gbdt => FittedModel::Gbdt(Gbdt::fit(&x, targets, mode, config, seed)?),
        ModelKind::Svm => FittedModel::Svm(Svm::fit(&x, targets, mode, config)?),
    };
    Ok(TrainedPredictor {
        format: FORMAT.to_string(),
        kind,
        mode,
        config: config.clone(),
        feature_len: x.n_cols,
        model,
    })
}

impl TrainedPredictor {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn mode(&self) -> ModelMode {
        self.mode
    }

    pub fn config(&self) -> &ParamConfig {
        &self.config
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    /// Class-1 probability in classifier mode, predicted value otherwise.
    pub fn predict_score(&self, x: &FeatureVector) -> Result<f64> {
        if x.len() != self.feature_len {
            return Err(Error::LengthMismatch {
                expected: self.feature_len,
                actual: x.len(),
            });
        }
        Ok(self.score_unchecked(&x.to_f64()))
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let classifier = self.mode == ModelMode::Classifier;
        match &self.model {
            FittedModel::Tree(t) => t.predict(x),
            FittedModel::Forest(f) => f.predict(x),
            FittedModel::Gbdt(g) if classifier => sigmoid(g.raw_score(x)),
            FittedModel::Gbdt(g) => g.raw_score(x),
            FittedModel::Svm(s) if classifier => sigmoid(s.decision_value(x)),
            FittedModel::Svm(s) => s.decision_value(x),
        }
    }

    /// Which of `a` and `b` the predictor ranks higher under `protocol`.
    /// Ties go to `a`.
    pub fn predict_order(
        &self,
        protocol: Protocol,
        a: &FeatureVector,
        b: &FeatureVector,
    ) -> Result<Order> {
        self.check_protocol(protocol)?;
        let first = match protocol {
            Protocol::Proposed | Protocol::G2 => self.predict_score(&a.diff(b)?)? >= 0.5,
            Protocol::G1 => self.predict_score(&a.diff(b)?)? >= 0.0,
            Protocol::Baseline => self.predict_score(a)? >= self.predict_score(b)?,
        };
        Ok(if first { Order::First } else { Order::Second })
    }

    fn check_protocol(&self, protocol: Protocol) -> Result<()> {
        if protocol.mode() != self.mode {
            return Err(Error::ModeMismatch {
                mode: self.mode.to_string(),
                protocol: protocol.to_string(),
            });
        }
        Ok(())
    }

    /// Binds the predictor to a protocol for use as a [`PairRanker`].
    pub fn ranker(&self, protocol: Protocol) -> Result<ProtocolRanker> {
        self.check_protocol(protocol)?;
        Ok(ProtocolRanker {
            predictor: self.clone(),
            protocol,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("predictor serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: TrainedPredictor =
            serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))?;
        if p.format != FORMAT {
            return Err(Error::Decode(format!("unsupported format {:?}", p.format)));
        }
        p.config.validate(p.kind, p.mode)?;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// A predictor bound to the protocol it was trained under.
#[derive(Debug, Clone)]
pub struct ProtocolRanker {
    predictor: TrainedPredictor,
    protocol: Protocol,
}

impl ProtocolRanker {
    pub fn predictor(&self) -> &TrainedPredictor {
        &self.predictor
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }
}

impl PairRanker for ProtocolRanker {
    fn order(&self, a: &FeatureVector, b: &FeatureVector) -> Result<Order> {
        self.predictor.predict_order(self.protocol, a, b)
    }
}
