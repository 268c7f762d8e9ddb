use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng;
use crate::tuning::{ParamConfig, BOOTSTRAP, N_ESTIMATORS};

use super::matrix::Matrix;
use super::tree::{build_tree, BinnedMatrix, Tree, TreeParams};

/// Bagged CART trees. Member `i` draws from random stream `i` of the fit
/// seed, so member 0 of an unbootstrapped forest equals a single tree fit
/// with the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub(crate) fn fit(x: &Matrix, y: &[f64], config: &ParamConfig, seed: u64) -> Result<Self> {
        let params = TreeParams::from_config(config)?;
        let n_estimators = config.usize(N_ESTIMATORS)?;
        let bootstrap = config.flag(BOOTSTRAP)?;
        let binned = BinnedMatrix::new(x);
        let n = binned.n_rows();
        let trees = (0..n_estimators)
            .map(|i| {
                let mut stream = rng::stream(seed, i as u64);
                let sample: Vec<u32> = if bootstrap {
                    (0..n).map(|_| stream.random_range(0..n as u32)).collect()
                } else {
                    (0..n as u32).collect()
                };
                build_tree(&binned, y, sample, &params, &mut stream).tree
            })
            .collect();
        Ok(Forest { trees })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Mean of member predictions: class-1 frequency for classifiers,
    /// regression value otherwise.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Single tree, drawing from stream 0 of `seed`.
pub(crate) fn fit_single_tree(
    x: &Matrix,
    y: &[f64],
    config: &ParamConfig,
    seed: u64,
) -> Result<Tree> {
    let params = TreeParams::from_config(config)?;
    let binned = BinnedMatrix::new(x);
    let sample = (0..binned.n_rows() as u32).collect();
    Ok(build_tree(&binned, y, sample, &params, &mut rng::stream(seed, 0)).tree)
}
