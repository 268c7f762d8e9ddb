//! Gradient-boosted regression trees.
//!
//! Each round fits a regression tree to the negative gradient of the loss
//! and then replaces every leaf value by the exact minimizer of the loss
//! restricted to that leaf. Squared loss gives the mean residual; logistic
//! loss has no closed form and is minimized by safeguarded Newton steps on
//! `[-LEAF_BOUND, LEAF_BOUND]`. With a learning rate in (0, 1] the training
//! loss cannot increase from one round to the next, because the loss is
//! convex along each leaf's step and the step never passes the minimizer.

use serde::{Deserialize, Serialize};

use crate::dataset::sigmoid;
use crate::error::Result;
use crate::rng;
use crate::tuning::{ParamConfig, LEARNING_RATE, N_ESTIMATORS};

use super::matrix::Matrix;
use super::tree::{build_tree, BinnedMatrix, Tree, TreeParams};
use super::ModelMode;

/// Cap on a logistic leaf value; pure leaves would otherwise diverge.
pub const LEAF_BOUND: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    init: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
    /// Training loss after 0, 1, ..., n rounds.
    loss_history: Vec<f64>,
}

impl Gbdt {
    pub(crate) fn fit(
        x: &Matrix,
        y: &[f64],
        mode: ModelMode,
        config: &ParamConfig,
        seed: u64,
    ) -> Result<Self> {
        let params = TreeParams::from_config(config)?;
        let rounds = config.usize(N_ESTIMATORS)?;
        let learning_rate = config.real(LEARNING_RATE)?;
        let binned = BinnedMatrix::new(x);
        let n = y.len();
        let classifier = mode == ModelMode::Classifier;

        let mean = y.iter().sum::<f64>() / n as f64;
        let init = if classifier {
            let p = mean.clamp(1e-12, 1.0 - 1e-12);
            (p / (1.0 - p)).ln()
        } else {
            mean
        };
        let mut raw = vec![init; n];
        let loss = |raw: &[f64]| {
            if classifier {
                logistic_loss(y, raw)
            } else {
                squared_loss(y, raw)
            }
        };
        let mut loss_history = vec![loss(&raw)];
        let mut residual = vec![0.0; n];
        let mut trees = Vec::with_capacity(rounds);
        for m in 0..rounds {
            for i in 0..n {
                residual[i] = if classifier {
                    y[i] - sigmoid(raw[i])
                } else {
                    y[i] - raw[i]
                };
            }
            let sample = (0..n as u32).collect();
            let mut fit = build_tree(
                &binned,
                &residual,
                sample,
                &params,
                &mut rng::stream(seed, m as u64),
            );
            for &(node, start, end) in &fit.leaves {
                let rows = &fit.order[start..end];
                let gamma = if classifier {
                    logistic_leaf_value(y, &raw, rows)
                } else {
                    rows.iter().map(|&r| residual[r as usize]).sum::<f64>() / rows.len() as f64
                };
                fit.tree.set_leaf_value(node, gamma);
                for &r in rows {
                    raw[r as usize] += learning_rate * gamma;
                }
            }
            loss_history.push(loss(&raw));
            trees.push(fit.tree);
        }
        Ok(Gbdt {
            init,
            learning_rate,
            trees,
            loss_history,
        })
    }

    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.staged_raw_score(x, self.trees.len())
    }

    /// Additive score using only the first `rounds` trees.
    pub fn staged_raw_score(&self, x: &[f64], rounds: usize) -> f64 {
        self.trees[..rounds.min(self.trees.len())]
            .iter()
            .fold(self.init, |acc, t| acc + self.learning_rate * t.predict(x))
    }

    pub fn rounds(&self) -> usize {
        self.trees.len()
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }
}

/// Mean negative log-likelihood of 0/1 labels under `sigmoid(raw)`.
pub fn logistic_loss(y: &[f64], raw: &[f64]) -> f64 {
    y.iter()
        .zip(raw)
        .map(|(&t, &f)| softplus(f) - t * f)
        .sum::<f64>()
        / y.len() as f64
}

pub fn squared_loss(y: &[f64], raw: &[f64]) -> f64 {
    y.iter().zip(raw).map(|(t, f)| (t - f).powi(2)).sum::<f64>() / y.len() as f64
}

/// `ln(1 + e^f)` without overflow.
fn softplus(f: f64) -> f64 {
    if f > 0.0 {
        f + (-f).exp().ln_1p()
    } else {
        f.exp().ln_1p()
    }
}

/// argmin over `g` in `[-LEAF_BOUND, LEAF_BOUND]` of the logistic loss of
/// the leaf's rows after adding `g` to their scores.
fn logistic_leaf_value(y: &[f64], raw: &[f64], rows: &[u32]) -> f64 {
    // Derivative of the leaf loss; increasing in g.
    let slope = |g: f64| -> (f64, f64) {
        let (mut d1, mut d2) = (0.0, 0.0);
        for &r in rows {
            let p = sigmoid(raw[r as usize] + g);
            d1 += p - y[r as usize];
            d2 += p * (1.0 - p);
        }
        (d1, d2)
    };
    let (mut lo, mut hi) = (-LEAF_BOUND, LEAF_BOUND);
    if slope(lo).0 >= 0.0 {
        return lo;
    }
    if slope(hi).0 <= 0.0 {
        return hi;
    }
    let mut g = 0.0;
    for _ in 0..100 {
        let (d1, d2) = slope(g);
        if d1 == 0.0 {
            return g;
        }
        if d1 > 0.0 {
            hi = g;
        } else {
            lo = g;
        }
        let newton = if d2 > 0.0 { g - d1 / d2 } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            lo + (hi - lo) / 2.0
        };
        if (next - g).abs() <= 1e-12 * (1.0 + g.abs()) || hi - lo <= 1e-12 {
            return next;
        }
        g = next;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_value_minimizes_loss() {
        let y = [1.0, 0.0, 1.0, 1.0];
        let raw = [0.3, -0.2, 0.1, 0.0];
        let rows = [0u32, 1, 2, 3];
        let g = logistic_leaf_value(&y, &raw, &rows);
        let leaf_loss = |g: f64| {
            let shifted: Vec<f64> = raw.iter().map(|f| f + g).collect();
            logistic_loss(&y, &shifted)
        };
        for delta in [-1e-3, 1e-3, -0.1, 0.1] {
            assert!(leaf_loss(g) <= leaf_loss(g + delta));
        }
    }

    #[test]
    fn pure_leaf_hits_bound() {
        let g = logistic_leaf_value(&[1.0, 1.0], &[0.0, 0.0], &[0, 1]);
        assert_eq!(g, LEAF_BOUND);
        let g = logistic_leaf_value(&[0.0], &[0.0], &[0]);
        assert_eq!(g, -LEAF_BOUND);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
