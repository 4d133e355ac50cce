//! Combination of pool forecasts: the learned meta-model, the simple
//! average and median baselines, and the training-set construction.

mod boost;
mod training;
mod tree;

pub use boost::{
    feature_importance, predict_weights, select_features, softmax, train, weighted_loss,
    weighted_loss_grad_hess, Hyperparams, MetaModel, Mode, ModelSpec, RoundLoss, RowScaling,
    SelectionStrategy, TrainReport, TrainerMode, TrainingInstance, HESSIAN_FLOOR, MODEL_FORMAT_VERSION,
};
pub use training::{
    build_instances, build_training_set, error_row, fit_inner_windows, meta_input, meta_input_for,
    quantile_matrix, skip_reason, train_quantile_models, InnerFit, SkipReason, SkippedSeries, TrainingSet,
};
pub use tree::Node;

use crate::error::{Error, Result};
use crate::forecasters::ForecastMatrix;
use crate::scalar::Real;
use crate::stats;

/// Combination weights on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Self {
        WeightVector(w)
    }

    pub fn uniform(m: usize) -> Self {
        WeightVector(vec![1.0 / m as f64; m])
    }

    pub fn one_hot(m: usize, k: usize) -> Self {
        let mut w = vec![0.0; m];
        w[k] = 1.0;
        WeightVector(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-step weighted sum of the matrix rows.
pub fn combine<T: Real>(fm: &ForecastMatrix<T>, w: &WeightVector) -> Result<Vec<T>> {
    combine_rows(&fm.values, fm.horizon, w)
}

/// Per-step weighted sum of `rows`, each of length `horizon`.
pub fn combine_rows<T: Real>(rows: &[Vec<T>], horizon: usize, w: &WeightVector) -> Result<Vec<T>> {
    if rows.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: w.len(),
        });
    }
    Ok((0..horizon)
        .map(|h| {
            rows.iter()
                .zip(w.as_slice())
                .map(|(row, &wi)| T::lit(wi) * row[h])
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleCombinations<T> {
    pub sa: Vec<T>,
    pub median: Vec<T>,
}

/// Equal-weight mean and per-step median of the rows.
pub fn simple_combiners<T: Real>(fm: &ForecastMatrix<T>) -> SimpleCombinations<T> {
    let column = |h: usize| fm.values.iter().map(|r| r[h]).collect::<Vec<T>>();
    SimpleCombinations {
        sa: (0..fm.horizon).map(|h| stats::mean(&column(h))).collect(),
        median: (0..fm.horizon).map(|h| stats::median(&column(h))).collect(),
    }
}
