//! Inner-window fits and meta-learner training sets.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::boost::{
    train, Hyperparams, MetaModel, Mode, ModelSpec, TrainReport, TrainerMode, TrainingInstance,
};
use crate::diversity::diversity_vector;
use crate::error::{Error, Result};
use crate::features::{compute_features, FeatureConfig};
use crate::forecasters::{forecast_all, ForecastMatrix, MethodId};
use crate::metrics::{rmsse, spl, LossKind};
use crate::quantiles::{quantile_forecast, QUANTILE_LEVELS};
use crate::scalar::Real;
use crate::series::{make_split, preprocess, Dataset, DemandSeries, Period};

/// Pool forecasts of one series over its inner window.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerFit {
    pub series_id: String,
    pub period: Period,
    /// Observations the pool was fitted on.
    pub history: Vec<f64>,
    /// Observations of the inner window.
    pub actual: Vec<f64>,
    pub matrix: ForecastMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    NoDemand,
    TooShort,
    UndefinedScale,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipReason::NoDemand => "no demand",
            SkipReason::TooShort => "too short",
            SkipReason::UndefinedScale => "undefined scale",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedSeries {
    pub series_id: String,
    pub reason: SkipReason,
}

/// Why a preprocessed series cannot contribute a training instance.
pub fn skip_reason(s: &DemandSeries<f64>, horizon: usize) -> Option<SkipReason> {
    let Ok(plan) = make_split(s, horizon) else {
        return Some(SkipReason::TooShort);
    };
    let history = &s.values()[plan.meta_train()];
    if history.len() < 2 || history.windows(2).all(|w| w[0] == w[1]) {
        return Some(SkipReason::UndefinedScale);
    }
    None
}

/// Fits the pool on each series' meta-training window and forecasts the
/// inner window. Series that cannot be scored are returned separately.
pub fn fit_inner_windows<T: Real>(ds: &Dataset<T>, horizon: usize) -> (Vec<InnerFit>, Vec<SkippedSeries>) {
    let results: Vec<std::result::Result<InnerFit, SkippedSeries>> = ds
        .series()
        .par_iter()
        .map(|s| {
            let skip = |reason| {
                log::info!("skipping series {}: {reason}", s.id());
                SkippedSeries {
                    series_id: s.id().to_string(),
                    reason,
                }
            };
            let s = preprocess(&s.cast::<f64>()).map_err(|_| skip(SkipReason::NoDemand))?;
            if let Some(reason) = skip_reason(&s, horizon) {
                return Err(skip(reason));
            }
            let plan = make_split(&s, horizon).expect("split checked");
            let history = s.values()[plan.meta_train()].to_vec();
            let matrix = forecast_all(&s.window(plan.meta_train()), horizon);
            Ok(InnerFit {
                series_id: s.id().to_string(),
                period: s.period(),
                actual: s.values()[plan.inner_test()].to_vec(),
                history,
                matrix,
            })
        })
        .collect();
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(f) => fits.push(f),
            Err(s) => skipped.push(s),
        }
    }
    (fits, skipped)
}

/// Quantile forecast rows of every method at level `u`.
pub fn quantile_matrix<T: Real>(fm: &ForecastMatrix<T>, u: T) -> Result<Vec<Vec<T>>> {
    fm.values
        .iter()
        .zip(&fm.residuals)
        .map(|(row, res)| Ok(quantile_forecast(row, res, u)?.values))
        .collect()
}

/// Meta-learner input of one fit for the given pool.
pub fn meta_input(fit: &InnerFit, mode: Mode, methods: &[MethodId]) -> Result<Vec<f64>> {
    meta_input_for(&fit.history, fit.period, &fit.matrix.restrict(methods), mode)
}

/// Meta-learner input from a history and the pool's forecasts made from it.
pub fn meta_input_for(
    history: &[f64],
    period: Period,
    fm: &ForecastMatrix<f64>,
    mode: Mode,
) -> Result<Vec<f64>> {
    match mode {
        Mode::Fide => Ok(compute_features(history, FeatureConfig::for_period(period))?
            .to_array()
            .to_vec()),
        Mode::Divide => Ok(diversity_vector(fm, history).values),
    }
}

/// Per-method inner-window loss for the given pool.
pub fn error_row(fit: &InnerFit, loss: LossKind, methods: &[MethodId]) -> Result<Vec<f64>> {
    let fm = fit.matrix.restrict(methods);
    match loss {
        LossKind::Rmsse => fm
            .values
            .iter()
            .map(|row| rmsse(&fit.history, row, &fit.actual))
            .collect(),
        LossKind::Spl(u) => quantile_matrix(&fm, u)?
            .iter()
            .map(|q| spl(&fit.history, q, &fit.actual, u))
            .collect(),
    }
}

pub fn build_instances(
    fits: &[InnerFit],
    mode: Mode,
    loss: LossKind,
    methods: &[MethodId],
) -> Result<Vec<TrainingInstance>> {
    fits.par_iter()
        .map(|fit| {
            Ok(TrainingInstance {
                series_id: fit.series_id.clone(),
                x: meta_input(fit, mode, methods)?,
                err: error_row(fit, loss, methods)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub instances: Vec<TrainingInstance>,
    pub skipped: Vec<SkippedSeries>,
}

/// Training instances over the full pool.
pub fn build_training_set<T: Real>(
    ds: &Dataset<T>,
    horizon: usize,
    mode: Mode,
    loss: LossKind,
) -> Result<TrainingSet> {
    let (fits, skipped) = fit_inner_windows(ds, horizon);
    let instances = build_instances(&fits, mode, loss, &MethodId::ALL)?;
    Ok(TrainingSet { instances, skipped })
}

/// One model per quantile level, each trained against the scaled pinball
/// loss of the base quantile forecasts.
pub fn train_quantile_models(
    fits: &[InnerFit],
    mode: Mode,
    trainer: TrainerMode,
    methods: &[MethodId],
    hp: &Hyperparams,
) -> Result<Vec<(MetaModel, TrainReport)>> {
    if fits.is_empty() {
        return Err(Error::NoUsableSeries("no series to train on".into()));
    }
    QUANTILE_LEVELS
        .iter()
        .map(|&u| {
            let loss = LossKind::Spl(u);
            let instances = build_instances(fits, mode, loss, methods)?;
            let spec = ModelSpec {
                mode,
                loss_kind: loss,
                trainer,
                methods: methods.to_vec(),
                input_dim: instances[0].x.len(),
                feature_subset: None,
            };
            train(&instances, spec, hp)
        })
        .collect()
}
