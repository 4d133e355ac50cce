//! Boosted multi-class trees producing softmax combination weights.
//!
//! Each round grows one regression tree per pool member on the gradient
//! and diagonal curvature of the training objective with respect to that
//! member's raw score. Two objectives are available:
//!
//! * weighted loss: `L_n = Σ_i w_{n,i} err_{n,i}` with `w_n = softmax(s_n)`,
//!   gradient `w_i (err_i - L_n)` and curvature `max(ε, w_i (1 - w_i) err_i)`;
//! * best class: softmax cross-entropy against the lowest-error member.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Node, Presorted, TreeParams};
use super::WeightVector;
use crate::error::{Error, Result};
use crate::forecasters::MethodId;
use crate::metrics::LossKind;

/// Curvature floor of the weighted-loss objective.
pub const HESSIAN_FLOOR: f64 = 1e-6;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Meta-learner input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    /// The nine demand features.
    #[default]
    Fide,
    /// Pairwise diversity of the pool's forecasts.
    Divide,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fide => "FIDE",
            Mode::Divide => "DIVIDE",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FIDE" => Ok(Mode::Fide),
            "DIVIDE" => Ok(Mode::Divide),
            _ => Err(Error::Validation(format!(
                "mode must be FIDE or DIVIDE, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TrainerMode {
    #[default]
    WeightedLoss,
    BestClass,
}

impl FromStr for TrainerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted-loss" => Ok(TrainerMode::WeightedLoss),
            "best-class" => Ok(TrainerMode::BestClass),
            _ => Err(Error::Validation(format!(
                "trainer must be weighted-loss or best-class, got {s:?}"
            ))),
        }
    }
}

/// Per-instance error normalisation before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RowScaling {
    None,
    /// Divide each row by its maximum.
    #[default]
    Maxnorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Minimum curvature sum in a child.
    pub min_child_weight: f64,
    /// Row fraction drawn per round.
    pub subsample: f64,
    /// Feature fraction drawn per tree.
    pub colsample: f64,
    /// L2 penalty on leaf values.
    pub reg_lambda: f64,
    pub seed: u64,
    pub holdout_fraction: f64,
    pub early_stopping_rounds: usize,
    pub early_stopping_tol: f64,
    pub scale_rows: RowScaling,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 3,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            reg_lambda: 1.0,
            seed: 0,
            holdout_fraction: 0.1,
            early_stopping_rounds: 10,
            early_stopping_tol: 1e-7,
            scale_rows: RowScaling::Maxnorm,
        }
    }
}

impl Hyperparams {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad("colsample must be in (0, 1]");
        }
        if !(self.min_child_weight >= 0.0 && self.reg_lambda >= 0.0) {
            return bad("min_child_weight and reg_lambda must be non-negative");
        }
        if !(0.0..0.5).contains(&self.holdout_fraction) {
            return bad("holdout_fraction must be in [0, 0.5)");
        }
        Ok(())
    }
}

/// Meta-learner input and target for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance {
    pub series_id: String,
    pub x: Vec<f64>,
    pub err: Vec<f64>,
}

/// What a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub mode: Mode,
    pub loss_kind: LossKind,
    pub trainer: TrainerMode,
    pub methods: Vec<MethodId>,
    /// Dimension of the input vector seen by `predict_weights`.
    pub input_dim: usize,
    /// Columns of the input actually used, if restricted.
    pub feature_subset: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub format_version: u32,
    #[serde(flatten)]
    pub spec: ModelSpec,
    pub hyperparams: Hyperparams,
    /// `trees[i]` holds the per-round trees of pool member `i`.
    pub trees: Vec<Vec<Node>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundLoss {
    pub round: usize,
    /// Mean objective on the training rows.
    pub train_objective: f64,
    /// Mean weighted loss on the training rows.
    pub train_weighted_loss: f64,
    /// Mean weighted loss on the holdout rows, when one exists.
    pub holdout_weighted_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub trace: Vec<RoundLoss>,
    pub n_train: usize,
    pub n_holdout: usize,
    pub dropped: Vec<String>,
    pub stopped_early: bool,
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Weighted loss `Σ w_i err_i` at raw scores `s`.
pub fn weighted_loss(scores: &[f64], err: &[f64]) -> f64 {
    softmax(scores).iter().zip(err).map(|(w, e)| w * e).sum()
}

/// Gradient and diagonal curvature of the weighted loss.
pub fn weighted_loss_grad_hess(scores: &[f64], err: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = softmax(scores);
    let loss: f64 = w.iter().zip(err).map(|(w, e)| w * e).sum();
    let grad = w.iter().zip(err).map(|(&w, &e)| w * (e - loss)).collect();
    let hess = w
        .iter()
        .zip(err)
        .map(|(&w, &e)| (w * (1.0 - w) * e).max(HESSIAN_FLOOR))
        .collect();
    (grad, hess)
}

fn best_class(err: &[f64]) -> usize {
    let mut k = 0;
    for (i, &e) in err.iter().enumerate() {
        if e < err[k] {
            k = i;
        }
    }
    k
}

fn cross_entropy(scores: &[f64], target: usize) -> f64 {
    -softmax(scores)[target].max(1e-300).ln()
}

fn cross_entropy_grad_hess(scores: &[f64], target: usize) -> (Vec<f64>, Vec<f64>) {
    let w = softmax(scores);
    let grad = w
        .iter()
        .enumerate()
        .map(|(i, &w)| w - if i == target { 1.0 } else { 0.0 })
        .collect();
    let hess = w.iter().map(|&w| (w * (1.0 - w)).max(HESSIAN_FLOOR)).collect();
    (grad, hess)
}

fn scale_row(err: &[f64], scaling: RowScaling) -> Vec<f64> {
    match scaling {
        RowScaling::None => err.to_vec(),
        RowScaling::Maxnorm => {
            let max = err.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                err.iter().map(|e| e / max).collect()
            } else {
                err.to_vec()
            }
        }
    }
}

fn project(x: &[f64], subset: Option<&[usize]>) -> Vec<f64> {
    match subset {
        Some(cols) => cols.iter().map(|&c| x[c]).collect(),
        None => x.to_vec(),
    }
}

impl MetaModel {
    /// A model with no trees; predicts uniform weights.
    pub fn untrained(spec: ModelSpec, hyperparams: Hyperparams) -> Self {
        let m = spec.methods.len();
        MetaModel {
            format_version: MODEL_FORMAT_VERSION,
            spec,
            hyperparams,
            trees: vec![Vec::new(); m],
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.spec.methods.len()
    }

    pub fn n_rounds(&self) -> usize {
        self.trees.first().map_or(0, Vec::len)
    }

    fn scores_projected(&self, x: &[f64]) -> Vec<f64> {
        self.trees
            .iter()
            .map(|trees| trees.iter().map(|t| t.predict(x)).sum())
            .collect()
    }

    pub fn raw_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                got: x.len(),
            });
        }
        Ok(self.scores_projected(&project(x, self.spec.feature_subset.as_deref())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MetaModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        if model.trees.len() != model.spec.methods.len() {
            return Err(Error::Validation(
                "model tree groups do not match its method list".into(),
            ));
        }
        Ok(model)
    }
}

/// Softmax of the summed tree outputs.
pub fn predict_weights(model: &MetaModel, x: &[f64]) -> Result<WeightVector> {
    Ok(WeightVector::new(softmax(&model.raw_scores(x)?)))
}

/// Trains a meta-model on `instances` whose `err` rows follow `spec.methods`.
pub fn train(
    instances: &[TrainingInstance],
    spec: ModelSpec,
    hp: &Hyperparams,
) -> Result<(MetaModel, TrainReport)> {
    hp.validate()?;
    let m = spec.methods.len();
    if m == 0 {
        return Err(Error::Validation("empty method pool".into()));
    }
    let mut dropped = Vec::new();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut errs: Vec<Vec<f64>> = Vec::new();
    for inst in instances {
        if inst.x.len() != spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.input_dim,
                got: inst.x.len(),
            });
        }
        if inst.err.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: inst.err.len(),
            });
        }
        let finite = inst.x.iter().chain(&inst.err).all(|v| v.is_finite());
        if !finite || inst.err.iter().all(|&e| e <= 0.0) {
            dropped.push(inst.series_id.clone());
            continue;
        }
        xs.push(project(&inst.x, spec.feature_subset.as_deref()));
        errs.push(scale_row(&inst.err, hp.scale_rows));
    }
    if xs.len() < 2 {
        return Err(Error::NoUsableSeries(format!(
            "{} training instances after filtering, need at least 2",
            xs.len()
        )));
    }
    if xs.windows(2).all(|w| w[0] == w[1]) {
        log::warn!("all feature vectors are identical; the model will learn constant weights");
    }

    // holdout split
    let n = xs.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    perm.shuffle(&mut rng);
    let n_hold = ((n as f64) * hp.holdout_fraction).floor() as usize;
    let n_hold = if n - n_hold >= 2 { n_hold } else { 0 };
    let mut is_holdout = vec![false; n];
    for &i in &perm[..n_hold] {
        is_holdout[i] = true;
    }
    let train_rows: Vec<usize> = (0..n).filter(|&i| !is_holdout[i]).collect();
    let hold_rows: Vec<usize> = (0..n).filter(|&i| is_holdout[i]).collect();

    let targets: Vec<usize> = errs.iter().map(|e| best_class(e)).collect();
    let dim = xs[0].len();
    let data = Presorted::new(&xs);
    let params = TreeParams {
        max_depth: hp.max_depth,
        min_child_weight: hp.min_child_weight,
        reg_lambda: hp.reg_lambda,
        learning_rate: hp.learning_rate,
    };

    let mut scores = vec![vec![0.0; m]; n];
    let mut trees: Vec<Vec<Node>> = vec![Vec::new(); m];
    let mut trace = Vec::new();
    let mut best_hold = f64::INFINITY;
    let mut best_round = 0usize;
    let mut stale = 0usize;
    let mut stopped_early = false;

    let mean_over = |rows: &[usize], f: &dyn Fn(usize) -> f64| -> f64 {
        rows.iter().map(|&r| f(r)).sum::<f64>() / rows.len() as f64
    };

    for round in 0..hp.n_rounds {
        let gh: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|r| match spec.trainer {
                TrainerMode::WeightedLoss => weighted_loss_grad_hess(&scores[r], &errs[r]),
                TrainerMode::BestClass => cross_entropy_grad_hess(&scores[r], targets[r]),
            })
            .collect();

        let mut active = train_rows.clone();
        if hp.subsample < 1.0 {
            active.shuffle(&mut rng);
            let keep = ((active.len() as f64) * hp.subsample).ceil().max(1.0) as usize;
            active.truncate(keep);
        }
        let mut assign = vec![None; n];
        for &r in &active {
            assign[r] = Some(0);
        }
        let tree_features: Vec<Vec<usize>> = (0..m)
            .map(|_| {
                let mut cols: Vec<usize> = (0..dim).collect();
                if hp.colsample < 1.0 {
                    cols.shuffle(&mut rng);
                    let keep = ((dim as f64) * hp.colsample).ceil().max(1.0) as usize;
                    cols.truncate(keep);
                    cols.sort_unstable();
                }
                cols
            })
            .collect();

        let new_trees: Vec<Node> = (0..m)
            .into_par_iter()
            .map(|i| {
                let g: Vec<f64> = gh.iter().map(|(g, _)| g[i]).collect();
                let h: Vec<f64> = gh.iter().map(|(_, h)| h[i]).collect();
                grow(&data, &g, &h, assign.clone(), &tree_features[i], &params)
            })
            .collect();

        scores.par_iter_mut().enumerate().for_each(|(r, s)| {
            for (i, t) in new_trees.iter().enumerate() {
                s[i] += t.predict(&xs[r]);
            }
        });
        for (group, t) in trees.iter_mut().zip(new_trees) {
            group.push(t);
        }

        let objective = |r: usize| match spec.trainer {
            TrainerMode::WeightedLoss => weighted_loss(&scores[r], &errs[r]),
            TrainerMode::BestClass => cross_entropy(&scores[r], targets[r]),
        };
        let wl = |r: usize| weighted_loss(&scores[r], &errs[r]);
        let holdout = (!hold_rows.is_empty()).then(|| mean_over(&hold_rows, &wl));
        trace.push(RoundLoss {
            round: round + 1,
            train_objective: mean_over(&train_rows, &objective),
            train_weighted_loss: mean_over(&train_rows, &wl),
            holdout_weighted_loss: holdout,
        });

        if let Some(h) = holdout {
            if h < best_hold - hp.early_stopping_tol {
                best_hold = h;
                best_round = round + 1;
                stale = 0;
            } else {
                stale += 1;
                if hp.early_stopping_rounds > 0 && stale >= hp.early_stopping_rounds {
                    stopped_early = true;
                    break;
                }
            }
        } else {
            best_round = round + 1;
        }
    }
    if stopped_early {
        for group in &mut trees {
            group.truncate(best_round);
        }
    }

    let input_dim = spec.input_dim;
    let model = MetaModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: ModelSpec { input_dim, ..spec },
        hyperparams: hp.clone(),
        trees,
    };
    let report = TrainReport {
        trace,
        n_train: train_rows.len(),
        n_holdout: hold_rows.len(),
        dropped,
        stopped_early,
    };
    Ok((model, report))
}

/// Total split gain per input column, normalised to sum to one; zeros when
/// the model has no splits.
pub fn feature_importance(model: &MetaModel) -> Vec<f64> {
    let used = model
        .spec
        .feature_subset
        .as_ref()
        .map_or(model.spec.input_dim, Vec::len);
    let mut gains = vec![0.0; used];
    for t in model.trees.iter().flatten() {
        t.add_gains(&mut gains);
    }
    let mut out = vec![0.0; model.spec.input_dim];
    match &model.spec.feature_subset {
        Some(cols) => {
            for (&c, g) in cols.iter().zip(&gains) {
                out[c] += g;
            }
        }
        None => out.copy_from_slice(&gains),
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        for v in &mut out {
            *v /= total;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    ByImportance,
    Random,
}

/// Subset of `k` input columns, sorted ascending.
///
/// `ByImportance` takes the `k` largest importances (ties to the lower
/// index); `Random` draws uniformly with the seed.
pub fn select_features(
    importances: &[f64],
    k: usize,
    strategy: SelectionStrategy,
    seed: u64,
) -> Result<Vec<usize>> {
    let dim = importances.len();
    if k == 0 || k > dim {
        return Err(Error::Validation(format!("feature count {k} outside 1..={dim}")));
    }
    let mut idx: Vec<usize> = (0..dim).collect();
    match strategy {
        SelectionStrategy::ByImportance => {
            idx.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
        }
        SelectionStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            idx.shuffle(&mut rng);
        }
    }
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx)
}
