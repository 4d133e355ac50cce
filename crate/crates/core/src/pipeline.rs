//! End-to-end flows: meta-training, forecasting, evaluation and the
//! per-series reports, all driven by one [`RunConfig`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiner::{build_instances, meta_input_for};
use crate::combiner::{
    combine, combine_rows, feature_importance, fit_inner_windows, predict_weights, quantile_matrix,
    select_features, simple_combiners, skip_reason, train, train_quantile_models, Hyperparams, MetaModel,
    Mode, ModelSpec, SelectionStrategy, SkipReason, SkippedSeries, TrainReport, TrainerMode, WeightVector,
};
use crate::diversity::{diversity_vector, DiversityVector};
use crate::error::{Error, Result};
use crate::features::{
    compute_features, sbc_classify, FeatureConfig, FeatureVector, SbcClass, FEATURE_NAMES,
};
use crate::forecasters::{forecast_all, ForecastMatrix, MethodId};
use crate::ingest::Layout;
use crate::metrics::{rank_row, rmsse, spl, LossKind};
use crate::pooling::{select_pool, GapMode, PoolSelection, PoolingAlgorithm};
use crate::quantiles::QUANTILE_LEVELS;
use crate::series::{preprocess, Dataset, DemandSeries, Period};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSelection {
    pub k: usize,
    pub strategy: SelectionStrategy,
}

/// Settings shared by every subcommand.
///
/// The top-level `seed` drives all randomness and overrides
/// `hyperparams.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub period: Period,
    pub layout: Layout,
    pub mode: Mode,
    pub loss: LossKind,
    pub trainer: TrainerMode,
    pub pooling: PoolingAlgorithm,
    pub islands_gap_mode: GapMode,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    /// Also train one model per quantile level.
    pub quantile_models: bool,
    /// Retrain on a subset of the meta-learner inputs.
    pub feature_selection: Option<FeatureSelection>,
    /// Forecast from the full history instead of holding out the last
    /// `horizon` observations.
    pub production: bool,
    pub threads: Option<usize>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: 0,
            period: Period::Monthly,
            layout: Layout::Wide,
            mode: Mode::Fide,
            loss: LossKind::Rmsse,
            trainer: TrainerMode::WeightedLoss,
            pooling: PoolingAlgorithm::None,
            islands_gap_mode: GapMode::Gaps,
            hyperparams: Hyperparams::default(),
            seed: 0,
            quantile_models: false,
            feature_selection: None,
            production: false,
            threads: None,
            data: None,
            model: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("invalid config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Validation("horizon must be a positive integer".into()));
        }
        if self.period.seasonal_period() == 0 {
            return Err(Error::Validation("period must be positive".into()));
        }
        if let LossKind::Spl(u) = self.loss {
            if !(u > 0.0 && u < 1.0) {
                return Err(Error::Validation(format!("quantile level {u} outside (0, 1)")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Validation("threads must be positive".into()));
        }
        if let Some(sel) = &self.feature_selection {
            if sel.k == 0 {
                return Err(Error::Validation("feature_selection.k must be positive".into()));
            }
        }
        self.hyperparams.validate()
    }

    pub fn effective_hyperparams(&self) -> Hyperparams {
        Hyperparams {
            seed: self.seed,
            ..self.hyperparams.clone()
        }
    }
}

/// Point model plus optional per-quantile models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub point: MetaModel,
    #[serde(default)]
    pub quantiles: Vec<MetaModel>,
}

impl ModelBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: ModelBundle = serde_json::from_str(text)?;
        for m in std::iter::once(&bundle.point).chain(&bundle.quantiles) {
            MetaModel::from_json(&serde_json::to_string(m)?)?;
            if m.spec.methods != bundle.point.spec.methods || m.spec.mode != bundle.point.spec.mode {
                return Err(Error::Validation(
                    "quantile models disagree with the point model on mode or pool".into(),
                ));
            }
        }
        Ok(bundle)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub bundle: ModelBundle,
    pub report: TrainReport,
    pub pool: PoolSelection,
    pub skipped: Vec<SkippedSeries>,
    /// `(input name, normalised gain)` of the point model.
    pub importance: Vec<(String, f64)>,
}

fn input_names(mode: Mode, methods: &[MethodId]) -> Vec<String> {
    match mode {
        Mode::Fide => FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        Mode::Divide => DiversityVector::<f64>::column_names(methods),
    }
}

/// Fits the pool on every series' meta-training window, optionally shrinks
/// it, and trains the meta-learner on the inner-window losses.
pub fn run_train(ds: &Dataset, cfg: &RunConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let (fits, skipped) = fit_inner_windows(ds, cfg.horizon);
    if fits.len() < 2 {
        return Err(Error::NoUsableSeries(format!(
            "{} of {} series usable for meta-training at horizon {} (need at least 2)",
            fits.len(),
            ds.len(),
            cfg.horizon
        )));
    }
    let hp = cfg.effective_hyperparams();
    let pool = select_pool(&fits, &MethodId::ALL, cfg.pooling, cfg.islands_gap_mode, cfg.seed)?;
    let methods = pool.kept.clone();
    let instances = build_instances(&fits, cfg.mode, cfg.loss, &methods)?;
    let spec = ModelSpec {
        mode: cfg.mode,
        loss_kind: cfg.loss,
        trainer: cfg.trainer,
        methods: methods.clone(),
        input_dim: instances[0].x.len(),
        feature_subset: None,
    };
    let (mut point, mut report) = train(&instances, spec.clone(), &hp)?;
    if let Some(sel) = &cfg.feature_selection {
        let subset = select_features(&feature_importance(&point), sel.k, sel.strategy, cfg.seed)?;
        let restricted = ModelSpec {
            feature_subset: Some(subset),
            ..spec
        };
        (point, report) = train(&instances, restricted, &hp)?;
    }
    let quantiles = if cfg.quantile_models {
        train_quantile_models(&fits, cfg.mode, cfg.trainer, &methods, &hp)?
            .into_iter()
            .map(|(m, _)| m)
            .collect()
    } else {
        Vec::new()
    };
    let importance = input_names(cfg.mode, &methods)
        .into_iter()
        .zip(feature_importance(&point))
        .collect();
    Ok(TrainOutput {
        bundle: ModelBundle { point, quantiles },
        report,
        pool,
        skipped,
        importance,
    })
}

/// Forecasts of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesForecast {
    pub series_id: String,
    /// Pool forecasts, restricted to the model's pool.
    pub matrix: ForecastMatrix,
    pub weights: WeightVector,
    /// Uniform weights were used because the series has no scorable inner
    /// window.
    pub fallback: Option<SkipReason>,
    pub combined: Vec<f64>,
    /// `(u, combined quantile forecast)` per quantile model.
    pub quantiles: Vec<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRun {
    pub horizon: usize,
    pub methods: Vec<MethodId>,
    pub series: Vec<SeriesForecast>,
    /// Series that could not be forecast at all.
    pub dropped: Vec<SkippedSeries>,
    /// Steps at which a combined quantile forecast exceeds the next level's.
    pub crossings: usize,
}

/// History a forecast is made from: everything before the final window in
/// evaluation mode, the whole series in production mode.
fn forecast_history(s: &DemandSeries, horizon: usize, production: bool) -> Option<DemandSeries> {
    if production {
        Some(s.clone())
    } else if s.len() > horizon {
        Some(s.window(0..s.len() - horizon))
    } else {
        None
    }
}

pub fn run_forecast(ds: &Dataset, bundle: &ModelBundle, cfg: &RunConfig) -> Result<ForecastRun> {
    cfg.validate()?;
    let model = &bundle.point;
    if model.spec.mode != cfg.mode {
        return Err(Error::Validation(format!(
            "model mode {} does not match config mode {}",
            model.spec.mode, cfg.mode
        )));
    }
    let h = cfg.horizon;
    let methods = model.spec.methods.clone();
    let results: Vec<std::result::Result<SeriesForecast, SkippedSeries>> = ds
        .series()
        .par_iter()
        .map(|raw| {
            let drop = |reason| SkippedSeries {
                series_id: raw.id().to_string(),
                reason,
            };
            let Ok(s) = preprocess(raw) else {
                return Ok(Err(drop(SkipReason::NoDemand)));
            };
            let Some(history) = forecast_history(&s, h, cfg.production) else {
                return Ok(Err(drop(SkipReason::TooShort)));
            };
            let fallback = skip_reason(&s, h);
            let matrix = forecast_all(&history, h).restrict(&methods);
            let weights_for = |m: &MetaModel| -> Result<WeightVector> {
                if fallback.is_some() {
                    return Ok(WeightVector::uniform(methods.len()));
                }
                let x = meta_input_for(history.values(), history.period(), &matrix, m.spec.mode)?;
                predict_weights(m, &x)
            };
            let weights = weights_for(model)?;
            let combined = combine(&matrix, &weights)?;
            let quantiles = bundle
                .quantiles
                .iter()
                .map(|qm| {
                    let u = qm.spec.loss_kind.quantile().unwrap_or(0.5);
                    let rows = quantile_matrix(&matrix, u)?;
                    Ok((u, combine_rows(&rows, h, &weights_for(qm)?)?))
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(reason) = fallback {
                log::info!("series {}: uniform weights ({reason})", s.id());
            }
            Ok(Ok(SeriesForecast {
                series_id: s.id().to_string(),
                matrix,
                weights,
                fallback,
                combined,
                quantiles,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut series = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match r {
            Ok(f) => series.push(f),
            Err(d) => {
                log::warn!("series {} not forecast: {}", d.series_id, d.reason);
                dropped.push(d);
            }
        }
    }
    let crossings = series.iter().map(|f| count_crossings(&f.quantiles)).sum();
    Ok(ForecastRun {
        horizon: h,
        methods,
        series,
        dropped,
        crossings,
    })
}

fn count_crossings(quantiles: &[(f64, Vec<f64>)]) -> usize {
    let mut sorted: Vec<&(f64, Vec<f64>)> = quantiles.iter().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted
        .windows(2)
        .map(|p| p[0].1.iter().zip(&p[1].1).filter(|(lo, hi)| lo > hi).count())
        .sum()
}

fn quantile_kind(u: f64) -> String {
    format!("q{u:.3}")
}

fn horizon_header(first: &[&str], horizon: usize) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain((1..=horizon).map(|h| format!("h{h}")))
        .collect()
}

/// Forecast CSV `id,kind,h1..hH`: the combined row, then one row per pool
/// member when `with_methods`, then one row per quantile level.
pub fn write_forecasts<W: Write>(run: &ForecastRun, writer: W, with_methods: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(horizon_header(&["id", "kind"], run.horizon))?;
    let mut row = |id: &str, kind: &str, values: &[f64]| -> Result<()> {
        let mut rec = vec![id.to_string(), kind.to_string()];
        rec.extend(values.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
        Ok(())
    };
    for f in &run.series {
        row(&f.series_id, "combined", &f.combined)?;
        if with_methods {
            for (m, values) in f.matrix.methods.iter().zip(&f.matrix.values) {
                row(&f.series_id, m.name(), values)?;
            }
        }
        for (u, values) in &f.quantiles {
            row(&f.series_id, &quantile_kind(*u), values)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Weights CSV `id,fallback,<method>...`.
pub fn write_weights<W: Write>(run: &ForecastRun, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "fallback".to_string()];
    header.extend(run.methods.iter().map(|m| m.name().to_string()));
    wtr.write_record(&header)?;
    for f in &run.series {
        let mut rec = vec![
            f.series_id.clone(),
            f.fallback.map_or(String::new(), |r| r.to_string()),
        ];
        rec.extend(f.weights.as_slice().iter().map(|w| w.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Combined forecasts read back from a forecast CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastTable {
    pub ids: Vec<String>,
    pub combined: HashMap<String, Vec<f64>>,
    /// Keyed by series id then by the level's label (`q0.750`).
    pub quantiles: HashMap<String, BTreeMap<String, Vec<f64>>>,
}

pub fn read_forecasts<R: Read>(reader: R) -> Result<ForecastTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "kind" {
        return Err(Error::Malformed("forecast csv must start with id,kind,h1".into()));
    }
    let mut table = ForecastTable::default();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec[0].to_string();
        let values = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Malformed(format!("bad forecast value {v:?} for {id}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match &rec[1] {
            "combined" => {
                if table.combined.insert(id.clone(), values).is_some() {
                    return Err(Error::DuplicateId(id));
                }
                table.ids.push(id);
            }
            kind if kind.starts_with('q') => {
                table
                    .quantiles
                    .entry(id)
                    .or_default()
                    .insert(kind.to_string(), values);
            }
            _ => {}
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationRow {
    pub method: String,
    pub rmsse: f64,
    /// Mean SPL per quantile level; `None` when the forecasts lack it.
    pub spl: [Option<f64>; 4],
    pub avg_rank: f64,
    pub n_series: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub overall: Vec<EvaluationRow>,
    pub by_class: Vec<(SbcClass, Vec<EvaluationRow>)>,
    pub excluded: Vec<String>,
}

struct SeriesScores {
    class: SbcClass,
    rmsse: Vec<f64>,
    spl: Vec<[Option<f64>; 4]>,
}

/// Scores the pool, the simple combinations and the learned combination on
/// each series' final window.
pub fn run_evaluate(ds: &Dataset, forecasts: &ForecastTable, cfg: &RunConfig) -> Result<Evaluation> {
    cfg.validate()?;
    if cfg.production {
        return Err(Error::Validation(
            "evaluation needs forecasts made in evaluation mode".into(),
        ));
    }
    let h = cfg.horizon;
    let known: HashSet<&str> = ds.series().iter().map(|s| s.id()).collect();
    let unknown: Vec<String> = forecasts
        .ids
        .iter()
        .filter(|id| !known.contains(id.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownIds(unknown));
    }
    let labels: Vec<String> = MethodId::ALL
        .iter()
        .map(|m| m.name().to_string())
        .chain([
            "SA".to_string(),
            "Median".to_string(),
            cfg.mode.name().to_string(),
        ])
        .collect();

    let scored: Vec<std::result::Result<SeriesScores, String>> = ds
        .series()
        .par_iter()
        .map(|raw| -> Result<std::result::Result<SeriesScores, String>> {
            let excluded = || Ok(Err(raw.id().to_string()));
            let Ok(s) = preprocess(raw) else { return excluded() };
            if s.len() < h + 2 {
                return excluded();
            }
            let y = s.values();
            let (hist, actual) = y.split_at(y.len() - h);
            if hist.windows(2).all(|w| w[0] == w[1]) {
                return excluded();
            }
            let Some(comb) = forecasts.combined.get(s.id()) else {
                return Ok(Err(format!("missing:{}", s.id())));
            };
            if comb.len() != h {
                return Err(Error::DimensionMismatch {
                    expected: h,
                    got: comb.len(),
                });
            }
            let fm = forecast_all(&s.window(0..y.len() - h), h);
            let simple = simple_combiners(&fm);
            let mut points: Vec<&[f64]> = fm.values.iter().map(Vec::as_slice).collect();
            points.extend([simple.sa.as_slice(), simple.median.as_slice(), comb.as_slice()]);
            let rm = points
                .iter()
                .map(|p| rmsse(hist, p, actual))
                .collect::<Result<Vec<f64>>>()?;

            let mut spls = vec![[None; 4]; points.len()];
            for (k, &u) in QUANTILE_LEVELS.iter().enumerate() {
                let q = quantile_matrix(&fm, u)?;
                let qsa: Vec<f64> = (0..h)
                    .map(|t| stats::mean(&q.iter().map(|r| r[t]).collect::<Vec<_>>()))
                    .collect();
                let qmed: Vec<f64> = (0..h)
                    .map(|t| stats::median(&q.iter().map(|r| r[t]).collect::<Vec<_>>()))
                    .collect();
                let qcomb = forecasts
                    .quantiles
                    .get(s.id())
                    .and_then(|m| m.get(&quantile_kind(u)));
                let mut rows: Vec<Option<&[f64]>> = q.iter().map(|r| Some(r.as_slice())).collect();
                rows.extend([
                    Some(qsa.as_slice()),
                    Some(qmed.as_slice()),
                    qcomb.map(Vec::as_slice),
                ]);
                for (i, r) in rows.into_iter().enumerate() {
                    if let Some(r) = r {
                        spls[i][k] = Some(spl(hist, r, actual, u)?);
                    }
                }
            }
            let class = features_of(&s).map(|f| f.sbc_class()).unwrap_or(SbcClass::Smooth);
            Ok(Ok(SeriesScores {
                class,
                rmsse: rm,
                spl: spls,
            }))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut scores = Vec::new();
    let mut excluded = Vec::new();
    let mut missing = Vec::new();
    for r in scored {
        match r {
            Ok(s) => scores.push(s),
            Err(id) => match id.strip_prefix("missing:") {
                Some(m) => missing.push(m.to_string()),
                None => excluded.push(id),
            },
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing));
    }
    if scores.is_empty() {
        return Err(Error::NoUsableSeries("no series can be scored".into()));
    }
    let overall = summarise(&labels, &scores.iter().collect::<Vec<_>>());
    let by_class = SbcClass::ALL
        .iter()
        .filter_map(|&c| {
            let members: Vec<&SeriesScores> = scores.iter().filter(|s| s.class == c).collect();
            (!members.is_empty()).then(|| (c, summarise(&labels, &members)))
        })
        .collect();
    Ok(Evaluation {
        overall,
        by_class,
        excluded,
    })
}

fn summarise(labels: &[String], scores: &[&SeriesScores]) -> Vec<EvaluationRow> {
    let n = scores.len() as f64;
    let ranks: Vec<Vec<f64>> = scores.iter().map(|s| rank_row(&s.rmsse)).collect();
    labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let spl = std::array::from_fn(|k| {
                let vals: Option<Vec<f64>> = scores.iter().map(|s| s.spl[i][k]).collect();
                vals.map(|v| v.iter().sum::<f64>() / n)
            });
            EvaluationRow {
                method: label.clone(),
                rmsse: scores.iter().map(|s| s.rmsse[i]).sum::<f64>() / n,
                spl,
                avg_rank: ranks.iter().map(|r| r[i]).sum::<f64>() / n,
                n_series: scores.len(),
            }
        })
        .collect()
}

fn metric_header() -> Vec<String> {
    let mut h = vec!["method".to_string(), "rmsse".to_string()];
    h.extend(QUANTILE_LEVELS.iter().map(|u| format!("spl_{u:.3}")));
    h.push("avg_rank".into());
    h
}

fn metric_record(r: &EvaluationRow) -> Vec<String> {
    let mut rec = vec![r.method.clone(), r.rmsse.to_string()];
    rec.extend(r.spl.iter().map(|v| v.map_or(String::new(), |v| v.to_string())));
    rec.push(r.avg_rank.to_string());
    rec
}

/// Overall metrics CSV: one row per method, SA, Median and the combination.
pub fn write_metrics<W: Write>(rows: &[EvaluationRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(metric_header())?;
    for r in rows {
        wtr.write_record(metric_record(r))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Per-class metrics CSV with leading `class` and trailing `n_series`.
pub fn write_class_metrics<W: Write>(by_class: &[(SbcClass, Vec<EvaluationRow>)], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["class".to_string()];
    header.extend(metric_header());
    header.push("n_series".into());
    wtr.write_record(&header)?;
    for (class, rows) in by_class {
        for r in rows {
            let mut rec = vec![class.to_string()];
            rec.extend(metric_record(r));
            rec.push(r.n_series.to_string());
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn features_of(s: &DemandSeries) -> Result<FeatureVector> {
    compute_features(s.values(), FeatureConfig::for_period(s.period()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFeatures {
    pub series_id: String,
    pub features: FeatureVector,
    pub class: SbcClass,
}

/// Features of every preprocessed series; all-zero series are skipped.
pub fn run_features(ds: &Dataset) -> (Vec<SeriesFeatures>, Vec<String>) {
    let rows: Vec<std::result::Result<SeriesFeatures, String>> = ds
        .series()
        .par_iter()
        .map(|raw| {
            let s = preprocess(raw).map_err(|_| raw.id().to_string())?;
            let features = features_of(&s).map_err(|_| raw.id().to_string())?;
            Ok(SeriesFeatures {
                series_id: s.id().to_string(),
                class: features.sbc_class(),
                features,
            })
        })
        .collect();
    split_results(rows)
}

/// `(id, IDI, CV², class)` of one series.
pub type ClassRow = (String, f64, f64, SbcClass);

/// Demand class of every preprocessed series from its IDI and CV² alone.
pub fn run_classify(ds: &Dataset) -> (Vec<ClassRow>, Vec<String>) {
    let rows: Vec<std::result::Result<ClassRow, String>> = ds
        .series()
        .par_iter()
        .map(|raw| {
            let s = preprocess(raw).map_err(|_| raw.id().to_string())?;
            let y = s.values();
            let idi = crate::features::idi(y).map_err(|_| raw.id().to_string())?;
            let cv2 = crate::features::cv2(y).map_err(|_| raw.id().to_string())?;
            Ok((s.id().to_string(), idi, cv2, sbc_classify(idi, cv2)))
        })
        .collect();
    split_results(rows)
}

fn split_results<T>(rows: Vec<std::result::Result<T, String>>) -> (Vec<T>, Vec<String>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for r in rows {
        match r {
            Ok(v) => ok.push(v),
            Err(id) => {
                log::warn!("series {id} has no demand; skipped");
                bad.push(id);
            }
        }
    }
    (ok, bad)
}

/// Count per class, in [`SbcClass::ALL`] order.
pub fn census(classes: impl IntoIterator<Item = SbcClass>) -> Vec<(SbcClass, usize)> {
    let mut counts: BTreeMap<SbcClass, usize> = SbcClass::ALL.iter().map(|&c| (c, 0)).collect();
    for c in classes {
        *counts.entry(c).or_default() += 1;
    }
    SbcClass::ALL.iter().map(|c| (*c, counts[c])).collect()
}

pub fn write_features<W: Write>(rows: &[SeriesFeatures], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    header.push("class".into());
    wtr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.series_id.clone()];
        rec.extend(r.features.to_array().iter().map(|v| v.to_string()));
        rec.push(r.class.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_classes<W: Write>(rows: &[ClassRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "idi", "cv2", "class"])?;
    for (id, idi, cv2, class) in rows {
        wtr.write_record([id.clone(), idi.to_string(), cv2.to_string(), class.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Diversity of the full pool's forecasts of the final window (or of the
/// future, in production mode).
pub fn run_diversity(ds: &Dataset, cfg: &RunConfig) -> Result<(Vec<DiversityVector>, Vec<SkippedSeries>)> {
    cfg.validate()?;
    let rows: Vec<std::result::Result<DiversityVector, SkippedSeries>> = ds
        .series()
        .par_iter()
        .map(|raw| {
            let drop = |reason| SkippedSeries {
                series_id: raw.id().to_string(),
                reason,
            };
            let s = preprocess(raw).map_err(|_| drop(SkipReason::NoDemand))?;
            let history = forecast_history(&s, cfg.horizon, cfg.production)
                .ok_or_else(|| drop(SkipReason::TooShort))?;
            let fm = forecast_all(&history, cfg.horizon);
            Ok(diversity_vector(&fm, history.values()))
        })
        .collect();
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for r in rows {
        match r {
            Ok(v) => ok.push(v),
            Err(s) => skipped.push(s),
        }
    }
    Ok((ok, skipped))
}

pub fn write_diversity<W: Write>(rows: &[DiversityVector], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(DiversityVector::<f64>::column_names(&MethodId::ALL));
    wtr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.series_id.clone()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Pool selection over the meta-training fits.
pub fn run_pool(ds: &Dataset, cfg: &RunConfig) -> Result<(PoolSelection, Vec<SkippedSeries>)> {
    cfg.validate()?;
    let (fits, skipped) = fit_inner_windows(ds, cfg.horizon);
    if fits.is_empty() {
        return Err(Error::NoUsableSeries("no series usable for pooling".into()));
    }
    let sel = select_pool(&fits, &MethodId::ALL, cfg.pooling, cfg.islands_gap_mode, cfg.seed)?;
    Ok((sel, skipped))
}

/// Training loss trace CSV.
pub fn write_trace<W: Write>(report: &TrainReport, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "round",
        "train_objective",
        "train_weighted_loss",
        "holdout_weighted_loss",
    ])?;
    for r in &report.trace {
        wtr.write_record([
            r.round.to_string(),
            r.train_objective.to_string(),
            r.train_weighted_loss.to_string(),
            r.holdout_weighted_loss.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_skipped<W: Write>(skipped: &[SkippedSeries], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "reason"])?;
    for s in skipped {
        wtr.write_record([s.series_id.clone(), s.reason.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_importance<W: Write>(importance: &[(String, f64)], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["input", "importance"])?;
    for (name, v) in importance {
        wtr.write_record([name.clone(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
