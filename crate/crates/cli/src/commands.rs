//! Subcommand implementations: resolve the configuration, run the library
//! flow, then write every output only once the flow has succeeded.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use idcomb::combiner::Mode;
use idcomb::ingest::{read_csv, write_wide, Layout};
use idcomb::pipeline::{self, ModelBundle, RunConfig};
use idcomb::{Dataset, Error, Result};
use serde_json::json;

use crate::{Command, Common, EvaluateArgs, ForecastArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(c) => with_config(&c, ingest),
        Command::Features(c) => with_config(&c, features),
        Command::Diversity(c) => with_config(&c, diversity),
        Command::Classify(c) => with_config(&c, classify),
        Command::Train(c) => with_config(&c, train),
        Command::Forecast(a) => with_config(&a.common.clone(), |cfg| forecast(cfg, &a)),
        Command::Evaluate(a) => with_config(&a.common.clone(), |cfg| evaluate(cfg, &a)),
        Command::Pool(c) => with_config(&c, pool),
    }
}

fn parsed<T: std::str::FromStr<Err = Error>>(v: &Option<String>) -> Result<Option<T>> {
    v.as_deref().map(str::parse).transpose()
}

/// Config file (if any) overridden by the command-line flags.
pub fn resolve_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = parsed::<Layout>(&c.layout)? {
        cfg.layout = v;
    }
    if let Some(v) = parsed(&c.period)? {
        cfg.period = v;
    }
    if let Some(v) = c.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = parsed::<Mode>(&c.mode)? {
        cfg.mode = v;
    }
    if let Some(v) = parsed(&c.loss)? {
        cfg.loss = v;
    }
    if let Some(v) = parsed(&c.trainer)? {
        cfg.trainer = v;
    }
    if let Some(v) = parsed(&c.pooling)? {
        cfg.pooling = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    if c.production {
        cfg.production = true;
    }
    for (slot, flag) in [
        (&mut cfg.data, &c.data),
        (&mut cfg.model, &c.model),
        (&mut cfg.out, &c.out),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    Ok(cfg)
}

fn with_config(c: &Common, f: impl FnOnce(&RunConfig) -> Result<()> + Send) -> Result<()> {
    let cfg = resolve_config(c)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Error::Validation("threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| f(&cfg))
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Validation(format!("--{flag} is required")))
}

fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let path = required(&cfg.data, "data")?;
    let file = fs::File::open(path)?;
    let name = path
        .file_stem()
        .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    read_csv(file, &name, cfg.layout, cfg.period)
}

/// Outputs collected in memory and written together at the end.
#[derive(Default)]
struct Outputs(Vec<(String, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.0.push((name.to_string(), buf));
        Ok(())
    }

    fn add_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        self.add(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok(())
        })
    }

    fn write(self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in self.0 {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    required(&cfg.out, "out")
}

/// A closed stdout (e.g. piped into `head`) is not an error.
fn print_json(value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn ingest(cfg: &RunConfig) -> Result<()> {
    let ds = load_data(cfg)?;
    let lengths: Vec<usize> = ds.series().iter().map(|s| s.len()).collect();
    let summary = json!({
        "series": ds.len(),
        "period": cfg.period.to_string(),
        "min_length": lengths.iter().min(),
        "max_length": lengths.iter().max(),
        "observations": lengths.iter().sum::<usize>(),
    });
    if let Some(dir) = &cfg.out {
        let mut out = Outputs::default();
        out.add("series.csv", |buf| write_wide(&ds, buf))?;
        out.add_json("summary.json", &summary)?;
        out.write(dir)?;
    }
    print_json(&summary)
}

fn census_json(census: &[(idcomb::features::SbcClass, usize)]) -> serde_json::Value {
    census
        .iter()
        .map(|(c, n)| (c.to_string(), json!(n)))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn features(cfg: &RunConfig) -> Result<()> {
    let ds = load_data(cfg)?;
    let (rows, skipped) = pipeline::run_features(&ds);
    let census = pipeline::census(rows.iter().map(|r| r.class));
    let summary = json!({"series": ds.len(), "skipped": skipped, "census": census_json(&census)});
    let mut out = Outputs::default();
    out.add("features.csv", |buf| pipeline::write_features(&rows, buf))?;
    out.add_json("summary.json", &summary)?;
    out.write(out_dir(cfg)?)?;
    print_json(&summary)
}

fn diversity(cfg: &RunConfig) -> Result<()> {
    let ds = load_data(cfg)?;
    let (rows, skipped) = pipeline::run_diversity(&ds, cfg)?;
    let summary = json!({"series": ds.len(), "skipped": skipped});
    let mut out = Outputs::default();
    out.add("diversity.csv", |buf| pipeline::write_diversity(&rows, buf))?;
    out.add_json("summary.json", &summary)?;
    out.write(out_dir(cfg)?)?;
    print_json(&summary)
}

fn classify(cfg: &RunConfig) -> Result<()> {
    let ds = load_data(cfg)?;
    let (rows, skipped) = pipeline::run_classify(&ds);
    let census = pipeline::census(rows.iter().map(|r| r.3));
    let summary = json!({"series": ds.len(), "skipped": skipped, "census": census_json(&census)});
    if let Some(dir) = &cfg.out {
        let mut out = Outputs::default();
        out.add("classes.csv", |buf| pipeline::write_classes(&rows, buf))?;
        out.add_json("census.json", &summary)?;
        out.write(dir)?;
    }
    print_json(&summary)
}

fn train(cfg: &RunConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let ds = load_data(cfg)?;
    let result = pipeline::run_train(&ds, cfg)?;
    let summary = json!({
        "series": ds.len(),
        "trained_on": result.report.n_train,
        "holdout": result.report.n_holdout,
        "skipped": result.skipped.len(),
        "rounds": result.bundle.point.n_rounds(),
        "stopped_early": result.report.stopped_early,
        "pool": result.pool.kept.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "quantile_models": result.bundle.quantiles.len(),
    });
    let model_json = result.bundle.to_json()? + "\n";
    let mut out = Outputs::default();
    if cfg.model.is_none() {
        out.add("model.json", |buf| {
            buf.extend(model_json.as_bytes());
            Ok(())
        })?;
    }
    out.add("trace.csv", |buf| pipeline::write_trace(&result.report, buf))?;
    out.add("skipped.csv", |buf| pipeline::write_skipped(&result.skipped, buf))?;
    out.add("importance.csv", |buf| {
        pipeline::write_importance(&result.importance, buf)
    })?;
    out.add_json("pool.json", &serde_json::to_value(&result.pool)?)?;
    out.add_json("summary.json", &summary)?;
    out.write(dir)?;
    if let Some(path) = &cfg.model {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, model_json)?;
    }
    print_json(&summary)
}

fn load_model(cfg: &RunConfig) -> Result<ModelBundle> {
    let path = required(&cfg.model, "model")?;
    ModelBundle::from_json(&fs::read_to_string(path)?)
}

fn forecast(cfg: &RunConfig, args: &ForecastArgs) -> Result<()> {
    let dir = out_dir(cfg)?;
    let bundle = load_model(cfg)?;
    let ds = load_data(cfg)?;
    let run = pipeline::run_forecast(&ds, &bundle, cfg)?;
    let fallback = run.series.iter().filter(|s| s.fallback.is_some()).count();
    let summary = json!({
        "series": ds.len(),
        "forecast": run.series.len(),
        "dropped": run.dropped,
        "uniform_weights": fallback,
        "quantile_crossings": run.crossings,
        "production": cfg.production,
    });
    let mut out = Outputs::default();
    out.add("forecasts.csv", |buf| {
        pipeline::write_forecasts(&run, buf, args.with_methods)
    })?;
    if args.with_weights {
        out.add("weights.csv", |buf| pipeline::write_weights(&run, buf))?;
    }
    out.add_json("summary.json", &summary)?;
    out.write(dir)?;
    print_json(&summary)
}

fn evaluate(cfg: &RunConfig, args: &EvaluateArgs) -> Result<()> {
    let dir = out_dir(cfg)?;
    let ds = load_data(cfg)?;
    let table = pipeline::read_forecasts(fs::File::open(&args.forecasts)?)?;
    let eval = pipeline::run_evaluate(&ds, &table, cfg)?;
    let summary = json!({
        "series": ds.len(),
        "scored": eval.overall.first().map_or(0, |r| r.n_series),
        "excluded": eval.excluded,
        "overall": eval.overall,
    });
    let mut out = Outputs::default();
    out.add("metrics.csv", |buf| pipeline::write_metrics(&eval.overall, buf))?;
    out.add("metrics_by_class.csv", |buf| {
        pipeline::write_class_metrics(&eval.by_class, buf)
    })?;
    out.add_json("summary.json", &summary)?;
    out.write(dir)?;
    print_json(&summary)
}

fn pool(cfg: &RunConfig) -> Result<()> {
    let ds = load_data(cfg)?;
    let (selection, skipped) = pipeline::run_pool(&ds, cfg)?;
    let value = json!({"selection": selection, "skipped": skipped});
    if let Some(dir) = &cfg.out {
        let mut out = Outputs::default();
        out.add_json("pool.json", &value)?;
        out.write(dir)?;
    }
    print_json(&value)
}
