//! `idcomb` command-line interface.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "idcomb",
    version,
    about = "Intermittent demand forecasting by learned forecast combination"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a demand CSV and write it back in wide layout.
    Ingest(Common),
    /// Nine demand features and the demand class of every series.
    Features(Common),
    /// Pairwise diversity of the pool's forecasts for every series.
    Diversity(Common),
    /// Demand class of every series and the class census.
    Classify(Common),
    /// Train the combination model.
    Train(Common),
    /// Forecast with a trained model.
    Forecast(ForecastArgs),
    /// Score the pool, the simple combinations and the learned combination.
    Evaluate(EvaluateArgs),
    /// Select a sub-pool and print the selection as JSON.
    Pool(Common),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Demand CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `wide` or `long`.
    #[arg(long)]
    pub layout: Option<String>,
    /// `monthly`, `daily` or a positive integer.
    #[arg(long)]
    pub period: Option<String>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// `FIDE` or `DIVIDE`.
    #[arg(long)]
    pub mode: Option<String>,
    /// `rmsse` or `spl@<u>`.
    #[arg(long)]
    pub loss: Option<String>,
    /// `weighted-loss` or `best-class`.
    #[arg(long)]
    pub trainer: Option<String>,
    /// `none`, `islands`, `screened` or `lasso`.
    #[arg(long)]
    pub pooling: Option<String>,
    /// Model bundle JSON (written by `train`, read by `forecast`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Forecast from the full history.
    #[arg(long)]
    pub production: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also write each pool member's forecasts.
    #[arg(long)]
    pub with_methods: bool,
    /// Also write the combination weights.
    #[arg(long)]
    pub with_weights: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Forecast CSV written by `forecast`.
    #[arg(long)]
    pub forecasts: PathBuf,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_DATA
            })
        }
    }
}
