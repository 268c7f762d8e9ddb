//! Command-line driver. Every subcommand maps onto one library operation
//! and every report starts with a manifest sufficient to rerun it.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::dataset::{
    self, ArchitectureDataset, SyntheticSpace, DEFAULT_BIN_WIDTH, DEFAULT_TRAIN_FRACTION,
};
use crate::enas_sim::{self, Comparator, SearchConfig};
use crate::error::{Error, Result};
use crate::evaluation;
use crate::models::{ModelKind, TrainedPredictor};
use crate::protocol::Protocol;
use crate::tuning::{self, ParamConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pairank",
    version,
    about = "Pairwise-ranking performance predictors for architecture search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sorted train/test split; writes train.csv and test.csv into --out.
    Split(SplitArgs),
    /// Histogram of performances.
    Hist(HistArgs),
    /// Synthetic dataset.
    Gen(GenArgs),
    /// Random hyperparameter search with k-fold cross-validation.
    Tune(TuneArgs),
    /// Fit a predictor on a dataset and save it as JSON.
    Train(TrainArgs),
    /// Proposed protocol against the regression baseline.
    Evaluate(GridArgs),
    /// Proposed protocol against the two ablations.
    Ablate(GridArgs),
    /// Evolutionary search on a synthetic space.
    Simulate(SimulateArgs),
    /// Cost of training every candidate from scratch.
    Cost(CostArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    pub fraction: f64,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub width: f64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 31)]
    pub features: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "svm,gbdt,dtree,rforest", value_delimiter = ',')]
    pub models: Vec<ModelKind>,
    #[arg(long, default_value = "proposed")]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, alias = "models")]
    pub model: ModelKind,
    #[arg(long, default_value = "proposed")]
    pub protocol: Protocol,
    /// Space-separated `key=value` hyperparameters; tuned when absent.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "svm,gbdt,dtree,rforest", value_delimiter = ',')]
    pub models: Vec<ModelKind>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Genes in the synthetic space.
    #[arg(long, default_value_t = 8)]
    pub features: usize,
    /// Seed of the synthetic space.
    #[arg(long, default_value_t = 0)]
    pub space_seed: u64,
    #[arg(long, default_value_t = 20)]
    pub population: usize,
    #[arg(long, default_value_t = 30)]
    pub generations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub mutation: f64,
    #[arg(long, default_value_t = 0.9)]
    pub crossover: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Predictor file; selection uses the oracle when absent.
    #[arg(long)]
    pub predictor: Option<PathBuf>,
    #[arg(long, default_value = "proposed")]
    pub protocol: Protocol,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long, default_value_t = 50_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 128)]
    pub batch: u64,
    #[arg(long, default_value_t = 500)]
    pub epochs: u64,
    #[arg(long, default_value_t = 2.0)]
    pub minutes_per_epoch: f64,
    #[arg(long, default_value_t = 1000)]
    pub individuals: u64,
    #[arg(long, default_value_t = 1)]
    pub gpus: u64,
}

/// Provenance block written at the top of every report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seeds: Vec<(String, u64)>,
    pub data_sha256: Option<String>,
    pub version: String,
}

impl RunManifest {
    fn new(command: &str, args: &[String]) -> Self {
        RunManifest {
            command: command.to_string(),
            args: args.to_vec(),
            seeds: Vec::new(),
            data_sha256: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.push((name.to_string(), value));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "manifest.tool=pairank {}", self.version);
        let _ = writeln!(out, "manifest.command={}", self.command);
        let _ = writeln!(out, "manifest.args={}", self.args.join(" "));
        for (name, value) in &self.seeds {
            let _ = writeln!(out, "manifest.{name}={value}");
        }
        if let Some(sum) = &self.data_sha256 {
            let _ = writeln!(out, "manifest.data_sha256={sum}");
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn load_data(path: &Path, manifest: &mut RunManifest) -> Result<ArchitectureDataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    manifest.data_sha256 = Some(sha256_hex(&bytes));
    let text =
        String::from_utf8(bytes).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    ArchitectureDataset::parse(&text)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Parses `args` (without the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let raw: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let argv = std::iter::once(OsString::from("pairank")).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(cli.command, &raw) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::InvalidConfig(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        }
    }
}

/// Runs a parsed command and returns what it prints.
pub fn execute(command: Command, raw: &[String]) -> Result<String> {
    match command {
        Command::Split(a) => split(a, raw),
        Command::Hist(a) => hist(a, raw),
        Command::Gen(a) => gen(a, raw),
        Command::Tune(a) => tune(a, raw),
        Command::Train(a) => train(a, raw),
        Command::Evaluate(a) => grid(a, raw, false),
        Command::Ablate(a) => grid(a, raw, true),
        Command::Simulate(a) => simulate(a, raw),
        Command::Cost(a) => cost(a, raw),
    }
}

fn split(a: SplitArgs, raw: &[String]) -> Result<String> {
    let mut manifest = RunManifest::new("split", raw);
    let data = load_data(&a.data, &mut manifest)?;
    let (train, test) = data.sorted_split(a.fraction)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    train.save(a.out.join("train.csv"))?;
    test.save(a.out.join("test.csv"))?;
    let mut out = manifest.render();
    let _ = writeln!(out, "train={}", train.len());
    let _ = writeln!(out, "test={}", test.len());
    Ok(out)
}

fn hist(a: HistArgs, raw: &[String]) -> Result<String> {
    let mut manifest = RunManifest::new("hist", raw);
    let data = load_data(&a.data, &mut manifest)?;
    let csv = data.performance_histogram(a.width)?.to_csv_string();
    match a.out {
        Some(path) => {
            write_file(&path, &csv)?;
            Ok(manifest.render())
        }
        None => Ok(csv),
    }
}

fn gen(a: GenArgs, raw: &[String]) -> Result<String> {
    let data = dataset::generate_synthetic(a.n, a.features, a.seed, a.noise)?;
    let csv = data.to_csv_string();
    match a.out {
        Some(path) => {
            write_file(&path, &csv)?;
            Ok(RunManifest::new("gen", raw).seed("seed", a.seed).render())
        }
        None => Ok(csv),
    }
}

fn tune(a: TuneArgs, raw: &[String]) -> Result<String> {
    let mut manifest = RunManifest::new("tune", raw).seed("seed", a.seed);
    let data = load_data(&a.data, &mut manifest)?;
    let mut out = manifest.render();
    for &kind in &a.models {
        let search = tuning::random_search(kind, a.protocol, &data, a.trials, a.folds, a.seed)?;
        let _ = writeln!(out, "model={kind} protocol={}", a.protocol);
        out.push_str(&search.history_lines());
        let best = search.best_result();
        let _ = writeln!(
            out,
            "best trial={} mean={} {}",
            search.best_index, best.mean_score, search.best
        );
    }
    emit(out, a.out.as_deref())
}

fn train(a: TrainArgs, raw: &[String]) -> Result<String> {
    let mut manifest = RunManifest::new("train", raw).seed("seed", a.seed);
    let data = load_data(&a.data, &mut manifest)?;
    let config = match &a.config {
        Some(text) => ParamConfig::parse(text)?,
        None => tuning::random_search(a.model, a.protocol, &data, a.trials, a.folds, a.seed)?.best,
    };
    let predictor = tuning::fit_protocol(a.model, &config, a.protocol, &data, a.seed)?;
    predictor.save(&a.out)?;
    let mut out = manifest.render();
    let _ = writeln!(
        out,
        "model={} mode={} protocol={}",
        a.model,
        a.protocol.mode(),
        a.protocol
    );
    let _ = writeln!(out, "config={config}");
    let _ = writeln!(out, "predictor={}", a.out.display());
    Ok(out)
}

fn grid(a: GridArgs, raw: &[String], ablation: bool) -> Result<String> {
    let command = if ablation { "ablate" } else { "evaluate" };
    let mut manifest = RunManifest::new(command, raw).seed("seed", a.seed);
    let data = load_data(&a.data, &mut manifest)?;
    let name = dataset_name(&a.data);
    let report = if ablation {
        evaluation::run_ablation(&data, &name, &a.models, a.trials, a.folds, a.seed)?
    } else {
        evaluation::run_comparison(&data, &name, &a.models, a.trials, a.folds, a.seed)?
    };
    let mut out = manifest.render();
    out.push('\n');
    out.push_str(&report.to_table());
    out.push('\n');
    out.push_str(&report.to_key_values());
    emit(out, a.out.as_deref())
}

fn simulate(a: SimulateArgs, raw: &[String]) -> Result<String> {
    let mut manifest = RunManifest::new("simulate", raw)
        .seed("seed", a.seed)
        .seed("space_seed", a.space_seed);
    let space = SyntheticSpace::new(a.features, a.space_seed)?;
    let config = SearchConfig {
        population: a.population,
        generations: a.generations,
        mutation: a.mutation,
        crossover: a.crossover,
        seed: a.seed,
    };
    let outcome = match &a.predictor {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            manifest.data_sha256 = Some(sha256_hex(&bytes));
            let text = String::from_utf8(bytes).map_err(|e| Error::Decode(e.to_string()))?;
            let predictor = TrainedPredictor::from_json(&text)?;
            if predictor.feature_len() != a.features {
                return Err(Error::LengthMismatch {
                    expected: a.features,
                    actual: predictor.feature_len(),
                });
            }
            let ranker = predictor.ranker(a.protocol)?;
            enas_sim::evolve(&config, &space, &Comparator::Predictor(&ranker))?
        }
        None => enas_sim::evolve(&config, &space, &Comparator::Oracle(&space))?,
    };
    let mut out = manifest.render();
    out.push_str(&outcome.log_lines());
    let _ = writeln!(out, "optimum={}", space.performance(&space.optimum()));
    emit(out, a.out.as_deref())
}

fn cost(a: CostArgs, raw: &[String]) -> Result<String> {
    let c = enas_sim::estimate_cost(
        a.samples,
        a.batch,
        a.epochs,
        a.minutes_per_epoch,
        a.individuals,
        a.gpus,
    )?;
    let mut out = RunManifest::new("cost", raw).render();
    let _ = writeln!(out, "batches_per_epoch={}", c.batches_per_epoch);
    let _ = writeln!(
        out,
        "train_steps_per_individual={}",
        c.train_steps_per_individual
    );
    let _ = writeln!(out, "hours_per_individual={:.2}", c.hours_per_individual);
    let _ = writeln!(out, "total_days={:.2}", c.total_days);
    Ok(out)
}

fn emit(text: String, out: Option<&Path>) -> Result<String> {
    if let Some(path) = out {
        write_file(path, &text)?;
    }
    Ok(text)
}
