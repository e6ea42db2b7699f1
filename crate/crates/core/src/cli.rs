//! `motorclass` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error,
//! 3 numeric failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::band::Band;
use crate::classifiers::{ClassifierError, ClassifierKind};
use crate::config::{self, ConfigError, RankingSource, RunConfig, SplitUnit};
use crate::dataset::{self, Dataset, DatasetError};
use crate::eval::{self, EvalConfig, EvalError, EvalReport};
use crate::features::{self, FeatureError, FeatureScale};
use crate::fusion::FusionError;
use crate::stats::{self, Pairing, SignificanceMap, StatsError, TestLevel};

#[derive(Debug, Parser)]
#[command(name = "motorclass", version, about = "Left/right motor-attempt EEG classification")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for synthesis and fold assignment.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads over CV folds.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: u32,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (manifest + trial CSVs).
    Synth(SynthArgs),
    /// Load a dataset and report its validation status.
    Validate(InputArgs),
    /// Write the raw PSD feature matrix.
    Features(FeaturesArgs),
    /// Paired t-test map, band summary and mean PSD curves.
    Ttest(TtestArgs),
    /// Band summary from an existing significance CSV.
    Bands(BandsArgs),
    /// Cross-validate all classifiers and the rule fusion.
    Evaluate(ModelArgs),
    /// Fit scaler, models and fusion on a whole dataset.
    Train(ModelArgs),
    /// Aggregate several evaluation reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Manifest file, or the directory holding manifest.json.
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long)]
    pub trials_per_side: Option<usize>,
    #[arg(long)]
    pub asymmetry_db: Option<f64>,
    #[arg(long)]
    pub band: Option<Band>,
    /// Comma-separated channel names.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    #[arg(long)]
    pub noise_exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Linear,
    Db,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub scale: Option<ScaleArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    Epoch,
    Trial,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairingArg {
    Strict,
    Truncate,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,
    #[arg(long, value_enum)]
    pub pairing: Option<PairingArg>,
}

#[derive(Debug, Args)]
pub struct BandsArgs {
    /// significance.csv written by `ttest`.
    pub significance: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RankingArg {
    Holdout,
    Train,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Trial,
    Epoch,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated subset of svm,knn,nb,boosting,lda.
    #[arg(long, value_delimiter = ',')]
    pub classifiers: Option<Vec<ClassifierKind>>,
    #[arg(long, value_enum)]
    pub ranking: Option<RankingArg>,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// report.json files written by `evaluate`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(format!("[{}] {e}", e.code())),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Dsp { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::NonFinite | StatsError::BadDegreesOfFreedom(_) | StatsError::NoConvergence { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            ClassifierError::SingleClass | ClassifierError::TooFewRows { .. } => CliError::Data(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::BadK(_) | EvalError::NoClassifiers => CliError::Usage(e.to_string()),
            EvalError::TooFewUnits { .. } => CliError::Data(e.to_string()),
            EvalError::Features(f) => f.into(),
            EvalError::Classifier(c) => c.into(),
            EvalError::Fusion(FusionError::Classifier(c)) => c.into(),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Config file (or defaults) with the global flag overrides applied.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = match &cli.config {
        Some(path) => config::load_json(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.cv.seed = seed;
        cfg.synth.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.io.output = Some(out.clone());
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = effective_config(cli)?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(&mut cfg, a),
        Command::Validate(a) => cmd_validate(&mut cfg, a),
        Command::Features(a) => cmd_features(&mut cfg, a),
        Command::Ttest(a) => cmd_ttest(&mut cfg, a),
        Command::Bands(a) => cmd_bands(&mut cfg, a),
        Command::Evaluate(a) => cmd_evaluate(&mut cfg, a, cli.threads as usize),
        Command::Train(a) => cmd_train(&mut cfg, a),
        Command::Report(a) => cmd_report(&cfg, a),
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.io.output.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable value") + "\n";
    write_text(path, &text)
}

fn finish_csv(path: &Path, r: csv::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| io_err(path, e))
}

/// The effective configuration, written next to every command's outputs.
fn echo_config(dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    write_json(&dir.join("config.json"), cfg)
}

fn load_input(cfg: &mut RunConfig, input: &InputArgs) -> Result<Dataset, CliError> {
    let path = input
        .input
        .clone()
        .or_else(|| cfg.io.input.clone())
        .ok_or_else(|| CliError::Usage("no input dataset given (argument or io.input)".into()))?;
    let manifest = if path.is_dir() {
        path.join(dataset::MANIFEST_FILE)
    } else {
        path
    };
    cfg.io.input = Some(manifest.clone());
    let ds = dataset::load_dataset(&manifest)?;
    for w in ds.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(ds)
}

fn cmd_synth(cfg: &mut RunConfig, a: &SynthArgs) -> Result<(), CliError> {
    let s = &mut cfg.synth;
    if let Some(v) = &a.subject {
        s.subject_id = v.clone();
    }
    if let Some(v) = a.trials_per_side {
        s.n_trials_per_side = v;
    }
    if let Some(v) = a.asymmetry_db {
        s.asymmetry_db = v;
    }
    if let Some(v) = a.band {
        s.target_band = v;
    }
    if let Some(v) = &a.channels {
        s.target_channels = v.clone();
    }
    if let Some(v) = a.noise_exponent {
        s.noise_exponent = v;
    }
    let ds = dataset::generate_synthetic(&cfg.synth)?;
    let dir = output_dir(cfg)?;
    let manifest = ds.save(&dir)?;
    echo_config(&dir, cfg)?;
    println!("wrote {} trials to {}", ds.trials.len(), manifest.display());
    Ok(())
}

fn cmd_validate(cfg: &mut RunConfig, a: &InputArgs) -> Result<(), CliError> {
    let ds = load_input(cfg, a)?;
    println!(
        "subject {}: {} trials ({} right, {} left), valid",
        ds.subject_id,
        ds.trials.len(),
        ds.count(dataset::MotorLabel::Right),
        ds.count(dataset::MotorLabel::Left)
    );
    Ok(())
}

fn cmd_features(cfg: &mut RunConfig, a: &FeaturesArgs) -> Result<(), CliError> {
    if let Some(s) = a.scale {
        cfg.features.scale = match s {
            ScaleArg::Linear => FeatureScale::Linear,
            ScaleArg::Db => FeatureScale::Db,
        };
    }
    let ds = load_input(cfg, &a.input)?;
    let filter = cfg.filter.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let m = features::build_feature_matrix_with(&ds, &filter, &cfg.features)?;
    let dir = output_dir(cfg)?;
    let path = dir.join("features.csv");
    finish_csv(&path, m.write_csv(create(&path)?))?;
    echo_config(&dir, cfg)?;
    println!("wrote {} rows × {} features to {}", m.len(), features::N_FEATURES, path.display());
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<f64, CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(CliError::Usage(format!("alpha must be in (0, 1), got {alpha}")))
    }
}

fn cmd_ttest(cfg: &mut RunConfig, a: &TtestArgs) -> Result<(), CliError> {
    if let Some(v) = a.alpha {
        cfg.stats.alpha = v;
    }
    if let Some(v) = a.level {
        cfg.stats.level = match v {
            LevelArg::Epoch => TestLevel::Epoch,
            LevelArg::Trial => TestLevel::Trial,
        };
    }
    if let Some(v) = a.pairing {
        cfg.stats.pairing = match v {
            PairingArg::Strict => Pairing::Strict,
            PairingArg::Truncate => Pairing::TruncateToMin,
        };
    }
    check_alpha(cfg.stats.alpha)?;
    let ds = load_input(cfg, &a.input)?;
    let filter = cfg.filter.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let m = features::build_feature_matrix_with(&ds, &filter, &cfg.features)?;
    let map = stats::significance_map(&m, &cfg.stats)?;
    let bands = stats::band_aggregate(&map);
    let dir = output_dir(cfg)?;
    let sig = dir.join("significance.csv");
    finish_csv(&sig, map.write_csv(create(&sig)?))?;
    let band_path = dir.join("bands.csv");
    finish_csv(&band_path, bands.write_csv(create(&band_path)?))?;
    let psd = dir.join("mean_psd.csv");
    finish_csv(&psd, stats::write_mean_psd_csv(&m, create(&psd)?))?;
    echo_config(&dir, cfg)?;
    println!(
        "{} of {} cells significant at alpha {}",
        map.significant_count(),
        map.cells.len(),
        cfg.stats.alpha
    );
    Ok(())
}

fn cmd_bands(cfg: &mut RunConfig, a: &BandsArgs) -> Result<(), CliError> {
    if let Some(v) = a.alpha {
        cfg.stats.alpha = v;
    }
    check_alpha(cfg.stats.alpha)?;
    let file = File::open(&a.significance).map_err(|e| io_err(&a.significance, e))?;
    let mut map = SignificanceMap::read_csv(BufReader::new(file), cfg.stats.alpha)?;
    if a.alpha.is_some() {
        for c in &mut map.cells {
            c.significant = c.p < cfg.stats.alpha;
        }
    }
    let bands = stats::band_aggregate(&map);
    let dir = output_dir(cfg)?;
    let path = dir.join("bands.csv");
    finish_csv(&path, bands.write_csv(create(&path)?))?;
    echo_config(&dir, cfg)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn apply_model_args(cfg: &mut RunConfig, a: &ModelArgs) {
    if let Some(v) = &a.classifiers {
        let mut kinds = Vec::new();
        for k in v {
            if !kinds.contains(k) {
                kinds.push(*k);
            }
        }
        cfg.classifiers = kinds;
    }
    if let Some(v) = a.ranking {
        cfg.fusion.ranking_source = match v {
            RankingArg::Holdout => RankingSource::Holdout,
            RankingArg::Train => RankingSource::Train,
        };
    }
    if let Some(v) = a.split {
        cfg.cv.split = match v {
            SplitArg::Trial => SplitUnit::Trial,
            SplitArg::Epoch => SplitUnit::Epoch,
        };
    }
    if let Some(v) = a.folds {
        cfg.cv.k = v;
    }
}

fn cmd_evaluate(cfg: &mut RunConfig, a: &ModelArgs, threads: usize) -> Result<(), CliError> {
    apply_model_args(cfg, a);
    let ds = load_input(cfg, &a.input)?;
    let mut ecfg = EvalConfig::from(&*cfg);
    ecfg.threads = threads;
    let report = eval::run_cv(&ds, &ecfg)?;
    let dir = output_dir(cfg)?;
    write_text(&dir.join("report.json"), &report.to_json())?;
    let csv_path = dir.join("report.csv");
    finish_csv(&csv_path, report.write_table_csv(create(&csv_path)?))?;
    echo_config(&dir, cfg)?;
    print!("{}", report.summary_table());
    if let Some(e) = &report.fusion_error {
        eprintln!("warning: rule fusion skipped: {e}");
    }
    Ok(())
}

#[derive(Serialize)]
struct ModelFile<'a> {
    config: &'a RunConfig,
    subject_id: &'a str,
    system: &'a eval::FittedSystem,
}

fn cmd_train(cfg: &mut RunConfig, a: &ModelArgs) -> Result<(), CliError> {
    apply_model_args(cfg, a);
    if cfg.classifiers.is_empty() {
        return Err(CliError::Usage("no classifiers selected".into()));
    }
    let ds = load_input(cfg, &a.input)?;
    let ecfg = EvalConfig::from(&*cfg);
    ecfg.train.validate()?;
    let filter = cfg.filter.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let m = features::build_feature_matrix_with(&ds, &filter, &cfg.features)?;
    let system = eval::fit_system(&m.rows, &ecfg, cfg.cv.seed, &mut Vec::new())?;
    let dir = output_dir(cfg)?;
    let path = dir.join("model.json");
    write_json(
        &path,
        &ModelFile {
            config: cfg,
            subject_id: &ds.subject_id,
            system: &system,
        },
    )?;
    echo_config(&dir, cfg)?;
    if let Some(e) = &system.ensemble {
        let kinds: Vec<&str> = e.ranked_kinds().iter().map(|k| k.name()).collect();
        println!("fusion order: {}", kinds.join(" > "));
    }
    if let Some(e) = &system.fusion_error {
        eprintln!("warning: rule fusion skipped: {e}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(cfg: &RunConfig, a: &ReportArgs) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for path in &a.reports {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let r: EvalReport = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
        reports.push(r);
    }
    let batch = eval::aggregate_reports(&reports)?;
    let dir = output_dir(cfg)?;
    write_json(&dir.join("batch.json"), &batch)?;
    let path = dir.join("batch.csv");
    finish_csv(&path, eval::write_table_csv(&batch.over_cells, create(&path)?))?;
    echo_config(&dir, cfg)?;
    println!("{} subjects, mean ± std over subject × fold cells", batch.subjects.len());
    print!("{}", eval::summary_table(&batch.over_cells));
    let _ = std::io::stdout().flush();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "motorclass",
            "evaluate",
            "data",
            "--classifiers",
            "svm,lda",
            "--seed",
            "3",
            "--threads",
            "2",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(3));
        let Command::Evaluate(a) = &cli.command else { panic!() };
        assert_eq!(a.classifiers.as_deref(), Some(&[ClassifierKind::Svm, ClassifierKind::Lda][..]));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["motorclass", "nonsense"]), 1);
        assert_eq!(run(["motorclass", "synth", "--band", "gamma"]), 1);
        assert_eq!(run(["motorclass", "evaluate", "--threads", "0"]), 1);
    }

    #[test]
    fn seed_overrides_config() {
        let cli = Cli::try_parse_from(["motorclass", "--seed", "9", "synth"]).unwrap();
        let cfg = effective_config(&cli).unwrap();
        assert_eq!((cfg.cv.seed, cfg.synth.seed), (9, 9));
    }
}
