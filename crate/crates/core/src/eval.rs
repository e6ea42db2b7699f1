//! Stratified k-fold cross-validation, confusion-matrix metrics, and
//! per-classifier mean ± std reports.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{self, ClassifierError, ClassifierKind, TrainedModel, POSITIVE_CLASS};
use crate::config::{FilterConfig, FusionConfig, RankingSource, RunConfig, SplitUnit};
use crate::dataset::{Dataset, MotorLabel};
use crate::dsp::DspError;
use crate::features::{self, FeatureError, FeatureOptions, FeatureRow, Origin, Scaler};
use crate::fusion::{self, FusionError, RankingEntry, RuleEnsemble, ENSEMBLE_SIZE};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("{label:?} side has {got} units, need at least {need} for {k}-fold CV")]
    TooFewUnits { label: MotorLabel, got: usize, need: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    BadK(usize),
    #[error("no classifiers selected")]
    NoClassifiers,
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

/// Unit of fold assignment: a whole trial, or one epoch of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FoldKey {
    pub trial_id: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epoch: Option<u8>,
}

impl FoldKey {
    pub fn of(origin: &Origin, unit: SplitUnit) -> FoldKey {
        FoldKey {
            trial_id: origin.trial_id,
            epoch: match unit {
                SplitUnit::Trial => None,
                SplitUnit::Epoch => Some(origin.epoch),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub unit: SplitUnit,
    /// `right[f]` lists the right-side units in fold f.
    pub right: Vec<Vec<FoldKey>>,
    pub left: Vec<Vec<FoldKey>>,
}

impl FoldPlan {
    pub fn fold_index(&self) -> HashMap<FoldKey, usize> {
        let mut map = HashMap::new();
        for side in [&self.right, &self.left] {
            for (f, keys) in side.iter().enumerate() {
                for key in keys {
                    map.insert(*key, f);
                }
            }
        }
        map
    }

    pub fn test_keys(&self, fold: usize) -> Vec<FoldKey> {
        self.right[fold].iter().chain(&self.left[fold]).copied().collect()
    }
}

/// Seeded shuffle of `keys`, then round-robin into `k` groups.
fn deal(keys: &[FoldKey], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<FoldKey>> {
    let mut shuffled = keys.to_vec();
    shuffled.shuffle(rng);
    let mut folds = vec![Vec::new(); k];
    for (i, key) in shuffled.into_iter().enumerate() {
        folds[i % k].push(key);
    }
    folds
}

fn side_keys(dataset: &Dataset, label: MotorLabel, unit: SplitUnit) -> Vec<FoldKey> {
    let mut keys = Vec::new();
    for t in dataset.trials.iter().filter(|t| t.label == label) {
        match unit {
            SplitUnit::Trial => keys.push(FoldKey {
                trial_id: t.trial_id,
                epoch: None,
            }),
            SplitUnit::Epoch => keys.extend((0..features::EPOCHS_PER_TRIAL as u8).map(|e| FoldKey {
                trial_id: t.trial_id,
                epoch: Some(e),
            })),
        }
    }
    keys
}

/// Trial-level stratified folds.
pub fn make_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    make_folds_by(dataset, k, seed, SplitUnit::Trial)
}

pub fn make_folds_by(dataset: &Dataset, k: usize, seed: u64, unit: SplitUnit) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::BadK(k));
    }
    let right = side_keys(dataset, MotorLabel::Right, unit);
    let left = side_keys(dataset, MotorLabel::Left, unit);
    for (label, keys) in [(MotorLabel::Right, &right), (MotorLabel::Left, &left)] {
        if keys.len() < k {
            return Err(EvalError::TooFewUnits {
                label,
                got: keys.len(),
                need: k,
                k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let right = deal(&right, k, &mut rng);
    let left = deal(&left, k, &mut rng);
    Ok(FoldPlan {
        k,
        seed,
        unit,
        right,
        left,
    })
}

/// Counts with Right as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: MotorLabel, predicted: MotorLabel) {
        match (truth == POSITIVE_CLASS, predicted == POSITIVE_CLASS) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The matrix seen with the other class as positive.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn from_predictions(truth: &[MotorLabel], predicted: &[MotorLabel]) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::default();
        for (t, p) in truth.iter().zip(predicted) {
            cm.add(*t, *p);
        }
        cm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Set when any ratio was 0/0 and reported as 0.
    pub degenerate: bool,
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| {
        if den == 0.0 {
            degenerate = true;
            0.0
        } else {
            num / den
        }
    };
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    let accuracy = (tp + tn) / total as f64;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f_score = ratio(2.0 * precision * recall, precision + recall);
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f_score,
        degenerate,
    })
}

/// A system evaluated by the CV harness: one classifier, or the rule fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Svm,
    Knn,
    NaiveBayes,
    Boosting,
    Lda,
    Rule,
}

impl System {
    pub fn single(kind: ClassifierKind) -> System {
        match kind {
            ClassifierKind::Svm => System::Svm,
            ClassifierKind::Knn => System::Knn,
            ClassifierKind::NaiveBayes => System::NaiveBayes,
            ClassifierKind::Boosting => System::Boosting,
            ClassifierKind::Lda => System::Lda,
        }
    }

    pub fn kind(self) -> Option<ClassifierKind> {
        match self {
            System::Svm => Some(ClassifierKind::Svm),
            System::Knn => Some(ClassifierKind::Knn),
            System::NaiveBayes => Some(ClassifierKind::NaiveBayes),
            System::Boosting => Some(ClassifierKind::Boosting),
            System::Lda => Some(ClassifierKind::Lda),
            System::Rule => None,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self.kind() {
            Some(k) => k.display_name(),
            None => "A Rule Classifier",
        }
    }
}

/// Mean and sample standard deviation, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample (n − 1) standard deviation; std is 0 for one value.
pub fn mean_std(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    if values.is_empty() {
        return Summary { mean: 0.0, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Summary { mean, std }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub kind: System,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub f_score_mean: f64,
    pub f_score_std: f64,
    pub per_fold: Vec<ConfusionMatrix>,
    pub degenerate_folds: usize,
}

impl ClassifierReport {
    /// Recomputes every summary from the confusion matrices.
    pub fn from_cells(kind: System, per_fold: Vec<ConfusionMatrix>) -> Result<ClassifierReport, EvalError> {
        let metrics = per_fold.iter().map(compute_metrics).collect::<Result<Vec<_>, _>>()?;
        let pct = |f: fn(&Metrics) -> f64| mean_std(&metrics.iter().map(|m| 100.0 * f(m)).collect::<Vec<_>>());
        let acc = pct(|m| m.accuracy);
        let prec = pct(|m| m.precision);
        let rec = pct(|m| m.recall);
        let f = pct(|m| m.f_score);
        Ok(ClassifierReport {
            kind,
            accuracy_mean: acc.mean,
            accuracy_std: acc.std,
            precision_mean: prec.mean,
            precision_std: prec.std,
            recall_mean: rec.mean,
            recall_std: rec.std,
            f_score_mean: f.mean,
            f_score_std: f.std,
            degenerate_folds: metrics.iter().filter(|m| m.degenerate).count(),
            per_fold,
        })
    }
}

/// Settings consumed by [`run_cv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub filter: FilterConfig,
    pub features: FeatureOptions,
    pub train: classifiers::TrainConfig,
    pub k: usize,
    pub seed: u64,
    pub split: SplitUnit,
    pub fusion: FusionConfig,
    pub classifiers: Vec<ClassifierKind>,
    /// Worker threads over folds; results do not depend on it.
    #[serde(skip, default = "one_thread")]
    pub threads: usize,
}

fn one_thread() -> usize {
    1
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig::from(&RunConfig::default())
    }
}

impl From<&RunConfig> for EvalConfig {
    fn from(cfg: &RunConfig) -> Self {
        EvalConfig {
            filter: cfg.filter.clone(),
            features: cfg.features,
            train: cfg.train.clone(),
            k: cfg.cv.k,
            seed: cfg.cv.seed,
            split: cfg.cv.split,
            fusion: cfg.fusion.clone(),
            classifiers: cfg.classifiers.clone(),
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subject_id: String,
    pub seed: u64,
    pub config: EvalConfig,
    pub classifiers: Vec<ClassifierReport>,
    /// Per fold: candidates in rank order with their ranking accuracy.
    pub rankings: Vec<Vec<RankingEntry>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fusion_error: Option<String>,
}

impl EvalReport {
    pub fn get(&self, system: System) -> Option<&ClassifierReport> {
        self.classifiers.iter().find(|c| c.kind == system)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn write_table_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_table_csv(&self.classifiers, out)
    }

    pub fn summary_table(&self) -> String {
        summary_table(&self.classifiers)
    }
}

/// Table of `mean ± std` rows, one per system.
pub fn summary_table(rows: &[ClassifierReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<30} {:>15} {:>15} {:>15} {:>15}",
        "Classifier (%)", "Accuracy", "Precision", "Recall", "F-score"
    );
    for r in rows {
        let cell = |m: f64, sd: f64| format!("{m:.2} ± {sd:.2}");
        let _ = writeln!(
            s,
            "{:<30} {:>15} {:>15} {:>15} {:>15}",
            r.kind.display_name(),
            cell(r.accuracy_mean, r.accuracy_std),
            cell(r.precision_mean, r.precision_std),
            cell(r.recall_mean, r.recall_std),
            cell(r.f_score_mean, r.f_score_std)
        );
    }
    s
}

pub fn write_table_csv<W: Write>(rows: &[ClassifierReport], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "classifier",
        "accuracy_mean",
        "accuracy_std",
        "precision_mean",
        "precision_std",
        "recall_mean",
        "recall_std",
        "f_score_mean",
        "f_score_std",
    ])?;
    for r in rows {
        w.write_record([
            r.kind.display_name().to_string(),
            format!("{:.4}", r.accuracy_mean),
            format!("{:.4}", r.accuracy_std),
            format!("{:.4}", r.precision_mean),
            format!("{:.4}", r.precision_std),
            format!("{:.4}", r.recall_mean),
            format!("{:.4}", r.recall_std),
            format!("{:.4}", r.f_score_mean),
            format!("{:.4}", r.f_score_std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Where rows are sent during a fold; used to audit leakage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStage {
    Scaler,
    Training,
    Ranking,
    Test,
}

pub trait CvObserver {
    fn observe(&mut self, fold: usize, stage: FitStage, rows: &[Origin]);
}

struct NoObserver;

impl CvObserver for NoObserver {
    fn observe(&mut self, _: usize, _: FitStage, _: &[Origin]) {}
}

struct FoldOutcome {
    matrices: Vec<(System, ConfusionMatrix)>,
    ranking: Vec<RankingEntry>,
    fusion_error: Option<String>,
    log: Vec<(FitStage, Vec<Origin>)>,
}

fn split_xy(rows: &[FeatureRow], scaler: &Scaler) -> Result<(Vec<Vec<f64>>, Vec<MotorLabel>), FeatureError> {
    let x = rows.iter().map(|r| scaler.transform_row(&r.values)).collect::<Result<Vec<_>, _>>()?;
    let y = rows.iter().map(|r| r.label).collect();
    Ok((x, y))
}

/// Fits a scaler and every selected model on `rows`.
fn fit_all(
    rows: &[FeatureRow],
    cfg: &EvalConfig,
    log: &mut Vec<(FitStage, Vec<Origin>)>,
) -> Result<(Scaler, Vec<TrainedModel>), EvalError> {
    let origins: Vec<Origin> = rows.iter().map(|r| r.origin).collect();
    log.push((FitStage::Scaler, origins.clone()));
    let scaler = features::fit_scaler(rows)?;
    let (x, y) = split_xy(rows, &scaler)?;
    log.push((FitStage::Training, origins));
    let models = cfg
        .classifiers
        .iter()
        .map(|&kind| classifiers::train(kind, &x, &y, &cfg.train))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((scaler, models))
}

/// Holds out `fraction` of each side's training units for ranking, keeping
/// at least one unit on each side of both parts.
fn calibration_split(
    train_keys: &[FoldKey],
    labels: &HashMap<FoldKey, MotorLabel>,
    fraction: f64,
    seed: u64,
) -> Vec<FoldKey> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = Vec::new();
    for side in [MotorLabel::Right, MotorLabel::Left] {
        let mut keys: Vec<FoldKey> = train_keys.iter().filter(|k| labels[k] == side).copied().collect();
        keys.shuffle(&mut rng);
        let n = ((keys.len() as f64 * fraction).round() as usize).clamp(1, keys.len().saturating_sub(1).max(1));
        held.extend_from_slice(&keys[..n.min(keys.len())]);
    }
    held
}

/// Scaler, models, and (with three or more models) the rule ensemble,
/// all fitted on one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSystem {
    pub scaler: Scaler,
    pub models: Vec<TrainedModel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ensemble: Option<RuleEnsemble>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fusion_error: Option<String>,
}

impl FittedSystem {
    pub fn predict(&self, system: System, raw: &[f64]) -> Result<Option<MotorLabel>, EvalError> {
        let row = self.scaler.transform_row(raw)?;
        Ok(match system.kind() {
            Some(kind) => match self.models.iter().find(|m| m.kind() == kind) {
                Some(m) => Some(m.predict(&row)?),
                None => None,
            },
            None => match &self.ensemble {
                Some(e) => Some(e.predict(&row)?),
                None => None,
            },
        })
    }
}

/// Fits the full system on `train`. Ranking for the fusion uses either an
/// inner stratified holdout (models refitted on all of `train` afterwards)
/// or training accuracy. `log` records which rows reach each stage.
pub fn fit_system(
    train: &[FeatureRow],
    cfg: &EvalConfig,
    calibration_seed: u64,
    log: &mut Vec<(FitStage, Vec<Origin>)>,
) -> Result<FittedSystem, EvalError> {
    let key = |r: &FeatureRow| FoldKey::of(&r.origin, cfg.split);
    let fusion_possible = cfg.classifiers.len() >= ENSEMBLE_SIZE;
    let mut accuracies = None;
    if fusion_possible && cfg.fusion.ranking_source == RankingSource::Holdout {
        let mut labels = HashMap::new();
        let mut train_keys = Vec::new();
        for r in train {
            if labels.insert(key(r), r.label).is_none() {
                train_keys.push(key(r));
            }
        }
        let held = calibration_split(&train_keys, &labels, cfg.fusion.calibration_fraction, calibration_seed);
        let (calib, inner): (Vec<FeatureRow>, Vec<FeatureRow>) =
            train.iter().cloned().partition(|r| held.contains(&key(r)));
        let (scaler, models) = fit_all(&inner, cfg, log)?;
        let (cx, cy) = split_xy(&calib, &scaler)?;
        log.push((FitStage::Ranking, calib.iter().map(|r| r.origin).collect()));
        accuracies = Some(
            models
                .iter()
                .map(|m| m.accuracy(&cx, &cy))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }

    let (scaler, models) = fit_all(train, cfg, log)?;
    if !fusion_possible {
        return Ok(FittedSystem {
            scaler,
            models,
            ensemble: None,
            fusion_error: Some(FusionError::TooFewModels(cfg.classifiers.len()).to_string()),
        });
    }
    let accuracies = match accuracies {
        Some(a) => a,
        None => {
            let (x, y) = split_xy(train, &scaler)?;
            log.push((FitStage::Ranking, train.iter().map(|r| r.origin).collect()));
            models.iter().map(|m| m.accuracy(&x, &y)).collect::<Result<Vec<_>, _>>()?
        }
    };
    let ensemble = fusion::ensemble_from_accuracies(models.clone(), &accuracies)?;
    Ok(FittedSystem {
        scaler,
        models,
        ensemble: Some(ensemble),
        fusion_error: None,
    })
}

fn calibration_seed(seed: u64, fold: usize) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(fold as u64 + 1)
}

fn run_fold(
    rows: &[FeatureRow],
    plan: &FoldPlan,
    fold_of: &HashMap<FoldKey, usize>,
    fold: usize,
    cfg: &EvalConfig,
) -> Result<FoldOutcome, EvalError> {
    let (test, train): (Vec<FeatureRow>, Vec<FeatureRow>) = rows
        .iter()
        .cloned()
        .partition(|r| fold_of[&FoldKey::of(&r.origin, plan.unit)] == fold);
    let mut log = Vec::new();
    let fitted = fit_system(&train, cfg, calibration_seed(cfg.seed, fold), &mut log)?;
    let (tx, ty) = split_xy(&test, &fitted.scaler)?;
    log.push((FitStage::Test, test.iter().map(|r| r.origin).collect()));

    let mut matrices = Vec::new();
    for m in &fitted.models {
        let preds = m.predict_all(&tx)?;
        matrices.push((System::single(m.kind()), ConfusionMatrix::from_predictions(&ty, &preds)));
    }
    let mut ranking = Vec::new();
    if let Some(ensemble) = &fitted.ensemble {
        let preds = tx.iter().map(|r| ensemble.predict(r)).collect::<Result<Vec<_>, _>>()?;
        matrices.push((System::Rule, ConfusionMatrix::from_predictions(&ty, &preds)));
        ranking = ensemble.ranking.clone();
    }
    Ok(FoldOutcome {
        matrices,
        ranking,
        fusion_error: fitted.fusion_error,
        log,
    })
}

/// Cross-validates every selected classifier and the rule fusion.
pub fn run_cv(dataset: &Dataset, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    run_cv_observed(dataset, cfg, &mut NoObserver)
}

/// [`run_cv`] reporting, fold by fold, which rows reach scaler fitting,
/// model training, ranking, and testing.
pub fn run_cv_observed(dataset: &Dataset, cfg: &EvalConfig, observer: &mut dyn CvObserver) -> Result<EvalReport, EvalError> {
    if cfg.classifiers.is_empty() {
        return Err(EvalError::NoClassifiers);
    }
    cfg.train.validate()?;
    let filter = cfg.filter.build()?;
    // Feature extraction is per trial with no fitted state, so extracting
    // once up front equals extracting inside each fold.
    let matrix = features::build_feature_matrix_with(dataset, &filter, &cfg.features)?;
    let plan = make_folds_by(dataset, cfg.k, cfg.seed, cfg.split)?;
    let fold_of = plan.fold_index();

    let threads = cfg.threads.clamp(1, plan.k);
    let outcomes: Vec<Result<FoldOutcome, EvalError>> = if threads == 1 {
        (0..plan.k).map(|f| run_fold(&matrix.rows, &plan, &fold_of, f, cfg)).collect()
    } else {
        let mut slots: Vec<Option<Result<FoldOutcome, EvalError>>> = (0..plan.k).map(|_| None).collect();
        std::thread::scope(|scope| {
            for chunk in slots.chunks_mut(plan.k.div_ceil(threads)).enumerate() {
                let (ci, chunk) = chunk;
                let (rows, plan, fold_of) = (&matrix.rows, &plan, &fold_of);
                let start = ci * plan.k.div_ceil(threads);
                scope.spawn(move || {
                    for (j, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run_fold(rows, plan, fold_of, start + j, cfg));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("fold ran")).collect()
    };

    let mut per_system: Vec<(System, Vec<ConfusionMatrix>)> = Vec::new();
    let mut rankings = Vec::new();
    let mut fusion_error = None;
    for (fold, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        for (stage, origins) in &outcome.log {
            observer.observe(fold, *stage, origins);
        }
        for (system, cm) in outcome.matrices {
            match per_system.iter_mut().find(|(s, _)| *s == system) {
                Some((_, cms)) => cms.push(cm),
                None => per_system.push((system, vec![cm])),
            }
        }
        rankings.push(outcome.ranking);
        fusion_error = fusion_error.or(outcome.fusion_error);
    }
    let classifiers = per_system
        .into_iter()
        .map(|(s, cms)| ClassifierReport::from_cells(s, cms))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        subject_id: dataset.subject_id.clone(),
        seed: cfg.seed,
        config: cfg.clone(),
        classifiers,
        rankings: if fusion_error.is_some() { Vec::new() } else { rankings },
        fusion_error,
    })
}

/// Summaries over several subjects' reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub subjects: Vec<String>,
    /// Mean ± std over every subject × fold cell.
    pub over_cells: Vec<ClassifierReport>,
    /// Mean ± std of the per-subject fold means.
    pub over_subjects: Vec<BatchSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub kind: System,
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f_score: Summary,
}

pub fn aggregate_reports(reports: &[EvalReport]) -> Result<BatchReport, EvalError> {
    let mut systems: Vec<System> = Vec::new();
    for r in reports {
        for c in &r.classifiers {
            if !systems.contains(&c.kind) {
                systems.push(c.kind);
            }
        }
    }
    let mut over_cells = Vec::new();
    let mut over_subjects = Vec::new();
    for s in systems {
        let entries: Vec<&ClassifierReport> = reports.iter().filter_map(|r| r.get(s)).collect();
        let cells: Vec<ConfusionMatrix> = entries.iter().flat_map(|c| c.per_fold.iter().copied()).collect();
        over_cells.push(ClassifierReport::from_cells(s, cells)?);
        let col = |f: fn(&ClassifierReport) -> f64| mean_std(&entries.iter().map(|c| f(c)).collect::<Vec<_>>());
        over_subjects.push(BatchSummary {
            kind: s,
            accuracy: col(|c| c.accuracy_mean),
            precision: col(|c| c.precision_mean),
            recall: col(|c| c.recall_mean),
            f_score: col(|c| c.f_score_mean),
        });
    }
    Ok(BatchReport {
        subjects: reports.iter().map(|r| r.subject_id.clone()).collect(),
        over_cells,
        over_subjects,
    })
}

/// Copy of `dataset` with labels permuted across trials; per-side counts
/// are kept, any link between signal and label is not.
pub fn randomize_labels(dataset: &Dataset, seed: u64) -> Dataset {
    let mut labels: Vec<MotorLabel> = dataset.trials.iter().map(|t| t.label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = dataset.clone();
    for (t, l) in out.trials.iter_mut().zip(labels) {
        t.label = l;
    }
    out
}
