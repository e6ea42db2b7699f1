//! Trial data model, the manifest + CSV on-disk format, validation, and the
//! seeded pink-noise generator used in place of clinical recordings.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::band::Band;
use crate::dsp;

/// Montage in its fixed system-wide order.
pub const CHANNEL_NAMES: [&str; 12] = [
    "F3", "FC3", "C3", "CP3", "P3", "FCz", "CPz", "F4", "FC4", "C4", "CP4", "P4",
];
pub const N_CHANNELS: usize = 12;
pub const TRIAL_SECONDS: usize = 8;
pub const SAMPLES_PER_TRIAL: usize = 4096;
pub const SAMPLE_RATE: u32 = 512;

/// File name written for the manifest by [`Dataset::save`].
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub names: Vec<String>,
    pub left_group: Vec<usize>,
    pub right_group: Vec<usize>,
    pub midline: Vec<usize>,
}

impl ChannelSet {
    pub fn standard() -> Self {
        ChannelSet {
            names: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
            left_group: vec![0, 1, 2, 3, 4],
            right_group: vec![7, 8, 9, 10, 11],
            midline: vec![5, 6],
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n.eq_ignore_ascii_case(name))
    }

    /// Homologous channel on the other hemisphere (C3 <-> C4); midline maps
    /// to itself.
    pub fn mirror(&self, idx: usize) -> usize {
        if let Some(p) = self.left_group.iter().position(|&c| c == idx) {
            self.right_group[p]
        } else if let Some(p) = self.right_group.iter().position(|&c| c == idx) {
            self.left_group[p]
        } else {
            idx
        }
    }

    pub fn is_midline(&self, idx: usize) -> bool {
        self.midline.contains(&idx)
    }

    pub fn is_left(&self, idx: usize) -> bool {
        self.left_group.contains(&idx)
    }
}

impl Default for ChannelSet {
    fn default() -> Self {
        Self::standard()
    }
}

/// Side of the motor attempt. Serialized as the integers 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum MotorLabel {
    Right = 1,
    Left = 2,
}

impl MotorLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn other(self) -> MotorLabel {
        match self {
            MotorLabel::Right => MotorLabel::Left,
            MotorLabel::Left => MotorLabel::Right,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MotorLabel::Right => "right",
            MotorLabel::Left => "left",
        }
    }
}

impl TryFrom<u8> for MotorLabel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(MotorLabel::Right),
            2 => Ok(MotorLabel::Left),
            other => Err(format!("unknown label value {other}")),
        }
    }
}

impl From<MotorLabel> for u8 {
    fn from(l: MotorLabel) -> u8 {
        l.code()
    }
}

impl fmt::Display for MotorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// One 8 s, 12-channel recording. `samples[channel][t]` in µV.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub subject_id: String,
    pub trial_id: u32,
    pub label: MotorLabel,
    pub samples: Vec<Vec<f64>>,
    pub fs: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationCode {
    BadChannelCount,
    BadSampleCount,
    NonFinite,
    BadSampleRate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub channel: Option<usize>,
    pub index: Option<usize>,
    pub detail: String,
}

/// Checks every `Trial` invariant; an empty report means the trial is valid.
pub fn validate_trial(trial: &Trial) -> Vec<Violation> {
    let mut out = Vec::new();
    if trial.fs != SAMPLE_RATE {
        out.push(Violation {
            code: ViolationCode::BadSampleRate,
            channel: None,
            index: None,
            detail: format!("fs = {} Hz, expected {SAMPLE_RATE}", trial.fs),
        });
    }
    if trial.samples.len() != N_CHANNELS {
        out.push(Violation {
            code: ViolationCode::BadChannelCount,
            channel: None,
            index: None,
            detail: format!("{} channels, expected {N_CHANNELS}", trial.samples.len()),
        });
    }
    for (ch, row) in trial.samples.iter().enumerate() {
        if row.len() != SAMPLES_PER_TRIAL {
            out.push(Violation {
                code: ViolationCode::BadSampleCount,
                channel: Some(ch),
                index: None,
                detail: format!("{} samples, expected {SAMPLES_PER_TRIAL}", row.len()),
            });
        }
        for (i, v) in row.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation {
                    code: ViolationCode::NonFinite,
                    channel: Some(ch),
                    index: Some(i),
                    detail: format!("value {v}"),
                });
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset has no trials")]
    EmptyDataset,
    #[error("trial {trial_id}: missing file {path}")]
    MissingFile { trial_id: u32, path: PathBuf },
    #[error("trial {trial_id}: {got} sample rows, expected {SAMPLES_PER_TRIAL}")]
    BadSampleCount { trial_id: u32, got: usize },
    #[error("trial {trial_id}: row {row} has {got} columns, expected {N_CHANNELS}")]
    BadChannelCount { trial_id: u32, row: usize, got: usize },
    #[error("trial {trial_id}: non-finite sample at channel {channel}, index {index}")]
    NonFinite { trial_id: u32, channel: usize, index: usize },
    #[error("trial {trial_id}: unknown label value {value}")]
    UnknownLabel { trial_id: u32, value: i64 },
    #[error("sampling rate {0} Hz, expected {SAMPLE_RATE}")]
    BadSampleRate(u32),
    #[error("channel list {0:?} does not match the montage")]
    ChannelMismatch(Vec<String>),
    #[error("trial {trial_id}: subject '{got}' differs from dataset subject '{expected}'")]
    SubjectMismatch { trial_id: u32, expected: String, got: String },
    #[error("trial {trial_id}: parse error: {message}")]
    Parse { trial_id: u32, message: String },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("invalid synth config field '{field}': {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::EmptyDataset => "EmptyDataset",
            DatasetError::MissingFile { .. } => "MissingFile",
            DatasetError::BadSampleCount { .. } => "BadSampleCount",
            DatasetError::BadChannelCount { .. } => "BadChannelCount",
            DatasetError::NonFinite { .. } => "NonFinite",
            DatasetError::UnknownLabel { .. } => "UnknownLabel",
            DatasetError::BadSampleRate(_) => "BadSampleRate",
            DatasetError::ChannelMismatch(_) => "ChannelMismatch",
            DatasetError::SubjectMismatch { .. } => "SubjectMismatch",
            DatasetError::Parse { .. } => "Parse",
            DatasetError::Manifest(_) => "Manifest",
            DatasetError::InvalidConfig { .. } => "InvalidConfig",
            DatasetError::Io { .. } => "Io",
        }
    }

    pub fn trial_id(&self) -> Option<u32> {
        match self {
            DatasetError::MissingFile { trial_id, .. }
            | DatasetError::BadSampleCount { trial_id, .. }
            | DatasetError::BadChannelCount { trial_id, .. }
            | DatasetError::NonFinite { trial_id, .. }
            | DatasetError::UnknownLabel { trial_id, .. }
            | DatasetError::SubjectMismatch { trial_id, .. }
            | DatasetError::Parse { trial_id, .. } => Some(*trial_id),
            _ => None,
        }
    }
}

/// All trials of one subject, in acquisition (manifest) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subject_id: String,
    pub trials: Vec<Trial>,
    pub channel_set: ChannelSet,
}

impl Dataset {
    /// Builds a dataset, rejecting the first invariant violation found.
    pub fn new(subject_id: impl Into<String>, trials: Vec<Trial>) -> Result<Self, DatasetError> {
        let subject_id = subject_id.into();
        if trials.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        for t in &trials {
            if t.subject_id != subject_id {
                return Err(DatasetError::SubjectMismatch {
                    trial_id: t.trial_id,
                    expected: subject_id.clone(),
                    got: t.subject_id.clone(),
                });
            }
            if let Some(v) = validate_trial(t).into_iter().next() {
                return Err(violation_to_error(t, &v));
            }
        }
        Ok(Dataset {
            subject_id,
            trials,
            channel_set: ChannelSet::standard(),
        })
    }

    pub fn count(&self, label: MotorLabel) -> usize {
        self.trials.iter().filter(|t| t.label == label).count()
    }

    /// Non-fatal findings such as unequal left/right counts.
    pub fn warnings(&self) -> Vec<String> {
        let (r, l) = (self.count(MotorLabel::Right), self.count(MotorLabel::Left));
        if r != l {
            vec![format!(
                "subject {}: imbalanced trials ({r} right, {l} left)",
                self.subject_id
            )]
        } else {
            Vec::new()
        }
    }

    pub fn trial(&self, trial_id: u32) -> Option<&Trial> {
        self.trials.iter().find(|t| t.trial_id == trial_id)
    }

    /// Same trials with every label swapped.
    pub fn with_swapped_labels(&self) -> Dataset {
        let mut out = self.clone();
        for t in out.trials.iter_mut() {
            t.label = t.label.other();
        }
        out
    }

    /// Writes the manifest and one CSV per trial into `dir`, returning the
    /// manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, DatasetError> {
        fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut entries = Vec::with_capacity(self.trials.len());
        for t in &self.trials {
            let file = format!("trial_{:03}.csv", t.trial_id);
            let path = dir.join(&file);
            write_trial_csv(&path, t, &self.channel_set)?;
            entries.push(ManifestTrial {
                trial_id: t.trial_id,
                label: t.label.code() as i64,
                file,
            });
        }
        let manifest = Manifest {
            subject_id: self.subject_id.clone(),
            fs: SAMPLE_RATE,
            channels: self.channel_set.names.clone(),
            trials: entries,
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|source| DatasetError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

fn violation_to_error(trial: &Trial, v: &Violation) -> DatasetError {
    let trial_id = trial.trial_id;
    match v.code {
        ViolationCode::BadSampleRate => DatasetError::BadSampleRate(trial.fs),
        ViolationCode::BadChannelCount => DatasetError::BadChannelCount {
            trial_id,
            row: 0,
            got: trial.samples.len(),
        },
        ViolationCode::BadSampleCount => DatasetError::BadSampleCount {
            trial_id,
            got: v.channel.map_or(0, |c| trial.samples[c].len()),
        },
        ViolationCode::NonFinite => DatasetError::NonFinite {
            trial_id,
            channel: v.channel.unwrap_or(0),
            index: v.index.unwrap_or(0),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub subject_id: String,
    pub fs: u32,
    pub channels: Vec<String>,
    pub trials: Vec<ManifestTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestTrial {
    pub trial_id: u32,
    /// Kept wide so out-of-range values surface as `UnknownLabel`.
    pub label: i64,
    pub file: String,
}

pub fn read_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))
}

/// Loads and validates every trial listed in the manifest.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, DatasetError> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.fs != SAMPLE_RATE {
        return Err(DatasetError::BadSampleRate(manifest.fs));
    }
    let channel_set = ChannelSet::standard();
    if manifest.channels != channel_set.names {
        return Err(DatasetError::ChannelMismatch(manifest.channels));
    }
    if manifest.trials.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut trials = Vec::with_capacity(manifest.trials.len());
    for entry in &manifest.trials {
        let label = u8::try_from(entry.label)
            .ok()
            .and_then(|v| MotorLabel::try_from(v).ok())
            .ok_or(DatasetError::UnknownLabel {
                trial_id: entry.trial_id,
                value: entry.label,
            })?;
        let path = base.join(&entry.file);
        if !path.is_file() {
            return Err(DatasetError::MissingFile {
                trial_id: entry.trial_id,
                path,
            });
        }
        let samples = read_trial_csv(&path, entry.trial_id, &channel_set)?;
        trials.push(Trial {
            subject_id: manifest.subject_id.clone(),
            trial_id: entry.trial_id,
            label,
            samples,
            fs: manifest.fs,
        });
    }
    Ok(Dataset {
        subject_id: manifest.subject_id,
        trials,
        channel_set,
    })
}

fn read_trial_csv(
    path: &Path,
    trial_id: u32,
    channels: &ChannelSet,
) -> Result<Vec<Vec<f64>>, DatasetError> {
    let parse_err = |message: String| DatasetError::Parse { trial_id, message };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(e.to_string()))?;
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    if names != channels.names {
        return Err(DatasetError::ChannelMismatch(names));
    }
    let mut samples = vec![Vec::with_capacity(SAMPLES_PER_TRIAL); N_CHANNELS];
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.len() != N_CHANNELS {
            return Err(DatasetError::BadChannelCount {
                trial_id,
                row: rows,
                got: record.len(),
            });
        }
        for (ch, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("row {rows}: cannot parse '{field}'")))?;
            if !v.is_finite() {
                return Err(DatasetError::NonFinite {
                    trial_id,
                    channel: ch,
                    index: rows,
                });
            }
            samples[ch].push(v);
        }
        rows += 1;
    }
    if rows != SAMPLES_PER_TRIAL {
        return Err(DatasetError::BadSampleCount { trial_id, got: rows });
    }
    Ok(samples)
}

fn write_trial_csv(path: &Path, trial: &Trial, channels: &ChannelSet) -> Result<(), DatasetError> {
    let io_err = |e: csv::Error| DatasetError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io_err)?;
    w.write_record(&channels.names).map_err(io_err)?;
    let n = trial.samples.first().map_or(0, Vec::len);
    let mut row = Vec::with_capacity(N_CHANNELS);
    for t in 0..n {
        row.clear();
        row.extend(trial.samples.iter().map(|ch| ch[t].to_string()));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub subject_id: String,
    pub n_trials_per_side: usize,
    /// Power boost in dB applied to `target_band` on one hemisphere.
    pub asymmetry_db: f64,
    pub target_band: Band,
    pub target_channels: Vec<String>,
    /// Exponent of the 1/f^α background spectrum.
    pub noise_exponent: f64,
    /// RMS of the unboosted background, µV.
    pub noise_rms_uv: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            subject_id: "synth".to_string(),
            n_trials_per_side: 40,
            asymmetry_db: 6.0,
            target_band: Band::Alpha,
            target_channels: vec!["C3".to_string(), "C4".to_string()],
            noise_exponent: 1.0,
            noise_rms_uv: 10.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<Vec<usize>, DatasetError> {
        if self.n_trials_per_side < 1 {
            return Err(DatasetError::InvalidConfig {
                field: "n_trials_per_side",
                message: "must be at least 1".into(),
            });
        }
        if !(self.asymmetry_db.is_finite() && self.asymmetry_db >= 0.0) {
            return Err(DatasetError::InvalidConfig {
                field: "asymmetry_db",
                message: format!("{} is not a finite value >= 0", self.asymmetry_db),
            });
        }
        if !self.noise_exponent.is_finite() || self.noise_exponent < 0.0 {
            return Err(DatasetError::InvalidConfig {
                field: "noise_exponent",
                message: format!("{} is not a finite value >= 0", self.noise_exponent),
            });
        }
        if !(self.noise_rms_uv.is_finite() && self.noise_rms_uv > 0.0) {
            return Err(DatasetError::InvalidConfig {
                field: "noise_rms_uv",
                message: format!("{} is not positive", self.noise_rms_uv),
            });
        }
        let set = ChannelSet::standard();
        self.target_channels
            .iter()
            .map(|name| {
                set.index_of(name).ok_or_else(|| DatasetError::InvalidConfig {
                    field: "target_channels",
                    message: format!("unknown channel '{name}'"),
                })
            })
            .collect()
    }
}

/// Channels boosted for each label. Right-labeled trials are boosted on the
/// right-hemisphere member of each target pair, left-labeled trials on its
/// mirror; a midline target is boosted for right trials only.
pub fn boosted_channels(set: &ChannelSet, targets: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut right = Vec::new();
    let mut left = Vec::new();
    for &t in targets {
        let r = if set.is_left(t) { set.mirror(t) } else { t };
        if !right.contains(&r) {
            right.push(r);
        }
        if !set.is_midline(r) {
            let l = set.mirror(r);
            if !left.contains(&l) {
                left.push(l);
            }
        }
    }
    right.sort_unstable();
    left.sort_unstable();
    (right, left)
}

/// Generates `2 * n_trials_per_side` pink-noise trials, alternating right and
/// left. Output is a pure function of the config.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Dataset, DatasetError> {
    let targets = config.validate()?;
    let set = ChannelSet::standard();
    let (right_boost, left_boost) = boosted_channels(&set, &targets);
    let gain = 10f64.powf(config.asymmetry_db / 20.0);
    let (band_lo, band_hi) = config.target_band.frequency_range();

    let n = SAMPLES_PER_TRIAL;
    let fs = SAMPLE_RATE as f64;
    let freqs: Vec<f64> = (0..=n / 2).map(|k| k as f64 * fs / n as f64).collect();
    let base_amp: Vec<f64> = freqs
        .iter()
        .map(|&f| if f == 0.0 { 0.0 } else { f.powf(-config.noise_exponent / 2.0) })
        .collect();
    // Expected variance of the time series for unit-scale synthesis.
    let var: f64 = (1..n / 2).map(|k| 2.0 * base_amp[k] * base_amp[k]).sum::<f64>()
        + base_amp[n / 2] * base_amp[n / 2];
    let norm = config.noise_rms_uv * n as f64 / var.sqrt();
    let boosted_amp: Vec<f64> = base_amp
        .iter()
        .zip(&freqs)
        .map(|(&a, &f)| if f >= band_lo && f <= band_hi { a * gain } else { a })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trials = Vec::with_capacity(2 * config.n_trials_per_side);
    for i in 0..2 * config.n_trials_per_side {
        let label = if i % 2 == 0 { MotorLabel::Right } else { MotorLabel::Left };
        let boosted = match label {
            MotorLabel::Right => &right_boost,
            MotorLabel::Left => &left_boost,
        };
        let samples = (0..N_CHANNELS)
            .map(|ch| {
                let amp = if boosted.contains(&ch) { &boosted_amp } else { &base_amp };
                spectral_noise(&mut rng, amp, norm)
            })
            .collect();
        trials.push(Trial {
            subject_id: config.subject_id.clone(),
            trial_id: i as u32 + 1,
            label,
            samples,
            fs: SAMPLE_RATE,
        });
    }
    Dataset::new(config.subject_id.clone(), trials)
}

/// Gaussian noise with the given one-sided amplitude spectrum (index k up to
/// n/2), by random complex coefficients and an inverse FFT.
fn spectral_noise(rng: &mut ChaCha8Rng, amp: &[f64], norm: f64) -> Vec<f64> {
    let half = amp.len() - 1;
    let n = 2 * half;
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..half {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let c = Complex64::new(re, im) * (amp[k] * std::f64::consts::FRAC_1_SQRT_2);
        spec[k] = c;
        spec[n - k] = c.conj();
    }
    let nyq: f64 = StandardNormal.sample(rng);
    spec[half] = Complex64::new(nyq * amp[half], 0.0);
    let x = dsp::ifft(&spec).expect("power-of-two synthesis length");
    x.into_iter().map(|c| c.re * norm).collect()
}
