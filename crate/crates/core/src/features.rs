//! Epoching, spectral feature rows, and train-fitted standardization.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, MotorLabel, Trial, CHANNEL_NAMES, N_CHANNELS, TRIAL_SECONDS};
use crate::dsp::{self, DspError, FirFilter, EPOCH_LEN, N_BINS};

/// Features per row: 12 channels × 25 bins.
pub const N_FEATURES: usize = N_CHANNELS * N_BINS;
pub const EPOCHS_PER_TRIAL: usize = TRIAL_SECONDS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("trial {trial_id}, channel {channel}: {source}")]
    Dsp {
        trial_id: u32,
        channel: usize,
        #[source]
        source: DspError,
    },
    #[error("scaler needs at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("row width {got} does not match scaler width {expected}")]
    WidthMismatch { got: usize, expected: usize },
}

/// Column index of (channel, bin) in a feature row; `bin` is 1-based.
pub fn column(channel: usize, bin: usize) -> usize {
    channel * N_BINS + (bin - 1)
}

pub fn column_name(col: usize) -> String {
    let ch = col / N_BINS;
    let bin = col % N_BINS + 1;
    format!("{}_{}Hz", CHANNEL_NAMES[ch], dsp::bin_frequency(bin))
}

/// One 1 s epoch: `channels[c]` holds 512 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub index: usize,
    pub channels: Vec<Vec<f64>>,
}

/// Splits a trial into 8 contiguous non-overlapping 512-sample epochs.
pub fn epoch_trial(trial: &Trial) -> Vec<Epoch> {
    epoch_channels(&trial.samples)
}

fn epoch_channels(samples: &[Vec<f64>]) -> Vec<Epoch> {
    let n = samples.first().map_or(0, Vec::len) / EPOCH_LEN;
    (0..n)
        .map(|e| Epoch {
            index: e,
            channels: samples
                .iter()
                .map(|ch| ch[e * EPOCH_LEN..(e + 1) * EPOCH_LEN].to_vec())
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub trial_id: u32,
    pub epoch: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub values: Vec<f64>,
    pub label: MotorLabel,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScale {
    #[default]
    Linear,
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureOptions {
    pub scale: FeatureScale,
    /// Fractional overlap between the 256-point segments of an epoch.
    pub overlap: f64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            scale: FeatureScale::Linear,
            overlap: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureRow>,
    pub scaler: Option<Scaler>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, label: MotorLabel) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }

    /// Rows whose trial satisfies `keep`, in matrix order.
    pub fn select<F: Fn(&Origin) -> bool>(&self, keep: F) -> Vec<FeatureRow> {
        self.rows.iter().filter(|r| keep(&r.origin)).cloned().collect()
    }

    pub fn with_swapped_labels(&self) -> FeatureMatrix {
        let mut out = self.clone();
        for r in out.rows.iter_mut() {
            r.label = r.label.other();
        }
        out
    }

    /// Feature CSV: `trial_id,epoch,label,<channel>_<freq>Hz...`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["trial_id".to_string(), "epoch".into(), "label".into()];
        header.extend((0..N_FEATURES).map(column_name));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.origin.trial_id.to_string(),
                r.origin.epoch.to_string(),
                r.label.to_string(),
            ];
            rec.extend(r.values.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-trial feature rows: band-pass the full trial, epoch, then PSD per
/// channel per epoch.
pub fn trial_features(
    trial: &Trial,
    filter: &FirFilter,
    opts: &FeatureOptions,
) -> Result<Vec<FeatureRow>, FeatureError> {
    let dsp_err = |channel: usize| {
        move |source: DspError| FeatureError::Dsp {
            trial_id: trial.trial_id,
            channel,
            source,
        }
    };
    let filtered = trial
        .samples
        .iter()
        .enumerate()
        .map(|(ch, x)| dsp::apply_filter(filter, x).map_err(dsp_err(ch)))
        .collect::<Result<Vec<_>, _>>()?;
    let fs = trial.fs as f64;
    epoch_channels(&filtered)
        .into_iter()
        .map(|epoch| {
            let mut values = Vec::with_capacity(N_FEATURES);
            for (ch, x) in epoch.channels.iter().enumerate() {
                let psd = dsp::psd_epoch_with_overlap(x, fs, opts.overlap).map_err(dsp_err(ch))?;
                match opts.scale {
                    FeatureScale::Linear => values.extend(psd),
                    FeatureScale::Db => values.extend(psd.into_iter().map(dsp::power_to_db)),
                }
            }
            Ok(FeatureRow {
                values,
                label: trial.label,
                origin: Origin {
                    trial_id: trial.trial_id,
                    epoch: epoch.index as u8,
                },
            })
        })
        .collect()
}

pub fn build_feature_matrix(dataset: &Dataset, filter: &FirFilter) -> Result<FeatureMatrix, FeatureError> {
    build_feature_matrix_with(dataset, filter, &FeatureOptions::default())
}

/// Rows ordered by (manifest trial order, epoch index).
pub fn build_feature_matrix_with(
    dataset: &Dataset,
    filter: &FirFilter,
    opts: &FeatureOptions,
) -> Result<FeatureMatrix, FeatureError> {
    let mut rows = Vec::with_capacity(dataset.trials.len() * EPOCHS_PER_TRIAL);
    for trial in &dataset.trials {
        rows.extend(trial_features(trial, filter, opts)?);
    }
    Ok(FeatureMatrix { rows, scaler: None })
}

/// Column z-scoring with statistics from training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub stds: Vec<f64>,
}

/// Columns with a spread below this are centered but not scaled.
pub const DEGENERATE_STD: f64 = 1e-12;

impl Scaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Scaler, FeatureError> {
        if rows.len() < 2 {
            return Err(FeatureError::TooFewRows(rows.len()));
        }
        let width = rows[0].as_ref().len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; width];
        for r in rows {
            let r = r.as_ref();
            if r.len() != width {
                return Err(FeatureError::WidthMismatch {
                    got: r.len(),
                    expected: width,
                });
            }
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in vars.iter_mut().zip(r.as_ref()).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(Scaler { means, stds })
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.width() {
            return Err(FeatureError::WidthMismatch {
                got: row.len(),
                expected: self.width(),
            });
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| if *s < DEGENERATE_STD { 0.0 } else { (v - m) / s })
            .collect())
    }

    pub fn transform<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<Vec<f64>>, FeatureError> {
        rows.iter().map(|r| self.transform_row(r.as_ref())).collect()
    }
}

pub fn fit_scaler(train_rows: &[FeatureRow]) -> Result<Scaler, FeatureError> {
    let values: Vec<&[f64]> = train_rows.iter().map(|r| r.values.as_slice()).collect();
    Scaler::fit(&values)
}

pub fn apply_scaler(scaler: &Scaler, rows: &[FeatureRow]) -> Result<Vec<FeatureRow>, FeatureError> {
    rows.iter()
        .map(|r| {
            Ok(FeatureRow {
                values: scaler.transform_row(&r.values)?,
                label: r.label,
                origin: r.origin,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthConfig, SAMPLES_PER_TRIAL};

    fn one_trial() -> Trial {
        let d = generate_synthetic(&SynthConfig {
            n_trials_per_side: 1,
            ..SynthConfig::default()
        })
        .unwrap();
        d.trials[0].clone()
    }

    #[test]
    fn epochs_partition_the_trial() {
        let mut t = one_trial();
        t.samples[0][0] = 42.0;
        let epochs = epoch_trial(&t);
        assert_eq!(epochs.len(), 8);
        assert_eq!(epochs[0].channels[0][0], 42.0);
        for ch in 0..N_CHANNELS {
            let joined: Vec<f64> = epochs.iter().flat_map(|e| e.channels[ch].clone()).collect();
            assert_eq!(joined.len(), SAMPLES_PER_TRIAL);
            assert_eq!(joined, t.samples[ch]);
        }
    }

    #[test]
    fn column_layout() {
        assert_eq!(column(0, 1), 0);
        assert_eq!(column(11, 25), 299);
        assert_eq!(column_name(0), "F3_2Hz");
        assert_eq!(column_name(column(5, 5)), "FCz_10Hz");
        assert_eq!(column_name(299), "P4_50Hz");
    }

    #[test]
    fn single_trial_yields_eight_rows() {
        let d = generate_synthetic(&SynthConfig {
            n_trials_per_side: 1,
            ..SynthConfig::default()
        })
        .unwrap();
        let single = Dataset::new(d.subject_id.clone(), vec![d.trials[1].clone()]).unwrap();
        let m = build_feature_matrix(&single, &dsp::default_filter()).unwrap();
        assert_eq!(m.len(), 8);
        assert!(m.rows.iter().all(|r| r.label == MotorLabel::Left));
        assert!(m.rows.iter().all(|r| r.values.len() == N_FEATURES));
        assert!(m.rows.iter().all(|r| r.values.iter().all(|v| v.is_finite() && *v >= 0.0)));
        let epochs: Vec<u8> = m.rows.iter().map(|r| r.origin.epoch).collect();
        assert_eq!(epochs, (0..8).collect::<Vec<u8>>());
    }

    #[test]
    fn db_features_are_log_of_linear() {
        let t = one_trial();
        let f = dsp::default_filter();
        let lin = trial_features(&t, &f, &FeatureOptions::default()).unwrap();
        let db = trial_features(
            &t,
            &f,
            &FeatureOptions {
                scale: FeatureScale::Db,
                overlap: 0.0,
            },
        )
        .unwrap();
        for (a, b) in lin[3].values.iter().zip(&db[3].values) {
            assert!((dsp::power_to_db(*a) - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scaler_standardizes() {
        let rows = vec![
            vec![1.0, 5.0, 3.0],
            vec![2.0, 5.0, -1.0],
            vec![4.0, 5.0, 0.5],
            vec![7.0, 5.0, 2.0],
        ];
        let s = Scaler::fit(&rows).unwrap();
        let z = s.transform(&rows).unwrap();
        for col in [0, 2] {
            let mean: f64 = z.iter().map(|r| r[col]).sum::<f64>() / 4.0;
            let var: f64 = z.iter().map(|r| (r[col] - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
        assert!(z.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn scaler_needs_two_rows() {
        assert_eq!(Scaler::fit(&[vec![1.0]]), Err(FeatureError::TooFewRows(1)));
        let s = Scaler::fit(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(s.transform_row(&[1.0]).is_err());
    }

    #[test]
    fn scaler_ignores_test_rows() {
        let train = vec![vec![1.0, 2.0], vec![3.0, 8.0], vec![0.0, 1.0]];
        let s = Scaler::fit(&train).unwrap();
        let a = s.transform(&[vec![100.0, -3.0]]).unwrap();
        let s2 = Scaler::fit(&train).unwrap();
        let b = s2.transform(&[vec![100.0, -3.0], vec![5.0, 5.0]]).unwrap();
        assert_eq!(s, s2);
        assert_eq!(a[0], b[0]);
    }
}
