//! Paired t-tests over the (channel, bin) grid, Student-t p-values through
//! the regularized incomplete beta function, the right-minus-left power
//! difference map, and its band aggregation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::band::Band;
use crate::dataset::{MotorLabel, CHANNEL_NAMES, N_CHANNELS};
use crate::dsp::{bin_frequency, N_BINS};
use crate::features::{column, FeatureMatrix, FeatureRow};

pub const DEFAULT_ALPHA: f64 = 0.05;

const CF_TOLERANCE: f64 = 1e-12;
const CF_MAX_ITER: usize = 300;
const CF_TINY: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("degrees of freedom must be >= 1, got {0}")]
    BadDegreesOfFreedom(f64),
    #[error("incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")]
    NoConvergence { a: f64, b: f64, x: f64 },
    #[error("no rows labeled {0:?}")]
    MissingLabel(MotorLabel),
    #[error("unequal pair counts: {right} right vs {left} left")]
    UnequalCounts { right: usize, left: usize },
    #[error("malformed significance CSV: {0}")]
    Csv(String),
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7), with reflection below 1/2.
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64, StatsError> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let clamp = |v: f64| if v.abs() < CF_TINY { CF_TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_TOLERANCE {
            return Ok(h);
        }
    }
    Err(StatsError::NoConvergence { a, b, x })
}

/// Regularized incomplete beta function I_x(a, b).
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64, StatsError> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(a, b, x)? / a)
    } else {
        Ok(1.0 - front * beta_cf(b, a, 1.0 - x)? / b)
    }
}

/// Two-tailed p-value of Student's t with `df` degrees of freedom:
/// I_{df/(df+t²)}(df/2, 1/2). Infinite `t` gives 0.
pub fn t_pvalue(t: f64, df: f64) -> Result<f64, StatsError> {
    if !(df >= 1.0) || !df.is_finite() {
        return Err(StatsError::BadDegreesOfFreedom(df));
    }
    if t.is_nan() {
        return Err(StatsError::NonFinite);
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let x = df / (df + t * t);
    Ok(incomplete_beta(x, df / 2.0, 0.5)?.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// ±infinity when the differences are constant and non-zero.
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub n: usize,
}

/// Paired t-test on d = x − y.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TTestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs(n));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let ss: f64 = d.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    let df = nf - 1.0;
    let (t, p) = if sd == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        }
    } else {
        let t = mean / (sd / nf.sqrt());
        (t, t_pvalue(t, df)?)
    };
    Ok(TTestResult { t, df, p, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Unequal per-label counts are an error.
    #[default]
    Strict,
    /// Pair the first min(right, left) rows of each label.
    TruncateToMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestLevel {
    /// One sample per epoch.
    #[default]
    Epoch,
    /// One sample per trial (mean over its epochs).
    Trial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignificanceOptions {
    pub alpha: f64,
    pub pairing: Pairing,
    pub level: TestLevel,
}

impl Default for SignificanceOptions {
    fn default() -> Self {
        SignificanceOptions {
            alpha: DEFAULT_ALPHA,
            pairing: Pairing::Strict,
            level: TestLevel::Epoch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceCell {
    pub channel: usize,
    /// 1-based bin, center 2·bin Hz.
    pub bin: usize,
    pub t: f64,
    pub p: f64,
    /// Mean right power minus mean left power.
    pub delta: f64,
    pub significant: bool,
}

impl SignificanceCell {
    pub fn freq_hz(&self) -> f64 {
        bin_frequency(self.bin)
    }
}

/// Cells in channel-major order (channel 0 bins 1..25, channel 1, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMap {
    pub alpha: f64,
    pub cells: Vec<SignificanceCell>,
}

impl SignificanceMap {
    pub fn cell(&self, channel: usize, bin: usize) -> &SignificanceCell {
        &self.cells[column(channel, bin)]
    }

    pub fn significant_count(&self) -> usize {
        self.cells.iter().filter(|c| c.significant).count()
    }

    pub fn significant_fraction(&self) -> f64 {
        self.significant_count() as f64 / self.cells.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["channel", "freq_hz", "t", "p", "delta", "significant"])?;
        for c in &self.cells {
            w.write_record([
                CHANNEL_NAMES[c.channel].to_string(),
                c.freq_hz().to_string(),
                c.t.to_string(),
                c.p.to_string(),
                c.delta.to_string(),
                c.significant.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`SignificanceMap::write_csv`]. The threshold
    /// is not part of the file, so `alpha` is supplied by the caller while
    /// the per-cell flags are taken as written.
    pub fn read_csv<R: Read>(input: R, alpha: f64) -> Result<SignificanceMap, StatsError> {
        let err = |m: String| StatsError::Csv(m);
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let mut cells = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            if rec.len() != 6 {
                return Err(err(format!("expected 6 fields, got {}", rec.len())));
            }
            let channel = CHANNEL_NAMES
                .iter()
                .position(|n| *n == &rec[0])
                .ok_or_else(|| err(format!("unknown channel '{}'", &rec[0])))?;
            let num = |i: usize| -> Result<f64, StatsError> {
                rec[i].parse().map_err(|_| err(format!("bad number '{}'", &rec[i])))
            };
            let freq = num(1)?;
            let bin = (freq / bin_frequency(1)).round() as usize;
            let significant = rec[5]
                .parse()
                .map_err(|_| err(format!("bad flag '{}'", &rec[5])))?;
            cells.push(SignificanceCell {
                channel,
                bin,
                t: num(2)?,
                p: num(3)?,
                delta: num(4)?,
                significant,
            });
        }
        if cells.len() != N_CHANNELS * N_BINS {
            return Err(err(format!("expected {} rows, got {}", N_CHANNELS * N_BINS, cells.len())));
        }
        for (i, c) in cells.iter().enumerate() {
            if !(1..=N_BINS).contains(&c.bin) || column(c.channel, c.bin) != i {
                return Err(err(format!("row {i} out of channel-major order")));
            }
        }
        Ok(SignificanceMap { alpha, cells })
    }
}

/// Per-label sample vectors for the test, honoring level and pairing.
fn paired_samples(
    features: &FeatureMatrix,
    opts: &SignificanceOptions,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), StatsError> {
    let collect = |label: MotorLabel| -> Vec<Vec<f64>> {
        let rows: Vec<&FeatureRow> = features.rows.iter().filter(|r| r.label == label).collect();
        match opts.level {
            TestLevel::Epoch => rows.iter().map(|r| r.values.clone()).collect(),
            TestLevel::Trial => {
                let mut out: Vec<(u32, Vec<f64>, usize)> = Vec::new();
                for r in rows {
                    match out.last_mut() {
                        Some((id, acc, n)) if *id == r.origin.trial_id => {
                            acc.iter_mut().zip(&r.values).for_each(|(a, v)| *a += v);
                            *n += 1;
                        }
                        _ => out.push((r.origin.trial_id, r.values.clone(), 1)),
                    }
                }
                out.into_iter()
                    .map(|(_, acc, n)| acc.into_iter().map(|v| v / n as f64).collect())
                    .collect()
            }
        }
    };
    let mut right = collect(MotorLabel::Right);
    let mut left = collect(MotorLabel::Left);
    if right.is_empty() {
        return Err(StatsError::MissingLabel(MotorLabel::Right));
    }
    if left.is_empty() {
        return Err(StatsError::MissingLabel(MotorLabel::Left));
    }
    if right.len() != left.len() {
        match opts.pairing {
            Pairing::Strict => {
                return Err(StatsError::UnequalCounts {
                    right: right.len(),
                    left: left.len(),
                })
            }
            Pairing::TruncateToMin => {
                let n = right.len().min(left.len());
                right.truncate(n);
                left.truncate(n);
            }
        }
    }
    Ok((right, left))
}

/// Paired t-test of right vs left power for every (channel, bin); the i-th
/// right sample is paired with the i-th left sample in acquisition order.
pub fn significance_map(
    features: &FeatureMatrix,
    opts: &SignificanceOptions,
) -> Result<SignificanceMap, StatsError> {
    let (right, left) = paired_samples(features, opts)?;
    let n = right.len() as f64;
    let mut cells = Vec::with_capacity(N_CHANNELS * N_BINS);
    for channel in 0..N_CHANNELS {
        for bin in 1..=N_BINS {
            let col = column(channel, bin);
            let r: Vec<f64> = right.iter().map(|row| row[col]).collect();
            let l: Vec<f64> = left.iter().map(|row| row[col]).collect();
            let test = paired_t(&r, &l)?;
            let delta = r.iter().sum::<f64>() / n - l.iter().sum::<f64>() / n;
            cells.push(SignificanceCell {
                channel,
                bin,
                t: test.t,
                p: test.p,
                delta,
                significant: test.p < opts.alpha,
            });
        }
    }
    Ok(SignificanceMap {
        alpha: opts.alpha,
        cells,
    })
}

/// Mean power per label on the feature grid: (channel, bin, left, right).
pub fn mean_psd_curves(features: &FeatureMatrix) -> Vec<(usize, usize, f64, f64)> {
    let mean_of = |label: MotorLabel, col: usize| {
        let (sum, n) = features
            .rows
            .iter()
            .filter(|r| r.label == label)
            .fold((0.0, 0usize), |(s, n), r| (s + r.values[col], n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    };
    let mut out = Vec::with_capacity(N_CHANNELS * N_BINS);
    for ch in 0..N_CHANNELS {
        for bin in 1..=N_BINS {
            let col = column(ch, bin);
            out.push((ch, bin, mean_of(MotorLabel::Left, col), mean_of(MotorLabel::Right, col)));
        }
    }
    out
}

pub fn write_mean_psd_csv<W: Write>(features: &FeatureMatrix, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["channel", "freq_hz", "mean_left", "mean_right"])?;
    for (ch, bin, l, r) in mean_psd_curves(features) {
        w.write_record([
            CHANNEL_NAMES[ch].to_string(),
            bin_frequency(bin).to_string(),
            l.to_string(),
            r.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEntry {
    pub band: Band,
    pub channel: usize,
    pub mean_delta: f64,
    /// Mean over significant bins only; `None` when the band has none.
    pub mean_delta_significant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMap {
    /// Band-major: all channels of delta, then theta, alpha, beta.
    pub entries: Vec<BandEntry>,
}

impl BandMap {
    pub fn get(&self, band: Band, channel: usize) -> &BandEntry {
        let b = Band::ALL.iter().position(|x| *x == band).expect("known band");
        &self.entries[b * N_CHANNELS + channel]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["band", "channel", "mean_delta", "mean_delta_significant"])?;
        for e in &self.entries {
            w.write_record([
                e.band.name().to_string(),
                CHANNEL_NAMES[e.channel].to_string(),
                e.mean_delta.to_string(),
                e.mean_delta_significant.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn band_aggregate(map: &SignificanceMap) -> BandMap {
    let mut entries = Vec::with_capacity(Band::ALL.len() * N_CHANNELS);
    for band in Band::ALL {
        for channel in 0..N_CHANNELS {
            let cells: Vec<&SignificanceCell> = band.bins().map(|b| map.cell(channel, b)).collect();
            let mean_delta = cells.iter().map(|c| c.delta).sum::<f64>() / cells.len() as f64;
            let sig: Vec<f64> = cells.iter().filter(|c| c.significant).map(|c| c.delta).collect();
            let mean_delta_significant = if sig.is_empty() {
                None
            } else {
                Some(sig.iter().sum::<f64>() / sig.len() as f64)
            };
            entries.push(BandEntry {
                band,
                channel,
                mean_delta,
                mean_delta_significant,
            });
        }
    }
    BandMap { entries }
}
