//! Numerical kernels: radix-2 FFT, windowed-sinc FIR band-pass design and
//! zero-delay application, and the per-epoch power spectral density that
//! forms the feature grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sampling rate of every recording handled by the pipeline.
pub const SAMPLE_RATE_HZ: f64 = 512.0;
/// Length of one FFT segment.
pub const SEGMENT_LEN: usize = 256;
/// Length of one analysis epoch (1 s).
pub const EPOCH_LEN: usize = 512;
/// Retained spectral bins: 2, 4, ..., 50 Hz.
pub const N_BINS: usize = 25;
/// Spacing of the retained bins.
pub const BIN_WIDTH_HZ: f64 = SAMPLE_RATE_HZ / SEGMENT_LEN as f64;
/// Default pass band.
pub const DEFAULT_LOW_HZ: f64 = 1.0;
pub const DEFAULT_HIGH_HZ: f64 = 50.0;
/// Default tap count, roughly a 1 Hz Hamming transition at 512 Hz.
pub const DEFAULT_TAPS: usize = 1691;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("FFT length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("invalid band {low} - {high} Hz for fs = {fs} Hz")]
    InvalidBand { fs: f64, low: f64, high: f64 },
    #[error("tap count {0} must be odd and at least 3")]
    InvalidTapCount(usize),
    #[error("non-finite input sample at index {0}")]
    NonFinite(usize),
    #[error("empty signal")]
    EmptySignal,
    #[error("epoch has {got} samples, expected {expected}")]
    BadEpochLength { got: usize, expected: usize },
    #[error("overlap {0} must lie in [0, 1)")]
    InvalidOverlap(f64),
}

/// Center frequency of retained bin `bin` (1-based).
pub fn bin_frequency(bin: usize) -> f64 {
    bin as f64 * BIN_WIDTH_HZ
}

/// In-place iterative radix-2 decimation-in-time FFT (forward, unscaled).
pub fn fft_in_place(buf: &mut [Complex64]) -> Result<(), DspError> {
    transform(buf, false)
}

/// Forward FFT returning a new spectrum.
pub fn fft(input: &[Complex64]) -> Result<Vec<Complex64>, DspError> {
    let mut buf = input.to_vec();
    fft_in_place(&mut buf)?;
    Ok(buf)
}

/// Inverse FFT scaled by 1/N, computed as conj(FFT(conj(X))) / N.
pub fn ifft(spectrum: &[Complex64]) -> Result<Vec<Complex64>, DspError> {
    let mut buf: Vec<Complex64> = spectrum.iter().map(|c| c.conj()).collect();
    fft_in_place(&mut buf)?;
    let scale = 1.0 / buf.len() as f64;
    for c in buf.iter_mut() {
        *c = c.conj() * scale;
    }
    Ok(buf)
}

/// FFT of a real sequence.
pub fn fft_real(input: &[f64]) -> Result<Vec<Complex64>, DspError> {
    let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf)?;
    Ok(buf)
}

fn transform(buf: &mut [Complex64], inverse: bool) -> Result<(), DspError> {
    let n = buf.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(DspError::NotPowerOfTwo(n));
    }
    if n == 1 {
        return Ok(());
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // Twiddles computed directly per stage, not by repeated multiplication,
        // so the error does not grow with the stage length.
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / len as f64))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// Symmetric Hamming window (endpoints included), used for FIR design.
pub fn hamming_symmetric(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let m = (len - 1) as f64;
    (0..len)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos())
        .collect()
}

/// Periodic Hamming window, used for spectral estimation.
pub fn hamming_periodic(len: usize) -> Vec<f64> {
    let m = len as f64;
    (0..len)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos())
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Linear-phase FIR band-pass filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub fs: f64,
    pub band: (f64, f64),
}

impl FirFilter {
    /// Delay of the filter in samples, (len - 1) / 2.
    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Magnitude of the frequency response at `freq_hz`, evaluated by direct
    /// summation over the taps.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        let omega = 2.0 * PI * freq_hz / self.fs;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, &h)| {
                let phase = omega * n as f64;
                (re + h * phase.cos(), im - h * phase.sin())
            });
        re.hypot(im)
    }

    pub fn apply(&self, signal: &[f64]) -> Result<Vec<f64>, DspError> {
        apply_filter(self, signal)
    }
}

/// The 1-50 Hz band-pass used by the pipeline.
pub fn default_filter() -> FirFilter {
    design_bandpass(SAMPLE_RATE_HZ, DEFAULT_LOW_HZ, DEFAULT_HIGH_HZ, DEFAULT_TAPS)
        .expect("default band is valid")
}

/// Hamming-windowed sinc band-pass with half-amplitude points at `low` and
/// `high`: the difference of two windowed low-pass kernels.
pub fn design_bandpass(fs: f64, low: f64, high: f64, taps: usize) -> Result<FirFilter, DspError> {
    let valid = fs.is_finite() && low.is_finite() && high.is_finite();
    if !valid || !(0.0 < low && low < high && high < fs / 2.0) {
        return Err(DspError::InvalidBand { fs, low, high });
    }
    if taps < 3 || taps % 2 == 0 {
        return Err(DspError::InvalidTapCount(taps));
    }
    let f_low = low / fs;
    let f_high = high / fs;
    let center = (taps / 2) as isize;
    let window = hamming_symmetric(taps);
    let mut coeffs: Vec<f64> = (0..taps)
        .map(|i| {
            let m = (i as isize - center) as f64;
            let ideal = 2.0 * f_high * sinc(2.0 * f_high * m) - 2.0 * f_low * sinc(2.0 * f_low * m);
            ideal * window[i]
        })
        .collect();
    // Enforce exact symmetry against rounding in the trig evaluations.
    for i in 0..taps / 2 {
        let avg = 0.5 * (coeffs[i] + coeffs[taps - 1 - i]);
        coeffs[i] = avg;
        coeffs[taps - 1 - i] = avg;
    }
    Ok(FirFilter {
        taps: coeffs,
        fs,
        band: (low, high),
    })
}

/// Index into a signal of length `n` under whole-sample symmetric reflection
/// (edge sample not repeated), extended periodically for large offsets.
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

/// Filters `signal` with reflection padding at both edges and compensates the
/// group delay, so the output has the input's length and timing.
pub fn apply_filter(filter: &FirFilter, signal: &[f64]) -> Result<Vec<f64>, DspError> {
    if signal.is_empty() {
        return Err(DspError::EmptySignal);
    }
    if let Some(i) = signal.iter().position(|x| !x.is_finite()) {
        return Err(DspError::NonFinite(i));
    }
    let n = signal.len();
    let delay = filter.group_delay();
    let padded: Vec<f64> = (0..n + 2 * delay)
        .map(|p| signal[reflect_index(p as isize - delay as isize, n)])
        .collect();

    // Linear convolution via FFT; output sample t sits at index t + 2*delay.
    let conv_len = padded.len() + filter.taps.len() - 1;
    let size = conv_len.next_power_of_two();
    let mut a = vec![Complex64::new(0.0, 0.0); size];
    let mut b = vec![Complex64::new(0.0, 0.0); size];
    for (slot, &x) in a.iter_mut().zip(&padded) {
        slot.re = x;
    }
    for (slot, &h) in b.iter_mut().zip(&filter.taps) {
        slot.re = h;
    }
    fft_in_place(&mut a)?;
    fft_in_place(&mut b)?;
    for (x, h) in a.iter_mut().zip(&b) {
        *x *= h;
    }
    let conv = ifft(&a)?;
    Ok((0..n).map(|t| conv[t + 2 * delay].re).collect())
}

/// One-sided power spectral density of one epoch on the canonical 2 Hz grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdVector {
    /// Power at 2, 4, ..., 50 Hz in µV²/Hz.
    pub values: Vec<f64>,
    pub channel: usize,
}

impl PsdVector {
    pub fn to_db(&self) -> Vec<f64> {
        self.values.iter().map(|&v| power_to_db(v)).collect()
    }

    pub fn frequencies() -> Vec<f64> {
        (1..=N_BINS).map(bin_frequency).collect()
    }
}

/// 10·log10 with a floor so zero power maps to a finite value.
pub fn power_to_db(power: f64) -> f64 {
    10.0 * power.max(1e-20).log10()
}

/// PSD of a 512-sample epoch: two non-overlapping 256-point Hamming
/// segments, averaged.
pub fn psd_epoch(epoch: &[f64], fs: f64) -> Result<Vec<f64>, DspError> {
    psd_epoch_with_overlap(epoch, fs, 0.0)
}

/// Welch average over 256-point segments of the epoch with fractional
/// `overlap`. Each segment is mean-removed before windowing.
pub fn psd_epoch_with_overlap(epoch: &[f64], fs: f64, overlap: f64) -> Result<Vec<f64>, DspError> {
    if epoch.len() != EPOCH_LEN {
        return Err(DspError::BadEpochLength {
            got: epoch.len(),
            expected: EPOCH_LEN,
        });
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(DspError::InvalidOverlap(overlap));
    }
    if let Some(i) = epoch.iter().position(|x| !x.is_finite()) {
        return Err(DspError::NonFinite(i));
    }
    let step = ((SEGMENT_LEN as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window = hamming_periodic(SEGMENT_LEN);
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (fs * window_energy);

    let mut acc = vec![0.0; N_BINS];
    let mut segments = 0usize;
    let mut start = 0;
    while start + SEGMENT_LEN <= EPOCH_LEN {
        let seg = &epoch[start..start + SEGMENT_LEN];
        let mean = seg.iter().sum::<f64>() / SEGMENT_LEN as f64;
        let mut buf: Vec<Complex64> = seg
            .iter()
            .zip(&window)
            .map(|(&x, &w)| Complex64::new((x - mean) * w, 0.0))
            .collect();
        fft_in_place(&mut buf)?;
        for (bin, slot) in acc.iter_mut().enumerate() {
            let k = bin + 1;
            // Bins 1..=25 are interior (never DC or Nyquist), so always doubled.
            *slot += 2.0 * buf[k].norm_sqr() * scale;
        }
        segments += 1;
        start += step;
    }
    for v in acc.iter_mut() {
        *v /= segments as f64;
    }
    Ok(acc)
}

/// Optional artifact screen: true when any |sample| exceeds `threshold_uv`.
pub fn exceeds_amplitude(epoch: &[f64], threshold_uv: f64) -> bool {
    epoch.iter().any(|x| x.abs() > threshold_uv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut x = vec![c(0.0); 256];
        x[0] = c(1.0);
        let spec = fft(&x).unwrap();
        for v in spec {
            assert!((v - c(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn ones_concentrate_in_dc() {
        let spec = fft(&vec![c(1.0); 256]).unwrap();
        assert!((spec[0] - c(256.0)).norm() < 1e-9);
        for v in &spec[1..] {
            assert!(v.norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(fft(&vec![c(0.0); 12]), Err(DspError::NotPowerOfTwo(12)));
        assert_eq!(fft(&[]), Err(DspError::NotPowerOfTwo(0)));
    }

    #[test]
    fn design_validates_inputs() {
        assert!(matches!(
            design_bandpass(512.0, 50.0, 1.0, 101),
            Err(DspError::InvalidBand { .. })
        ));
        assert!(matches!(
            design_bandpass(512.0, 1.0, 300.0, 101),
            Err(DspError::InvalidBand { .. })
        ));
        assert_eq!(
            design_bandpass(512.0, 1.0, 50.0, 100),
            Err(DspError::InvalidTapCount(100))
        );
        assert_eq!(
            design_bandpass(512.0, 1.0, 50.0, 1),
            Err(DspError::InvalidTapCount(1))
        );
    }

    #[test]
    fn taps_are_symmetric() {
        for taps in [3, 11, 101, 1691] {
            let f = design_bandpass(512.0, 1.0, 50.0, taps).unwrap();
            let n = f.len();
            for i in 0..n {
                assert_eq!(f.taps[i], f.taps[n - 1 - i]);
            }
            assert_eq!(f.group_delay(), (taps - 1) / 2);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let f = default_filter();
        let y = apply_filter(&f, &vec![0.0; 4096]).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn passband_sinusoid_keeps_amplitude() {
        let f = default_filter();
        let x: Vec<f64> = (0..4096)
            .map(|i| (2.0 * PI * 25.0 * i as f64 / 512.0).sin())
            .collect();
        let y = apply_filter(&f, &x).unwrap();
        let central = &y[1024..3072];
        let peak = central.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 0.05, "peak {peak}");
        // Time aligned: the output tracks the input sample by sample.
        let err = central
            .iter()
            .zip(&x[1024..3072])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 0.05, "alignment error {err}");
    }

    #[test]
    fn dc_is_suppressed() {
        let f = default_filter();
        let y = apply_filter(&f, &vec![100.0; 4096]).unwrap();
        for v in &y[1024..3072] {
            assert!(v.abs() <= 1.0, "{v}");
        }
    }

    #[test]
    fn short_signals_are_reflected_safely() {
        let f = design_bandpass(512.0, 1.0, 50.0, 101).unwrap();
        assert_eq!(apply_filter(&f, &[3.0]).unwrap().len(), 1);
        assert_eq!(apply_filter(&f, &[1.0, 2.0, 3.0]).unwrap().len(), 3);
        assert_eq!(apply_filter(&f, &[]), Err(DspError::EmptySignal));
        assert_eq!(
            apply_filter(&f, &[1.0, f64::NAN]),
            Err(DspError::NonFinite(1))
        );
    }

    #[test]
    fn reflect_index_mirrors_without_repeating_edges() {
        let n = 4;
        let got: Vec<usize> = (-3..7).map(|i| reflect_index(i, n)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }

    #[test]
    fn zero_epoch_has_zero_psd() {
        let p = psd_epoch(&[0.0; EPOCH_LEN], 512.0).unwrap();
        assert_eq!(p, vec![0.0; N_BINS]);
    }

    #[test]
    fn psd_rejects_wrong_length() {
        assert_eq!(
            psd_epoch(&[0.0; 511], 512.0),
            Err(DspError::BadEpochLength {
                got: 511,
                expected: 512
            })
        );
    }

    #[test]
    fn ten_hz_peaks_at_bin_five() {
        let x: Vec<f64> = (0..EPOCH_LEN)
            .map(|i| (2.0 * PI * 10.0 * i as f64 / 512.0).sin())
            .collect();
        let p = psd_epoch(&x, 512.0).unwrap();
        let total: f64 = p.iter().sum();
        let main: f64 = p[3..6].iter().sum();
        assert!(main / total >= 0.85);
        let peak = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak + 1, 5);
        // Sinusoid power 1/2 spread over the 2 Hz bins.
        assert!((total * BIN_WIDTH_HZ - 0.5).abs() < 0.01, "{total}");
    }

    #[test]
    fn overlap_adds_segments() {
        let x: Vec<f64> = (0..EPOCH_LEN).map(|i| ((i * 7919) % 101) as f64).collect();
        let a = psd_epoch_with_overlap(&x, 512.0, 0.5).unwrap();
        assert_eq!(a.len(), N_BINS);
        assert!(psd_epoch_with_overlap(&x, 512.0, 1.0).is_err());
    }

    #[test]
    fn db_view_is_finite_for_zero() {
        let v = PsdVector {
            values: vec![0.0, 1.0, 100.0],
            channel: 0,
        };
        assert_eq!(v.to_db(), vec![-200.0, 0.0, 20.0]);
    }

    #[test]
    fn amplitude_screen() {
        assert!(!exceeds_amplitude(&[10.0, -150.0], 200.0));
        assert!(exceeds_amplitude(&[10.0, -250.0], 200.0));
    }
}
