//! Independent reference computations for the integration tests. None of
//! these call into the library's numerical kernels.

#![allow(dead_code)]

use motorclass::MotorLabel;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// O(n²) DFT, X_k = Σ x_n e^{-2πikn/N}.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, v)| {
                    let ang = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                    v * Complex64::new(ang.cos(), ang.sin())
                })
                .sum()
        })
        .collect()
}

/// |H(f)| of an FIR tap vector by direct evaluation of its DTFT.
pub fn fir_gain(taps: &[f64], freq_hz: f64, fs: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz / fs;
    let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, h)| {
        let a = w * n as f64;
        (re + h * a.cos(), im - h * a.sin())
    });
    (re * re + im * im).sqrt()
}

pub fn gain_db(gain: f64) -> f64 {
    20.0 * gain.log10()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` over [a, b].
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Two-tailed Student-t p-value by quadrature of the unnormalized density.
/// With s = tan θ the half-line maps to [0, π/2) and the normalizing
/// constant comes from the same integral, so no gamma function is needed.
pub fn t_pvalue_quadrature(t: f64, df: f64) -> f64 {
    let kernel = move |theta: f64| {
        let c = theta.cos();
        if c <= 0.0 {
            return 0.0;
        }
        let s = theta.tan();
        (1.0 + s * s / df).powf(-(df + 1.0) / 2.0) / (c * c)
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let start = t.abs().atan();
    let tail = integrate(&kernel, start, half_pi, 1e-13);
    let total = integrate(&kernel, 0.0, half_pi, 1e-13);
    (tail / total).clamp(0.0, 1.0)
}

/// Standard-normal CDF by quadrature of the density.
pub fn normal_cdf(x: f64) -> f64 {
    let pdf = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if x >= 0.0 {
        0.5 + integrate(&pdf, 0.0, x, 1e-14)
    } else {
        0.5 - integrate(&pdf, x, 0.0, 1e-14)
    }
}

/// Two Gaussian classes in `dims` dimensions with unit variance and means
/// ±`shift` on the first `informative` coordinates. Right gets +shift.
pub fn gaussian_blobs(
    per_side: usize,
    dims: usize,
    informative: usize,
    shift: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<MotorLabel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(2 * per_side);
    let mut y = Vec::with_capacity(2 * per_side);
    for i in 0..2 * per_side {
        let (label, sign) = if i % 2 == 0 { (MotorLabel::Right, 1.0) } else { (MotorLabel::Left, -1.0) };
        let row = (0..dims)
            .map(|d| {
                let z: f64 = rng.sample(StandardNormal);
                if d < informative {
                    z + sign * shift
                } else {
                    z
                }
            })
            .collect();
        x.push(row);
        y.push(label);
    }
    (x, y)
}

pub fn accuracy(pred: &[MotorLabel], truth: &[MotorLabel]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Column z-scoring fitted on `train`, applied to both.
pub fn standardize(train: &[Vec<f64>], test: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = train[0].len();
    let n = train.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| train.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| (train.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let z = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| (0..d).map(|j| if sd[j] < 1e-12 { 0.0 } else { (r[j] - mean[j]) / sd[j] }).collect())
            .collect()
    };
    (z(train), z(test))
}

pub fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}
