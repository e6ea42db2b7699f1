//! Browser bindings for the demo page in `www/`. Each export returns a JSON
//! string; the plain functions underneath are what the native tests call.

use motorclass::dsp::{self, power_to_db};
use motorclass::features;
use motorclass::stats::{self, SignificanceCell, SignificanceOptions};
use motorclass::{generate_synthetic, Band, ChannelSet, SynthConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Cap on trials per side so a click stays interactive.
pub const MAX_TRIALS_PER_SIDE: usize = 40;

#[derive(Serialize)]
struct ResponsePoint {
    hz: f64,
    db: f64,
}

#[derive(Serialize)]
struct FilterResponse {
    taps: usize,
    group_delay: usize,
    points: Vec<ResponsePoint>,
}

/// Magnitude response in dB from 0 to Nyquist in 0.5 Hz steps.
pub fn filter_response_json(low_hz: f64, high_hz: f64, taps: usize) -> Result<String, String> {
    let f = dsp::design_bandpass(dsp::SAMPLE_RATE_HZ, low_hz, high_hz, taps).map_err(|e| e.to_string())?;
    let points = (0..=512)
        .map(|i| {
            let hz = i as f64 * 0.5;
            ResponsePoint {
                hz,
                db: 20.0 * f.magnitude_at(hz).max(1e-10).log10(),
            }
        })
        .collect();
    let out = FilterResponse {
        taps: f.len(),
        group_delay: f.group_delay(),
        points,
    };
    Ok(serde_json::to_string(&out).expect("plain data"))
}

#[derive(Serialize)]
struct PsdPoint {
    channel: usize,
    bin: usize,
    left_db: f64,
    right_db: f64,
}

#[derive(Serialize)]
struct SignificanceDemo {
    channels: Vec<String>,
    alpha: f64,
    significant: usize,
    cells: Vec<SignificanceCell>,
    mean_psd: Vec<PsdPoint>,
}

/// Synthesizes a small dataset, then runs the per-cell paired t-test on it.
pub fn significance_json(
    asymmetry_db: f64,
    band: &str,
    trials_per_side: usize,
    seed: u64,
    alpha: f64,
) -> Result<String, String> {
    if trials_per_side > MAX_TRIALS_PER_SIDE {
        return Err(format!("at most {MAX_TRIALS_PER_SIDE} trials per side in the demo"));
    }
    let band: Band = band.parse().map_err(|e| format!("{e}"))?;
    let ds = generate_synthetic(&SynthConfig {
        n_trials_per_side: trials_per_side,
        asymmetry_db,
        target_band: band,
        seed,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let m = features::build_feature_matrix(&ds, &dsp::default_filter()).map_err(|e| e.to_string())?;
    let map = stats::significance_map(
        &m,
        &SignificanceOptions {
            alpha,
            ..SignificanceOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mean_psd = stats::mean_psd_curves(&m)
        .into_iter()
        .map(|(channel, bin, left, right)| PsdPoint {
            channel,
            bin,
            left_db: power_to_db(left),
            right_db: power_to_db(right),
        })
        .collect();
    let out = SignificanceDemo {
        channels: ChannelSet::standard().names,
        alpha: map.alpha,
        significant: map.significant_count(),
        cells: map.cells,
        mean_psd,
    };
    Ok(serde_json::to_string(&out).expect("plain data"))
}

#[derive(Serialize)]
struct TPoint {
    t: f64,
    p: f64,
}

/// Two-tailed p against |t| on [0, t_max].
pub fn t_curve_json(df: f64, t_max: f64) -> Result<String, String> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err("t_max must be positive".into());
    }
    let points = (0..=200)
        .map(|i| {
            let t = t_max * i as f64 / 200.0;
            stats::t_pvalue(t, df).map(|p| TPoint { t, p })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&points).expect("plain data"))
}

#[wasm_bindgen]
pub fn filter_response(low_hz: f64, high_hz: f64, taps: usize) -> Result<String, JsError> {
    filter_response_json(low_hz, high_hz, taps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn significance(asymmetry_db: f64, band: &str, trials_per_side: usize, seed: u64, alpha: f64) -> Result<String, JsError> {
    significance_json(asymmetry_db, band, trials_per_side, seed, alpha).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn t_curve(df: f64, t_max: f64) -> Result<String, JsError> {
    t_curve_json(df, t_max).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn filter_curve_covers_nyquist() {
        let v: Value = serde_json::from_str(&filter_response_json(1.0, 50.0, 1691).unwrap()).unwrap();
        let pts = v["points"].as_array().unwrap();
        assert_eq!(pts.len(), 513);
        assert_eq!(pts[512]["hz"], 256.0);
        assert!(pts[20]["db"].as_f64().unwrap().abs() < 0.5);
        assert!(pts[200]["db"].as_f64().unwrap() < -40.0);
        assert!(filter_response_json(50.0, 1.0, 101).is_err());
    }

    #[test]
    fn significance_demo_shape() {
        let v: Value = serde_json::from_str(&significance_json(6.0, "alpha", 4, 1, 0.05).unwrap()).unwrap();
        assert_eq!(v["cells"].as_array().unwrap().len(), 300);
        assert_eq!(v["mean_psd"].as_array().unwrap().len(), 300);
        assert_eq!(v["channels"][2], "C3");
        assert!(significance_json(6.0, "gamma", 4, 1, 0.05).is_err());
        assert!(significance_json(6.0, "alpha", 41, 1, 0.05).is_err());
    }

    #[test]
    fn t_curve_starts_at_one_and_falls() {
        let v: Vec<Value> = serde_json::from_str(&t_curve_json(10.0, 5.0).unwrap()).unwrap();
        assert_eq!(v.len(), 201);
        assert_eq!(v[0]["p"], 1.0);
        let ps: Vec<f64> = v.iter().map(|p| p["p"].as_f64().unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[1] < w[0]));
        assert!(t_curve_json(10.0, 0.0).is_err());
    }
}
