use motorclass::dsp::{self, psd_epoch};
use motorclass::eval::{compute_metrics, ConfusionMatrix};
use motorclass::features::Scaler;
use motorclass::fusion::rule_decision;
use motorclass::stats::{paired_t, t_pvalue};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_vec(max_log2: u32) -> impl Strategy<Value = Vec<Complex64>> {
    (0..=max_log2).prop_flat_map(|p| {
        prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1usize << p)
            .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_inverse_round_trip(x in complex_vec(10)) {
        let back = dsp::ifft(&dsp::fft(&x).unwrap()).unwrap();
        let scale = x.iter().map(|v| v.norm()).fold(1e-300, f64::max);
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn parseval(x in complex_vec(10)) {
        let spec = dsp::fft(&x).unwrap();
        let time: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let freq: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-9 * time.max(1e-300));
    }

    #[test]
    fn filter_commutes_with_scaling(
        x in prop::collection::vec(-50.0f64..50.0, 64..700),
        a in -20.0f64..20.0,
    ) {
        let f = dsp::design_bandpass(512.0, 1.0, 50.0, 101).unwrap();
        let y = dsp::apply_filter(&f, &x).unwrap();
        let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
        let ya = dsp::apply_filter(&f, &ax).unwrap();
        let scale = y.iter().map(|v| v.abs()).fold(1e-300, f64::max) * a.abs().max(1.0);
        for (p, q) in ya.iter().zip(&y) {
            prop_assert!((p - a * q).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn psd_ignores_constant_offset(
        x in prop::collection::vec(-50.0f64..50.0, 512),
        c in -1000.0f64..1000.0,
    ) {
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let a = psd_epoch(&x, 512.0).unwrap();
        let b = psd_epoch(&shifted, 512.0).unwrap();
        let scale = a.iter().fold(1e-12, |m, v| f64::max(m, *v));
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn t_pvalue_is_symmetric(t in -50.0f64..50.0, df in 1u32..700) {
        let df = df as f64;
        prop_assert_eq!(t_pvalue(t, df).unwrap(), t_pvalue(-t, df).unwrap());
    }

    #[test]
    fn paired_t_is_antisymmetric(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..40),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = paired_t(&x, &y).unwrap();
        let b = paired_t(&y, &x).unwrap();
        prop_assert_eq!(a.t, -b.t);
        prop_assert_eq!(a.p, b.p);
        prop_assert!((0.0..=1.0).contains(&a.p));
    }

    #[test]
    fn scaler_standardizes_training_columns(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..30),
    ) {
        let s = Scaler::fit(&rows).unwrap();
        let z = s.transform(&rows).unwrap();
        let n = rows.len() as f64;
        for j in 0..4 {
            let mean = z.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!(var.sqrt() < 1e-9 || (var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn label_swap_transposes_confusion(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, tn in 0u64..50) {
        prop_assume!(tp + fp + fn_ + tn > 0);
        let cm = ConfusionMatrix { tp, fp, fn_, tn };
        let sw = cm.swapped();
        prop_assert_eq!((sw.tp, sw.fp, sw.fn_, sw.tn), (tn, fn_, fp, tp));
        let a = compute_metrics(&cm).unwrap();
        let b = compute_metrics(&sw).unwrap();
        prop_assert_eq!(a.accuracy, b.accuracy);
        // Precision of the swapped view is the negative predictive value.
        if tn + fn_ > 0 {
            prop_assert_eq!(b.precision, tn as f64 / (tn + fn_) as f64);
        }
    }
}

#[test]
fn t_pvalue_strictly_decreases_in_abs_t() {
    for df in [1.0, 3.0, 10.0, 100.0, 639.0] {
        let ps: Vec<f64> = (0..100).map(|i| t_pvalue(i as f64 * 0.05, df).unwrap()).collect();
        for w in ps.windows(2) {
            assert!(w[1] < w[0], "df={df}: {} !< {}", w[1], w[0]);
        }
    }
}

#[test]
fn rule_table_exhaustive() {
    for bits in 0..8u8 {
        let (a, b, c) = (bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
        let listed = matches!((a, b, c), (true, true, true) | (true, true, false) | (true, false, true));
        assert_eq!(rule_decision(a, b, c), listed, "{a} {b} {c}");
        // Differs from majority vote exactly on (N, P, P).
        let majority = (a as u8 + b as u8 + c as u8) >= 2;
        assert_eq!(rule_decision(a, b, c) != majority, (a, b, c) == (false, true, true));
    }
}
