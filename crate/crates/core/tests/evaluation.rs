use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use tob_core::aggregation::TobEstimate;
use tob_core::eval::{
    confusion, error_stats, mcc, precision, quantile_type7, recall, tob_error, ClassificationRow,
    ConfusionCounts, Report, TobRow,
};
use tob_core::seed;

/// MCC through the marginal-rate form, independent of the product form.
fn mcc_oracle(probs: &[f64], labels: &[bool], thr: f64) -> Option<f64> {
    let n = probs.len() as f64;
    let tp = probs.iter().zip(labels).filter(|(p, y)| **p >= thr && **y).count() as f64;
    let s = labels.iter().filter(|y| **y).count() as f64 / n;
    let p = probs.iter().filter(|p| **p >= thr).count() as f64 / n;
    let den = (p * s * (1.0 - s) * (1.0 - p)).sqrt();
    (den > 0.0).then(|| (tp / n - s * p) / den)
}

fn ratio_oracle(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// 1-based textbook form: `h = (n - 1) p + 1`, interpolate between
/// `x[floor(h)]` and `x[floor(h) + 1]`.
fn quantile_oracle(xs: &[f64], p: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() as f64 - 1.0) * p + 1.0;
    let j = h.floor() as usize;
    let g = h - j as f64;
    if j >= s.len() {
        return s[s.len() - 1];
    }
    (1.0 - g) * s[j - 1] + g * s[j]
}

#[test]
fn metrics_match_oracles_on_random_instances() {
    let mut rng = seed::rng(2024);
    for case in 0..1000 {
        let n = rng.gen_range(1..200);
        let pos_rate = rng.gen_range(0.0..1.0);
        let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(pos_rate)).collect();
        let c = confusion(&probs, &labels, 0.5).unwrap();
        assert_eq!(c.total(), n as u64);

        let pred: Vec<bool> = probs.iter().map(|&p| p >= 0.5).collect();
        let tp = pred.iter().zip(&labels).filter(|(p, y)| **p && **y).count();
        let pp = pred.iter().filter(|p| **p).count();
        let ap = labels.iter().filter(|y| **y).count();

        let check = |got: tob_core::eval::Ratio, want: Option<f64>, what: &str| match want {
            Some(w) => assert!(got.defined && (got.value - w).abs() < 1e-12, "case {case} {what}"),
            None => assert!(!got.defined, "case {case} {what} should be undefined"),
        };
        check(precision(&c), ratio_oracle(tp, pp), "precision");
        check(recall(&c), ratio_oracle(tp, ap), "recall");
        check(mcc(&c), mcc_oracle(&probs, &labels, 0.5), "mcc");

        let errs: Vec<f64> = (0..rng.gen_range(1..40)).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let abs: Vec<f64> = errs.iter().map(|e: &f64| e.abs()).collect();
        let stats = error_stats(&errs.iter().map(|&e| Some(e)).collect::<Vec<_>>()).unwrap();
        for (got, p) in [(stats.q1, 0.25), (stats.q2, 0.5), (stats.q3, 0.75)] {
            assert!((got.unwrap() - quantile_oracle(&abs, p)).abs() < 1e-12, "case {case} q{p}");
        }
        let mean = abs.iter().sum::<f64>() / abs.len() as f64;
        assert!((stats.mean_abs.unwrap() - mean).abs() < 1e-12);
    }
}

#[test]
fn quartile_examples() {
    let s = error_stats(&[Some(1.0), Some(-2.0), Some(3.0)]).unwrap();
    assert_eq!(s.q2, Some(2.0));
    assert_eq!(quantile_type7(&[1.0, 2.0, 3.0, 4.0], 0.25), Some(1.75));
    assert_eq!(quantile_type7(&[], 0.5), None);
}

proptest! {
    #[test]
    fn error_summary_ignores_video_order(
        errs in prop::collection::vec(prop::option::of(-50.0f64..50.0), 1..40), s in any::<u64>()
    ) {
        let mut shuffled = errs.clone();
        shuffled.shuffle(&mut seed::rng(s));
        let a = error_stats(&errs).unwrap();
        let b = error_stats(&shuffled).unwrap();
        prop_assert_eq!((a.q1, a.q2, a.q3, a.count_pct), (b.q1, b.q2, b.q3, b.count_pct));
        let same_mean = match (a.mean_abs, b.mean_abs) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-9,
            (x, y) => x == y,
        };
        prop_assert!(same_mean);
        let found = errs.iter().flatten().count() as f64;
        prop_assert!((a.count_pct - 100.0 * found / errs.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn missing_estimates_lower_the_count_only() {
    let found = TobEstimate {
        found: true,
        t_hat: Some(53.0),
        peak: 1.4,
        threshold: 0.95,
    };
    let e = [tob_error(&found, 50.0), tob_error(&TobEstimate::not_found(0.3, 0.95), 50.0)];
    let s = error_stats(&e).unwrap();
    assert_eq!(s.count_pct, 50.0);
    assert_eq!(s.q2, Some(3.0));
}

fn sample_report() -> Report {
    Report {
        classification: vec![ClassificationRow {
            method: "two_stream".into(),
            counts: ConfusionCounts {
                tp: 10,
                fp: 0,
                tn: 0,
                fn_: 2,
            },
        }],
        tob: vec![TobRow {
            method: "two_stream_agg".into(),
            stats: error_stats(&[Some(1.0), Some(-2.5), None]).unwrap(),
        }],
    }
}

#[test]
fn report_rendering() {
    let text = sample_report().render();
    assert_eq!(
        text,
        "method,precision,recall,mcc,tp,fp,tn,fn\n\
         two_stream,1.000000,0.833333,,10,0,0,2\n\
         \n\
         method,q1,q2,q3,mean_abs,count_pct,videos\n\
         two_stream_agg,1.375000,1.750000,2.125000,1.750000,66.67,3\n"
    );
    assert_eq!(sample_report().render(), text);
}
