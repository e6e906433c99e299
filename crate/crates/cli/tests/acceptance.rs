//! End-to-end acceptance checks, one line per criterion.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use tob_core::aggregation::{
    aggregation_loss, aggregation_loss_grad, build_labels, AuxModel, AuxOutput, LossWeights, Targets,
};
use tob_core::config::RunConfig;
use tob_core::eval::{confusion, error_stats, mcc, precision, recall, Ratio};
use tob_core::fusion::{FusionHead, STATIC_DIM, TEMPORAL_DIM};
use tob_core::nn::{bce, bce_grad, gradcheck, Grads, Parameterized, Tape};
use tob_core::normalize::fit_gmm;
use tob_core::pipeline::{self, ExperimentOutcome, Method};
use tob_core::seed;
use tob_core::synthgen::{EpisodeSpec, SceneStyle};
use tob_core::windowing::ClipSchedule;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn experiment() -> (ExperimentOutcome, f64) {
    let start = Instant::now();
    let outcome = pipeline::run_experiment(&RunConfig::default()).expect("experiment runs");
    (outcome, start.elapsed().as_secs_f64())
}

fn end_to_end(exp: &ExperimentOutcome, secs: f64) -> Outcome {
    let plan = pipeline::test_corpus_plan(&RunConfig::default()).map_err(|e| e.to_string())?;
    let theater = plan
        .iter()
        .filter(|e| e.config.scene_style == SceneStyle::OperatingTheater)
        .count();
    let row = exp
        .report
        .tob_row(Method::TwoStreamAgg.name())
        .ok_or("no aggregation row")?;
    let s = &row.stats;
    let median = s.q2.unwrap_or(f64::INFINITY);
    let mean = s.mean_abs.unwrap_or(f64::INFINITY);
    ensure(
        exp.test.len() == 35
            && theater == 10
            && s.count_pct == 100.0
            && median <= 2.0
            && mean <= 5.0
            && secs < 600.0,
        format!(
            "{} test videos ({theater} theater), count {:.2}%, median {median:.3} s, mean {mean:.3} s, {secs:.0} s",
            exp.test.len(),
            s.count_pct
        ),
    )
}

fn baseline_ordering(exp: &ExperimentOutcome) -> Outcome {
    let count = |m: Method| exp.report.tob_row(m.name()).map(|r| r.stats.count_pct);
    let (thr, hct, agg) = (
        count(Method::ThresholdFirst),
        count(Method::FirHct),
        count(Method::TwoStreamAgg),
    );
    let ok = matches!((thr, hct, agg), (Some(_), Some(h), Some(a)) if h <= a);
    ensure(
        ok,
        format!("counts threshold_first {thr:?}, fir_hct {hct:?}, two_stream_agg {agg:?}"),
    )
}

fn fusion_gradcheck() -> gradcheck::GradCheckReport {
    let mut rng = seed::rng(301);
    let mut head = FusionHead::init(STATIC_DIM, TEMPORAL_DIM, &mut rng);
    let xi: Vec<f64> = (0..STATIC_DIM).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let xv: Vec<f64> = (0..TEMPORAL_DIM).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let loss = |h: &FusionHead| bce(&[1.0], &[h.forward(&xi, &xv).unwrap()]).unwrap();
    let mut tape = Tape::new();
    let p = head.forward_taped(&xi, &xv, &mut tape).unwrap();
    let g = bce_grad(&[1.0], &[p]).unwrap()[0];
    let mut grads = Grads::zeros(&head.param_shapes());
    head.backward(&mut tape, g, &mut grads).unwrap();
    gradcheck::check(&mut head, &grads, loss, 1e-5, 200, 302)
}

fn aux_gradcheck() -> gradcheck::GradCheckReport {
    let mut rng = seed::rng(303);
    let mut m = AuxModel::init(&mut rng);
    let w = 8;
    let rows: Vec<f64> = (0..2 * w).map(|_| rng.gen_range(0.0..1.0)).collect();
    let times: Vec<f64> = (0..w).map(|t| t as f64).collect();
    let labels = build_labels(4.0, &times).unwrap();
    let targets = Targets {
        evt: &labels.y_evt,
        tr: &labels.y_tr,
        joint: &labels.y_joint,
    };
    let weights = LossWeights::default();
    let mut tape = Tape::new();
    let pred = m.forward_taped(&rows, &mut tape).unwrap();
    let (ge, gt) = aggregation_loss_grad(&targets, &pred, &weights).unwrap();
    let mut grads = Grads::zeros(&m.param_shapes());
    m.backward(&mut tape, &ge, &gt, &mut grads).unwrap();
    let loss = |m: &AuxModel| aggregation_loss(&targets, &m.forward(&rows).unwrap(), &weights).unwrap();
    gradcheck::check(&mut m, &grads, loss, 1e-5, 200, 304)
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let f = fusion_gradcheck();
    let a = aux_gradcheck();
    let secs = start.elapsed().as_secs_f64();
    ensure(
        f.probes >= 100 && a.probes >= 100 && f.max_rel_error < 1e-4 && a.max_rel_error < 1e-4 && secs < 30.0,
        format!(
            "fusion head {} probes max rel {:.2e}, aux {} probes max rel {:.2e}, {secs:.2} s",
            f.probes, f.max_rel_error, a.probes, a.max_rel_error
        ),
    )
}

fn gmm_recovery() -> Outcome {
    let mut rng = seed::rng(401);
    let lo = Normal::new(200.0, 10.0).unwrap();
    let hi = Normal::new(700.0, 15.0).unwrap();
    let samples: Vec<f64> = (0..10_000)
        .map(|_| {
            if rng.gen_bool(0.5) {
                lo.sample(&mut rng)
            } else {
                hi.sample(&mut rng)
            }
        })
        .collect();
    let fit = fit_gmm(&samples, 2, 1e-6, 200, 402).map_err(|e| e.to_string())?;
    let means = fit.sorted_means();
    let monotone = fit
        .log_likelihood_trace
        .windows(2)
        .all(|p| p[1] >= p[0] - 1e-12 * p[0].abs());
    ensure(
        (means[0] - 200.0).abs() <= 5.0 && (means[1] - 700.0).abs() <= 5.0 && monotone,
        format!(
            "means {:.2} / {:.2}, {} EM steps, log-likelihood non-decreasing: {monotone}",
            means[0],
            means[1],
            fit.log_likelihood_trace.len()
        ),
    )
}

fn normalization_invariance() -> Outcome {
    let mut config = RunConfig::default();
    config.height = 24;
    config.width = 32;
    config.duration_s = 40.0;
    let normalizer = config.normalizer();
    let mut scene = config.scene();
    let mut rng = seed::rng(501);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        scene.scene_style = if i % 3 == 0 {
            SceneStyle::OperatingTheater
        } else {
            SceneStyle::DeliveryRoom
        };
        let spec = EpisodeSpec {
            id: format!("inv{i:02}"),
            config: scene.clone(),
            seed: rng.gen(),
        };
        let (raw, _) = spec.generate().map_err(|e| e.to_string())?;
        let offset = rng.gen_range(-150.0..150.0);
        let base = normalizer.run(&raw, 9).map_err(|e| e.to_string())?;
        let moved = normalizer.run(&raw.shifted(offset), 9).map_err(|e| e.to_string())?;
        let diff = base
            .video
            .video()
            .data()
            .iter()
            .zip(moved.video.video().data())
            .map(|(a, b)| (f64::from(*a) - f64::from(*b)).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    ensure(worst < 1e-6, format!("20 videos, max per-pixel change {worst:.2e}"))
}

/// Every grid time `t0 + k tau <= T` whose end frame has a full window.
fn brute_force_schedule(n_frames: usize, rate: f64, clip_len: usize, tau: f64) -> Vec<(f64, usize)> {
    let t0 = (clip_len as f64 / rate).floor();
    let mut t_end = (n_frames as f64 / rate).floor();
    if (rate * t_end).floor() as usize > n_frames - 1 {
        t_end -= 1.0;
    }
    let mut out = Vec::new();
    let mut k = 0.0;
    while t0 + k * tau <= t_end {
        let t = t0 + k * tau;
        let n = (rate * t).floor() as usize;
        if n + 1 >= clip_len && n < n_frames {
            out.push((t, n));
        }
        k += 1.0;
    }
    out
}

fn windowing() -> Outcome {
    let t0 = ClipSchedule::new(999, 8.33, 25, 1.0).map_err(|e| e.to_string())?.t0;
    let mut rng = seed::rng(601);
    let mut mismatches = Vec::new();
    for _ in 0..50 {
        let n = rng.gen_range(1..3000);
        let f = rng.gen_range(1..60);
        let tau = f64::from(rng.gen_range(1u8..5));
        let want = brute_force_schedule(n, 8.33, f, tau);
        let got = ClipSchedule::new(n, 8.33, f, tau).map(|s| s.entries).unwrap_or_default();
        if got != want {
            mismatches.push((n, f, tau));
        }
    }
    ensure(
        t0 == 3.0 && mismatches.is_empty(),
        format!("t0 = {t0}, 50 (N, F, tau) triples, mismatches {mismatches:?}"),
    )
}

fn loss_identity() -> Outcome {
    let zeros = vec![0.0; 16];
    let pred = AuxOutput::from_parts(vec![0.5; 16], vec![0.5; 16]);
    let targets = Targets {
        evt: &zeros,
        tr: &zeros,
        joint: &zeros,
    };
    let l = aggregation_loss(&targets, &pred, &LossWeights::default()).map_err(|e| e.to_string())?;
    ensure((l - 0.7545).abs() < 1e-4, format!("loss {l:.6}"))
}

/// MCC through marginal rates rather than the product of counts.
fn mcc_oracle(probs: &[f64], labels: &[bool]) -> Option<f64> {
    let n = probs.len() as f64;
    let tp = probs.iter().zip(labels).filter(|(p, y)| **p >= 0.5 && **y).count() as f64;
    let s = labels.iter().filter(|y| **y).count() as f64 / n;
    let p = probs.iter().filter(|p| **p >= 0.5).count() as f64 / n;
    let den = (p * s * (1.0 - s) * (1.0 - p)).sqrt();
    (den > 0.0).then(|| (tp / n - s * p) / den)
}

/// 1-based form `h = (n - 1) p + 1`.
fn quantile_oracle(xs: &[f64], p: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() as f64 - 1.0) * p + 1.0;
    let j = h.floor() as usize;
    if j >= s.len() {
        return s[s.len() - 1];
    }
    let g = h - j as f64;
    (1.0 - g) * s[j - 1] + g * s[j]
}

fn agrees(got: Ratio, want: Option<f64>) -> bool {
    match want {
        Some(w) => got.defined && (got.value - w).abs() < 1e-12,
        None => !got.defined,
    }
}

fn metric_oracles() -> Outcome {
    let mut rng = seed::rng(801);
    let mut failures = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..200);
        let rate = rng.gen_range(0.0..1.0);
        let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(rate)).collect();
        let c = confusion(&probs, &labels, 0.5).map_err(|e| e.to_string())?;
        let tp = probs.iter().zip(&labels).filter(|(p, y)| **p >= 0.5 && **y).count();
        let pp = probs.iter().filter(|p| **p >= 0.5).count();
        let ap = labels.iter().filter(|y| **y).count();
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        let mut ok = agrees(precision(&c), ratio(tp, pp))
            && agrees(recall(&c), ratio(tp, ap))
            && agrees(mcc(&c), mcc_oracle(&probs, &labels));

        let errs: Vec<f64> = (0..rng.gen_range(1..40)).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
        let stats = error_stats(&errs.iter().map(|&e| Some(e)).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
        for (q, p) in [(stats.q1, 0.25), (stats.q2, 0.5), (stats.q3, 0.75)] {
            ok &= q.is_some_and(|q| (q - quantile_oracle(&abs, p)).abs() < 1e-12);
        }
        let mean = abs.iter().sum::<f64>() / abs.len() as f64;
        ok &= stats.mean_abs.is_some_and(|m| (m - mean).abs() < 1e-12);
        failures += usize::from(!ok);
    }
    ensure(failures == 0, format!("1000 instances, {failures} disagreements"))
}

fn run_all(root: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_tob"))
        .args(["--seed", "13"])
        .args(["--set", "n_train=8", "--set", "n_test=3"])
        .args(["--set", "height=24", "--set", "width=32", "--set", "duration_s=40"])
        .arg("run-all")
        .arg("--out")
        .arg(root)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn artifacts(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut names: Vec<String> = fs::read_dir(root.join("models"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .map(|n| format!("models/{n}"))
        .collect();
    names.sort();
    names.push("report.csv".into());
    names
        .into_iter()
        .map(|n| fs::read(root.join(&n)).map(|b| (n, b)).map_err(|e| e.to_string()))
        .collect()
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_all(a.path())?;
    run_all(b.path())?;
    let (fa, fb) = (artifacts(a.path())?, artifacts(b.path())?);
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    ensure(
        fa.len() >= 4 && fa == fb,
        format!("compared {names:?}, identical: {}", fa == fb),
    )
}

fn fallback(exp: &ExperimentOutcome) -> Outcome {
    let config = RunConfig::default();
    let (mut agg, mut hct) = (0, 0);
    let videos = &exp.test[..10.min(exp.test.len())];
    for (d, _) in videos {
        let zeroed = d.scores.with_fusion_zeroed();
        let z = pipeline::detect(&d.id, &zeroed, &exp.models.aux, &config).map_err(|e| e.to_string())?;
        agg += usize::from(z.estimate(Method::TwoStreamAgg).is_some_and(|e| e.found));
        hct += usize::from(z.estimate(Method::FirHct).is_some_and(|e| e.found));
    }
    ensure(
        videos.len() == 10 && agg >= 1 && hct == 0,
        format!("{} videos with p_fusion zeroed, aggregation found {agg}, fir_hct found {hct}", videos.len()),
    )
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let exp = guarded(|| Ok(experiment()));
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    match &exp {
        Ok((e, secs)) => {
            results.push((1, guarded(|| end_to_end(e, *secs))));
            results.push((2, guarded(|| baseline_ordering(e))));
        }
        Err(msg) => {
            results.push((1, Err(msg.clone())));
            results.push((2, Err(msg.clone())));
        }
    }
    results.push((3, guarded(gradients)));
    results.push((4, guarded(gmm_recovery)));
    results.push((5, guarded(normalization_invariance)));
    results.push((6, guarded(windowing)));
    results.push((7, guarded(loss_identity)));
    results.push((8, guarded(metric_oracles)));
    results.push((9, guarded(determinism)));
    results.push((
        10,
        match &exp {
            Ok((e, _)) => guarded(|| fallback(e)),
            Err(msg) => Err(msg.clone()),
        },
    ));

    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(d) => println!("criterion {n:>2}: PASS  {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
