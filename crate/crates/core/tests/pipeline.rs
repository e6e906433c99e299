mod common;

use std::path::PathBuf;

use tob_core::pipeline::{self, Detection, Method, RunLayout};

fn micro_config() -> tob_core::config::RunConfig {
    let mut c = common::small_config();
    c.n_train = 8;
    c.n_test = 3;
    c.seed = 21;
    c
}

fn tempdir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("tob-pipeline-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn staged_run_matches_the_in_memory_experiment() {
    let c = micro_config();
    let root = tempdir("staged");
    let staged = pipeline::run_all(&c, &root).unwrap();
    let memory = pipeline::run_experiment(&c).unwrap();
    assert_eq!(staged.render(), memory.report.render());

    let layout = RunLayout::new(&root);
    assert_eq!(std::fs::read(layout.report()).unwrap(), staged.render().into_bytes());
    for (d, _) in &memory.test {
        let loaded = Detection::load(&layout.detections(), &d.id).unwrap();
        for m in Method::ALL {
            let (a, b) = (loaded.estimate(m).unwrap(), d.estimate(m).unwrap());
            assert_eq!(a.found, b.found, "{} {}", d.id, m.name());
            assert_eq!(a.t_hat, b.t_hat, "{} {}", d.id, m.name());
        }
    }
    std::fs::remove_dir_all(root).unwrap();
}

#[test]
fn overrides_reject_unknown_keys_and_bad_values() {
    let mut c = micro_config();
    c.apply_overrides(&["window=12", "gamma = 0.9"]).unwrap();
    assert_eq!((c.window, c.gamma), (12, 0.9));
    assert!(c.apply_overrides(&["windw=3"]).is_err());
    assert!(c.apply_overrides(&["window=ten"]).is_err());
    c.stride = c.window + 1;
    assert!(c.validate().is_err());
}

#[test]
fn experiment_reports_every_method_and_vnb_rises_after_birth() {
    let out = pipeline::run_experiment(&micro_config()).unwrap();
    for m in Method::ALL {
        let row = out.report.tob_row(m.name()).unwrap();
        assert_eq!(row.stats.errors.len(), 3);
    }
    assert_eq!(out.test.len(), 3);

    let (mut pre, mut post) = (Vec::new(), Vec::new());
    for (d, truth) in &out.test {
        for (t, p) in d.scores.times.iter().zip(&d.scores.p_vnb) {
            if *t < truth.tob_s { pre.push(*p) } else { post.push(*p) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&post) > mean(&pre), "post {} pre {}", mean(&post), mean(&pre));
}
