#![allow(dead_code)]

use tob_core::config::RunConfig;
use tob_core::pipeline;
use tob_core::synthgen::EpisodeSpec;
use tob_core::thermal_io::{GroundTruth, NormalizedVideo, ThermalVideo};

/// Small frames and short episodes so tests stay quick.
pub fn small_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.height = 24;
    c.width = 32;
    c.duration_s = 40.0;
    c
}

pub fn episode(config: &RunConfig, seed: u64, tob_s: Option<f64>) -> (ThermalVideo, GroundTruth) {
    let mut scene = config.scene();
    scene.tob_s = tob_s;
    EpisodeSpec {
        id: format!("ep{seed:03}"),
        config: scene,
        seed,
    }
    .generate()
    .unwrap()
}

pub fn normalized(config: &RunConfig, seed: u64, tob_s: Option<f64>) -> (NormalizedVideo, GroundTruth) {
    let (raw, truth) = episode(config, seed, tob_s);
    (pipeline::normalize(&raw, config).unwrap(), truth)
}

/// Area under the ROC curve by pair counting, ties worth one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}
