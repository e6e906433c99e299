use super::model::{FusionCache, FusionModel, ImageHead};
use super::score::VideoFeatures;
use crate::error::{Error, Result};
use crate::nn::{bce, bce_grad, fit, AdamConfig, Parameterized, Standardizer, Tape, TrainConfig, TrainReport};
use crate::seed;
use crate::thermal_io::GroundTruth;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub features: Vec<f64>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub static_mean: Vec<f64>,
    pub temporal: Vec<f64>,
    pub label: bool,
}

pub fn image_head_config(seed: u64) -> TrainConfig {
    TrainConfig {
        adam: AdamConfig::default(),
        max_epochs: 100,
        batch_size: 32,
        patience: 10,
        seed,
    }
}

pub fn fusion_config(seed: u64) -> TrainConfig {
    TrainConfig {
        adam: AdamConfig {
            learning_rate: 1e-4,
            ..AdamConfig::default()
        },
        max_epochs: 100,
        batch_size: 8,
        patience: 10,
        seed,
    }
}

/// Birth has happened by `t` and the newborn is visible at `t`.
pub fn clip_label(t: f64, truth: &GroundTruth) -> bool {
    t >= truth.tob_s && truth.vnb_at(t)
}

/// Between birth and the first second the newborn is visible. Frames and
/// clips here show a partially emerged newborn and are left out of training.
pub fn in_emergence(t: f64, truth: &GroundTruth) -> bool {
    if t < truth.tob_s {
        return false;
    }
    let first_visible = truth.vnb_mask.iter().position(|&v| v);
    first_visible.is_none_or(|s| t < s as f64)
}

/// Every `stride`-th frame with its VNB label, skipping the emergence phase.
pub fn frame_examples(features: &VideoFeatures, truth: &GroundTruth, stride: usize) -> Vec<LabeledFrame> {
    features
        .frame_static
        .iter()
        .enumerate()
        .step_by(stride.max(1))
        .filter_map(|(n, f)| {
            let t = features.frame_time(n);
            (!in_emergence(t, truth)).then(|| LabeledFrame {
                features: f.to_vec(),
                label: truth.vnb_at(t),
            })
        })
        .collect()
}

/// Labeled clips of one video; emergence-phase clips are dropped unless
/// `keep_emergence` is set.
pub fn clip_examples(features: &VideoFeatures, truth: &GroundTruth, keep_emergence: bool) -> Vec<LabeledClip> {
    features
        .clips
        .iter()
        .filter(|c| keep_emergence || !in_emergence(c.t, truth))
        .map(|c| LabeledClip {
            static_mean: c.static_mean.clone(),
            temporal: c.temporal.clone(),
            label: clip_label(c.t, truth),
        })
        .collect()
}

fn check_classes(labels: impl Iterator<Item = bool>, what: &str) -> Result<()> {
    let (mut pos, mut neg) = (0usize, 0usize);
    for l in labels {
        if l {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    if pos + neg == 0 {
        return Err(Error::InsufficientData(format!("no {what} to train on")));
    }
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateData(format!(
            "{what} hold a single class ({pos} positive, {neg} negative)"
        )));
    }
    Ok(())
}

fn mean_bce(labels: &[f64], probs: &[f64]) -> Result<f64> {
    bce(labels, probs)
}

/// Logistic head over standardized static features, trained with BCE.
/// An empty validation set falls back to the training loss for early stopping.
pub fn train_image_head(
    train: &[LabeledFrame],
    val: &[LabeledFrame],
    config: &TrainConfig,
) -> Result<(ImageHead, TrainReport)> {
    check_classes(train.iter().map(|f| f.label), "frames")?;
    let standardizer = Standardizer::fit(train.iter().map(|f| f.features.as_slice()))?;
    let x: Vec<Vec<f64>> = train.iter().map(|f| standardizer.apply(&f.features)).collect();
    let y: Vec<f64> = train.iter().map(|f| f64::from(u8::from(f.label))).collect();
    let val_set = if val.is_empty() { train } else { val };
    let vx: Vec<Vec<f64>> = val_set.iter().map(|f| standardizer.apply(&f.features)).collect();
    let vy: Vec<f64> = val_set.iter().map(|f| f64::from(u8::from(f.label))).collect();
    if let Some(bad) = x.iter().chain(&vx).find(|r| r.len() != standardizer.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "frame has {} features, expected {}",
            bad.len(),
            standardizer.dim()
        )));
    }

    let mut head = ImageHead::new(standardizer);
    let report = fit(
        &mut head,
        x.len(),
        config,
        |h, i, grads| {
            let mut out = [0.0];
            h.dense.forward_into(&x[i], &mut out);
            let g = bce_grad(&y[i..=i], &out)?;
            let [gw, gb] = grads.0.as_mut_slice() else { unreachable!() };
            h.dense.backward(&x[i], &out, &g, gw, gb, false);
            bce(&y[i..=i], &out)
        },
        |h| {
            let probs: Vec<f64> = vx
                .iter()
                .map(|r| {
                    let mut out = [0.0];
                    h.dense.forward_into(r, &mut out);
                    out[0]
                })
                .collect();
            mean_bce(&vy, &probs)
        },
    )?;
    Ok((head, report))
}

/// Trains the refinement, shared and classifier layers on top of a frozen
/// image head. The temporal standardizer is fitted on `train`.
pub fn train_fusion(
    train: &[LabeledClip],
    val: &[LabeledClip],
    image_head: ImageHead,
    config: &TrainConfig,
) -> Result<(FusionModel, TrainReport)> {
    check_classes(train.iter().map(|c| c.label), "clips")?;
    let temporal = Standardizer::fit(train.iter().map(|c| c.temporal.as_slice()))?;
    let mut rng = seed::rng(seed::derive(config.seed, "fusion-init"));
    let mut model = FusionModel::new(image_head, temporal, &mut rng);

    let prep = |set: &[LabeledClip]| -> Result<Vec<(Vec<f64>, Vec<f64>, f64)>> {
        set.iter()
            .map(|c| {
                if c.static_mean.len() != model.spec.static_dim
                    || c.temporal.len() != model.spec.temporal_dim
                {
                    return Err(Error::DimensionMismatch(format!(
                        "clip has {}+{} features, expected {}+{}",
                        c.static_mean.len(),
                        c.temporal.len(),
                        model.spec.static_dim,
                        model.spec.temporal_dim
                    )));
                }
                let (a, b) = model.head_inputs(&c.static_mean, &c.temporal);
                Ok((a, b, f64::from(u8::from(c.label))))
            })
            .collect()
    };
    let xs = prep(train)?;
    let vs = if val.is_empty() { xs.clone() } else { prep(val)? };

    let mut tape: Tape<FusionCache> = Tape::new();
    let report = fit(
        &mut model.head,
        xs.len(),
        config,
        |head, i, grads| {
            let (a, b, y) = &xs[i];
            let p = head.forward_taped(a, b, &mut tape)?;
            let g = bce_grad(&[*y], &[p])?[0];
            head.backward(&mut tape, g, grads)?;
            bce(&[*y], &[p])
        },
        |head| {
            let probs = vs
                .iter()
                .map(|(a, b, _)| head.forward(a, b))
                .collect::<Result<Vec<_>>>()?;
            let ys: Vec<f64> = vs.iter().map(|v| v.2).collect();
            mean_bce(&ys, &probs)
        },
    )?;
    debug_assert_eq!(model.head.param_shapes().len(), 8);
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> GroundTruth {
        // born at 10.5, visible from 13 with an occlusion at 20
        let mut mask = vec![false; 30];
        for (s, m) in mask.iter_mut().enumerate() {
            *m = s >= 13 && s != 20;
        }
        GroundTruth {
            tob_s: 10.5,
            vnb_mask: mask,
        }
    }

    #[test]
    fn clip_labels_follow_birth_and_visibility() {
        let g = truth();
        assert!(!clip_label(10.0, &g));
        assert!(!clip_label(12.0, &g));
        assert!(clip_label(13.0, &g));
        assert!(!clip_label(20.0, &g));
        assert!(clip_label(21.0, &g));
    }

    #[test]
    fn emergence_window() {
        let g = truth();
        assert!(!in_emergence(10.0, &g));
        assert!(in_emergence(10.5, &g));
        assert!(in_emergence(12.9, &g));
        assert!(!in_emergence(13.0, &g));
        assert!(!in_emergence(20.0, &g));
    }

    #[test]
    fn single_class_and_empty_sets_rejected() {
        let f = |label| LabeledFrame {
            features: vec![1.0, 2.0],
            label,
        };
        let cfg = image_head_config(0);
        assert!(matches!(
            train_image_head(&[f(true), f(true)], &[], &cfg),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            train_image_head(&[], &[], &cfg),
            Err(Error::InsufficientData(_))
        ));
    }
}
