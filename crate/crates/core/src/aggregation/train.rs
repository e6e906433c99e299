use rand::Rng;

use super::labels::build_labels;
use super::loss::{aggregation_loss, aggregation_loss_grad, LossWeights, Targets};
use super::model::{AuxCache, AuxModel};
use super::segments::window_segments;
use crate::error::{Error, Result};
use crate::fusion::ScoreSeries;
use crate::nn::{fit, AdamConfig, Tape, TrainConfig, TrainReport};
use crate::seed;

/// Scores of one video with its annotated birth time.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxVideo {
    pub scores: ScoreSeries,
    pub tob_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxTrainConfig {
    pub train: TrainConfig,
    pub window: usize,
    pub stride: usize,
    pub weights: LossWeights,
    /// Share of training windows that are also presented with `p_fusion`
    /// zeroed, so the model learns to lean on `p_vnb` alone.
    pub fusion_dropout: f64,
}

impl AuxTrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            train: TrainConfig {
                adam: AdamConfig::default(),
                max_epochs: 100,
                batch_size: 8,
                patience: 10,
                seed,
            },
            window: 10,
            stride: 1,
            weights: LossWeights::default(),
            fusion_dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Example {
    rows: Vec<f64>,
    evt: Vec<f64>,
    tr: Vec<f64>,
    joint: Vec<f64>,
}

fn examples(videos: &[AuxVideo], config: &AuxTrainConfig, rng: Option<&mut rand_chacha::ChaCha8Rng>) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    let mut rng = rng;
    for v in videos {
        let labels = build_labels(v.tob_s, &v.scores.times)?;
        for seg in window_segments(&v.scores, config.window, config.stride)? {
            let (evt, tr, joint) = labels.slice(seg.start, seg.len());
            let ex = Example {
                rows: seg.rows,
                evt: evt.to_vec(),
                tr: tr.to_vec(),
                joint: joint.to_vec(),
            };
            if let Some(r) = rng.as_deref_mut() {
                if config.fusion_dropout > 0.0 && r.gen_bool(config.fusion_dropout) {
                    let mut zeroed = ex.clone();
                    zeroed.rows.iter_mut().step_by(2).for_each(|p| *p = 0.0);
                    out.push(zeroed);
                }
            }
            out.push(ex);
        }
    }
    Ok(out)
}

fn covers_birth(v: &AuxVideo) -> bool {
    let t = &v.scores.times;
    !t.is_empty() && t[0] < v.tob_s && v.tob_s <= t[t.len() - 1]
}

/// Fits an [`AuxModel`] on every window of `train`, early-stopping on the
/// windows of `val` (or of `train` when `val` is empty).
pub fn train_aux(
    train: &[AuxVideo],
    val: &[AuxVideo],
    config: &AuxTrainConfig,
) -> Result<(AuxModel, TrainReport)> {
    config.weights.validate()?;
    if !(0.0..=1.0).contains(&config.fusion_dropout) {
        return Err(Error::config("fusion_dropout", "must lie in [0, 1]"));
    }
    if train.len() + val.len() < 2 || !train.iter().any(covers_birth) {
        return Err(Error::InsufficientData(
            "aggregation training needs at least two videos with pre- and post-birth scores".into(),
        ));
    }
    let mut aug_rng = seed::rng(seed::derive(config.train.seed, "aux-dropout"));
    let xs = examples(train, config, Some(&mut aug_rng))?;
    let vs = if val.is_empty() {
        examples(train, config, None)?
    } else {
        examples(val, config, None)?
    };
    let mut model = AuxModel::init(&mut seed::rng(seed::derive(config.train.seed, "aux-init")));
    let weights = config.weights;
    let mut tape: Tape<AuxCache> = Tape::new();
    let report = fit(
        &mut model,
        xs.len(),
        &config.train,
        |m, i, grads| {
            let ex = &xs[i];
            let pred = m.forward_taped(&ex.rows, &mut tape)?;
            let targets = Targets {
                evt: &ex.evt,
                tr: &ex.tr,
                joint: &ex.joint,
            };
            let (g_evt, g_tr) = aggregation_loss_grad(&targets, &pred, &weights)?;
            m.backward(&mut tape, &g_evt, &g_tr, grads)?;
            aggregation_loss(&targets, &pred, &weights)
        },
        |m| {
            let mut total = 0.0;
            for ex in &vs {
                let pred = m.forward(&ex.rows)?;
                let targets = Targets {
                    evt: &ex.evt,
                    tr: &ex.tr,
                    joint: &ex.joint,
                };
                total += aggregation_loss(&targets, &pred, &weights)?;
            }
            Ok(total / vs.len().max(1) as f64)
        },
    )?;
    Ok((model, report))
}
