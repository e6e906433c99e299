//! Stage functions and their file-based wrappers.
//!
//! The pure stage functions ([`extract_features`], [`fit_image_head`],
//! [`fit_fusion`], [`fit_aggregation`], [`detect`], [`evaluate`]) are shared
//! by the CLI stages, [`run_all`] and the in-memory [`run_experiment`].
//!
//! On disk a corpus directory holds `<id>.tobv` videos next to `<id>.meta`
//! annotations; score and detection directories hold `<id>.csv` tables and
//! detection directories also `<id>.est` estimates.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::aggregation::{
    estimate_tob, fir_filter, hct_detect, predict_series, threshold_first, train_aux, AuxModel,
    AuxOutput, AuxVideo, TobEstimate,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{confusion, error_stats, tob_error, ClassificationRow, ConfusionCounts, Report, TobRow};
use crate::fusion::{
    clip_examples, clip_label, frame_examples, score_features, train_fusion, train_image_head,
    FusionModel, ImageHead, ScoreSeries, VideoFeatures,
};
use crate::nn::TrainReport;
use crate::seed;
use crate::synthgen::{plan_corpus, EpisodeSpec, SceneConfig};
use crate::thermal_io::{load_video, save_video, GroundTruth, Metadata, NormalizedVideo, ThermalVideo};

pub const VIDEO_EXT: &str = "tobv";
pub const META_EXT: &str = "meta";
pub const TABLE_EXT: &str = "csv";
pub const ESTIMATE_EXT: &str = "est";

pub const IMAGE_HEAD_FILE: &str = "image_head.tobm";
pub const FUSION_FILE: &str = "fusion.tobm";
pub const AUX_FILE: &str = "aux.tobm";
pub const REPORT_FILE: &str = "report.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ThresholdFirst,
    Fir,
    FirHct,
    TwoStreamAgg,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::ThresholdFirst,
        Method::Fir,
        Method::FirHct,
        Method::TwoStreamAgg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ThresholdFirst => "threshold_first",
            Method::Fir => "fir",
            Method::FirHct => "fir_hct",
            Method::TwoStreamAgg => "two_stream_agg",
        }
    }
}

/// Indices of a train/validation split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Seeded split holding out `round(n * fraction)` items, at least
/// `min_val` and never all of them.
pub fn split_indices(n: usize, fraction: f64, min_val: usize, seed: u64) -> Split {
    let n_val = ((n as f64 * fraction).round() as usize)
        .max(min_val)
        .min(n.saturating_sub(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Split { train, val }
}

/// The training-corpus split shared by every training stage.
pub fn corpus_split(n: usize, config: &RunConfig) -> Split {
    split_indices(n, config.val_fraction, 2, seed::derive(config.seed, "split"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVideo {
    pub features: VideoFeatures,
    pub truth: GroundTruth,
}

pub fn normalization_seed(config: &RunConfig, id: &str) -> u64 {
    seed::derive(config.seed, &format!("normalize/{id}"))
}

pub fn normalize(video: &ThermalVideo, config: &RunConfig) -> Result<NormalizedVideo> {
    Ok(config
        .normalizer()
        .run(video, normalization_seed(config, &video.id))?
        .video)
}

pub fn extract_features(video: &NormalizedVideo, config: &RunConfig) -> Result<VideoFeatures> {
    VideoFeatures::extract(video, config.clip_len, config.tau)
}

pub fn fit_image_head(
    train: &[&LabeledVideo],
    val: &[&LabeledVideo],
    config: &RunConfig,
) -> Result<(ImageHead, TrainReport)> {
    let frames = |set: &[&LabeledVideo]| {
        set.iter()
            .flat_map(|v| frame_examples(&v.features, &v.truth, config.frame_stride))
            .collect::<Vec<_>>()
    };
    train_image_head(&frames(train), &frames(val), &config.image_head_train())
}

pub fn fit_fusion(
    train: &[&LabeledVideo],
    val: &[&LabeledVideo],
    image_head: ImageHead,
    config: &RunConfig,
) -> Result<(FusionModel, TrainReport)> {
    let clips = |set: &[&LabeledVideo]| {
        set.iter()
            .flat_map(|v| clip_examples(&v.features, &v.truth, false))
            .collect::<Vec<_>>()
    };
    train_fusion(&clips(train), &clips(val), image_head, &config.fusion_train())
}

/// Trains the aggregation model on the validation videos of the fusion
/// split, holding out a share of them for early stopping.
pub fn fit_aggregation(videos: &[AuxVideo], config: &RunConfig) -> Result<(AuxModel, TrainReport)> {
    let split = split_indices(
        videos.len(),
        config.agg_val_fraction,
        0,
        seed::derive(config.seed, "agg-split"),
    );
    let pick = |idx: &[usize]| idx.iter().map(|&i| videos[i].clone()).collect::<Vec<_>>();
    train_aux(&pick(&split.train), &pick(&split.val), &config.aux_train())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub id: String,
    pub scores: ScoreSeries,
    pub aux: AuxOutput,
    pub estimates: Vec<(Method, TobEstimate)>,
}

impl Detection {
    pub fn estimate(&self, method: Method) -> Option<&TobEstimate> {
        self.estimates.iter().find(|(m, _)| *m == method).map(|(_, e)| e)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,p_fusion,p_vnb,y_evt_hat,y_tr_hat,y_joint_hat\n");
        let s = &self.scores;
        for i in 0..s.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.times[i], s.p_fusion[i], s.p_vnb[i], self.aux.evt[i], self.aux.tr[i], self.aux.joint[i]
            ));
        }
        out
    }

    pub fn estimates_metadata(&self) -> Metadata {
        let mut meta = Metadata::default();
        for (m, e) in &self.estimates {
            meta.set(&format!("{}.found", m.name()), e.found);
            meta.set(
                &format!("{}.t_hat", m.name()),
                e.t_hat.map_or_else(|| "none".to_owned(), |t| t.to_string()),
            );
            meta.set(&format!("{}.peak", m.name()), e.peak);
            meta.set(&format!("{}.threshold", m.name()), e.threshold);
        }
        meta
    }

    fn parse_estimates(meta: &Metadata) -> Result<Vec<(Method, TobEstimate)>> {
        Method::ALL
            .iter()
            .map(|&m| {
                let key = |f: &str| format!("{}.{f}", m.name());
                let t_hat = match meta.require(&key("t_hat"))? {
                    "none" => None,
                    v => Some(v.parse().map_err(|_| Error::Metadata(format!("bad {}", key("t_hat"))))?),
                };
                Ok((
                    m,
                    TobEstimate {
                        found: meta.parse(&key("found"))?,
                        t_hat,
                        peak: meta.parse(&key("peak"))?,
                        threshold: meta.parse(&key("threshold"))?,
                    },
                ))
            })
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let csv = dir.join(format!("{}.{TABLE_EXT}", self.id));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        self.estimates_metadata()
            .save(&dir.join(format!("{}.{ESTIMATE_EXT}", self.id)))
    }

    pub fn load(dir: &Path, id: &str) -> Result<Self> {
        let csv = dir.join(format!("{id}.{TABLE_EXT}"));
        let text = fs::read_to_string(&csv).map_err(|e| Error::io(&csv, e))?;
        let scores = ScoreSeries::from_csv(&text)?;
        let (mut evt, mut tr) = (Vec::new(), Vec::new());
        for (i, line) in text.lines().skip(1).filter(|l| !l.trim().is_empty()).enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            let num = |k: usize| -> Result<f64> {
                cols.get(k)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Metadata(format!("bad detection row {}", i + 2)))
            };
            evt.push(num(3)?);
            tr.push(num(4)?);
        }
        let estimates =
            Self::parse_estimates(&Metadata::load(&dir.join(format!("{id}.{ESTIMATE_EXT}")))?)?;
        Ok(Self {
            id: id.to_owned(),
            scores,
            aux: AuxOutput::from_parts(evt, tr),
            estimates,
        })
    }
}

/// Birth-time estimates of every method for one scored video.
pub fn detect(id: &str, scores: &ScoreSeries, aux: &AuxModel, config: &RunConfig) -> Result<Detection> {
    let pred = predict_series(aux, scores, config.window, config.stride)?;
    let t = &scores.times;
    let filtered = fir_filter(&scores.p_fusion, config.taps)?;
    let estimates = vec![
        (Method::ThresholdFirst, threshold_first(&scores.p_fusion, t)?),
        (Method::Fir, threshold_first(&filtered, t)?),
        (Method::FirHct, hct_detect(&filtered, t, config.theta)?),
        (Method::TwoStreamAgg, estimate_tob(&pred.joint, t, config.gamma)?),
    ];
    Ok(Detection {
        id: id.to_owned(),
        scores: scores.clone(),
        aux: pred,
        estimates,
    })
}

pub const CLASSIFIERS: [&str; 2] = ["two_stream", "image_vnb"];

/// Clip-level classification counts and birth-time error statistics.
pub fn evaluate(runs: &[(Detection, GroundTruth)]) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::InsufficientData("no detections to evaluate".into()));
    }
    let mut fused = ConfusionCounts::default();
    let mut vnb = ConfusionCounts::default();
    for (d, truth) in runs {
        let s = &d.scores;
        let births: Vec<bool> = s.times.iter().map(|&t| clip_label(t, truth)).collect();
        let visible: Vec<bool> = s.times.iter().map(|&t| truth.vnb_at(t)).collect();
        fused.merge(&confusion(&s.p_fusion, &births, 0.5)?);
        vnb.merge(&confusion(&s.p_vnb, &visible, 0.5)?);
    }
    let classification = vec![
        ClassificationRow {
            method: CLASSIFIERS[0].into(),
            counts: fused,
        },
        ClassificationRow {
            method: CLASSIFIERS[1].into(),
            counts: vnb,
        },
    ];
    let tob = Method::ALL
        .iter()
        .map(|&m| {
            let errors: Vec<Option<f64>> = runs
                .iter()
                .map(|(d, truth)| d.estimate(m).and_then(|e| tob_error(e, truth.tob_s)))
                .collect();
            Ok(TobRow {
                method: m.name().into(),
                stats: error_stats(&errors)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Report {
        classification,
        tob,
    })
}

// ---------------------------------------------------------------------------
// In-memory experiment

pub fn train_corpus_plan(config: &RunConfig) -> Result<Vec<EpisodeSpec>> {
    plan_corpus(
        config.n_train,
        config.theater_share,
        &config.scene(),
        seed::derive(config.seed, "train-corpus"),
    )
}

pub fn test_corpus_plan(config: &RunConfig) -> Result<Vec<EpisodeSpec>> {
    plan_corpus(
        config.n_test,
        config.theater_share,
        &config.scene(),
        seed::derive(config.seed, "test-corpus"),
    )
}

/// Generates, normalizes and featurizes one episode in memory.
pub fn featurize(spec: &EpisodeSpec, config: &RunConfig) -> Result<LabeledVideo> {
    let (video, truth) = spec.generate()?;
    let normalized = normalize(&video, config)?;
    Ok(LabeledVideo {
        features: extract_features(&normalized, config)?,
        truth,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModels {
    pub image_head: ImageHead,
    pub fusion: FusionModel,
    pub aux: AuxModel,
    pub image_head_report: TrainReport,
    pub fusion_report: TrainReport,
    pub aux_report: TrainReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub models: TrainedModels,
    pub test: Vec<(Detection, GroundTruth)>,
    pub report: Report,
}

/// Trains on freshly generated videos and evaluates on a separate test
/// corpus, keeping only features in memory.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let train_videos = train_corpus_plan(config)?
        .iter()
        .map(|s| featurize(s, config))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("features"))?;
    let models = train_all(&train_videos, config)?;
    let test = test_corpus_plan(config)?
        .iter()
        .map(|s| {
            let v = featurize(s, config)?;
            let scores = score_features(&models.fusion, &v.features)?;
            Ok((detect(&v.features.id, &scores, &models.aux, config)?, v.truth))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("detect"))?;
    let report = evaluate(&test).map_err(|e| e.in_stage("evaluate"))?;
    Ok(ExperimentOutcome {
        models,
        test,
        report,
    })
}

/// Image head, fusion model and aggregation model from one training corpus.
pub fn train_all(videos: &[LabeledVideo], config: &RunConfig) -> Result<TrainedModels> {
    let split = corpus_split(videos.len(), config);
    let train: Vec<&LabeledVideo> = split.train.iter().map(|&i| &videos[i]).collect();
    let val: Vec<&LabeledVideo> = split.val.iter().map(|&i| &videos[i]).collect();
    let (image_head, image_head_report) =
        fit_image_head(&train, &val, config).map_err(|e| e.in_stage("train-image-head"))?;
    let (fusion, fusion_report) = fit_fusion(&train, &val, image_head.clone(), config)
        .map_err(|e| e.in_stage("train-fusion"))?;
    let aux_videos = val
        .iter()
        .map(|v| {
            Ok(AuxVideo {
                scores: score_features(&fusion, &v.features)?,
                tob_s: v.truth.tob_s,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("score"))?;
    let (aux, aux_report) =
        fit_aggregation(&aux_videos, config).map_err(|e| e.in_stage("train-agg"))?;
    Ok(TrainedModels {
        image_head,
        fusion,
        aux,
        image_head_report,
        fusion_report,
        aux_report,
    })
}

// ---------------------------------------------------------------------------
// File-based stages

/// Sorted ids of files with extension `ext` in `dir`.
pub fn list_ids(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_owned());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Runs `f`, tagging any error with the stage name.
fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn file(dir: &Path, id: &str, ext: &str) -> PathBuf {
    dir.join(format!("{id}.{ext}"))
}

pub fn load_truth(dir: &Path, id: &str) -> Result<GroundTruth> {
    GroundTruth::from_metadata(&Metadata::load(&file(dir, id, META_EXT))?)
}

/// Writes a synthetic corpus; returns the episode ids.
pub fn generate_stage(
    out: &Path,
    n_videos: usize,
    theater_share: f64,
    scene: &SceneConfig,
    seed: u64,
) -> Result<Vec<String>> {
    stage("generate", || {
        create_dir(out)?;
        let plan = plan_corpus(n_videos, theater_share, scene, seed)?;
        for spec in &plan {
            let (video, truth) = spec.generate()?;
            save_video(&video, &file(out, &spec.id, VIDEO_EXT))?;
            let mut meta = truth.to_metadata();
            meta.set("scene_style", spec.config.scene_style.name());
            meta.set("seed", spec.seed);
            meta.save(&file(out, &spec.id, META_EXT))?;
        }
        Ok(plan.into_iter().map(|s| s.id).collect())
    })
}

/// Normalizes every video of `corpus` into `out`, copying annotations and
/// recording the fitted skin mode.
pub fn normalize_stage(corpus: &Path, out: &Path, config: &RunConfig) -> Result<()> {
    stage("normalize", || {
        let ids = list_ids(corpus, VIDEO_EXT)?;
        create_dir(out)?;
        for id in &ids {
            let video = load_video(&file(corpus, id, VIDEO_EXT))?;
            let outcome = config.normalizer().run(&video, normalization_seed(config, id))?;
            save_video(outcome.video.video(), &file(out, id, VIDEO_EXT))?;
            let meta_path = file(corpus, id, META_EXT);
            let mut meta = if meta_path.exists() {
                Metadata::load(&meta_path)?
            } else {
                Metadata::default()
            };
            meta.set("mu_hat", outcome.mode.mu_hat);
            meta.set("mu_hat_fallback", outcome.mode.fallback);
            meta.save(&file(out, id, META_EXT))?;
        }
        Ok(())
    })
}

fn load_normalized(dir: &Path, id: &str) -> Result<(NormalizedVideo, Metadata)> {
    let meta = Metadata::load(&file(dir, id, META_EXT))?;
    let video = load_video(&file(dir, id, VIDEO_EXT))?;
    let mu_hat = meta.parse("mu_hat")?;
    Ok((NormalizedVideo::new(video, mu_hat)?, meta))
}

/// Features and annotations of every video in a normalized corpus.
pub fn load_labeled(corpus: &Path, config: &RunConfig) -> Result<Vec<LabeledVideo>> {
    list_ids(corpus, VIDEO_EXT)?
        .iter()
        .map(|id| {
            let (video, meta) = load_normalized(corpus, id)?;
            Ok(LabeledVideo {
                features: extract_features(&video, config)?,
                truth: GroundTruth::from_metadata(&meta)?,
            })
        })
        .collect()
}

fn split_refs<'a>(videos: &'a [LabeledVideo], config: &RunConfig) -> (Vec<&'a LabeledVideo>, Vec<&'a LabeledVideo>) {
    let split = corpus_split(videos.len(), config);
    (
        split.train.iter().map(|&i| &videos[i]).collect(),
        split.val.iter().map(|&i| &videos[i]).collect(),
    )
}

pub fn train_image_head_stage(corpus: &Path, out: &Path, config: &RunConfig) -> Result<TrainReport> {
    stage("train-image-head", || {
        let videos = load_labeled(corpus, config)?;
        let (train, val) = split_refs(&videos, config);
        let (head, report) = fit_image_head(&train, &val, config)?;
        head.save(out)?;
        Ok(report)
    })
}

pub fn train_fusion_stage(
    corpus: &Path,
    image_head: &Path,
    out: &Path,
    config: &RunConfig,
) -> Result<TrainReport> {
    stage("train-fusion", || {
        let head = ImageHead::load(image_head)?;
        let videos = load_labeled(corpus, config)?;
        let (train, val) = split_refs(&videos, config);
        let (model, report) = fit_fusion(&train, &val, head, config)?;
        model.save(out)?;
        Ok(report)
    })
}

/// Writes `<id>.csv` score tables for every video of a normalized corpus.
pub fn score_stage(model: &Path, corpus: &Path, out: &Path, config: &RunConfig) -> Result<()> {
    stage("score", || {
        let model = FusionModel::load(model)?;
        let ids = list_ids(corpus, VIDEO_EXT)?;
        create_dir(out)?;
        for id in &ids {
            let (video, _) = load_normalized(corpus, id)?;
            let scores = score_features(&model, &extract_features(&video, config)?)?;
            scores.save(&file(out, id, TABLE_EXT))?;
        }
        Ok(())
    })
}

/// Trains the aggregation model on the validation split of the corpus whose
/// annotations are in `truth`.
pub fn train_agg_stage(scores: &Path, truth: &Path, out: &Path, config: &RunConfig) -> Result<TrainReport> {
    stage("train-agg", || {
        let ids = list_ids(truth, META_EXT)?;
        let split = corpus_split(ids.len(), config);
        let videos = split
            .val
            .iter()
            .map(|&i| {
                let id = &ids[i];
                Ok(AuxVideo {
                    scores: ScoreSeries::load(&file(scores, id, TABLE_EXT))?,
                    tob_s: load_truth(truth, id)?.tob_s,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (model, report) = fit_aggregation(&videos, config)?;
        model.save(out)?;
        Ok(report)
    })
}

/// Runs every estimator over each score table in `scores`.
pub fn detect_stage(aux: &Path, scores: &Path, out: &Path, config: &RunConfig) -> Result<Vec<Detection>> {
    stage("detect", || {
        let model = AuxModel::load(aux)?;
        let ids = list_ids(scores, TABLE_EXT)?;
        create_dir(out)?;
        ids.iter()
            .map(|id| {
                let series = ScoreSeries::load(&file(scores, id, TABLE_EXT))?;
                let d = detect(id, &series, &model, config)?;
                d.save(out)?;
                Ok(d)
            })
            .collect()
    })
}

pub fn evaluate_stage(runs: &Path, truth: &Path, out: &Path) -> Result<Report> {
    stage("evaluate", || {
        let pairs = list_ids(runs, ESTIMATE_EXT)?
            .iter()
            .map(|id| Ok((Detection::load(runs, id)?, load_truth(truth, id)?)))
            .collect::<Result<Vec<_>>>()?;
        let report = evaluate(&pairs)?;
        report.save(out)?;
        Ok(report)
    })
}

/// Artifact locations under a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn corpus(&self, split: &str) -> PathBuf {
        self.root.join("corpus").join(split)
    }

    pub fn normalized(&self, split: &str) -> PathBuf {
        self.root.join("normalized").join(split)
    }

    pub fn scores(&self, split: &str) -> PathBuf {
        self.root.join("scores").join(split)
    }

    pub fn detections(&self) -> PathBuf {
        self.root.join("detections")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn model(&self, name: &str) -> PathBuf {
        self.models().join(name)
    }

    pub fn report(&self) -> PathBuf {
        self.root.join(REPORT_FILE)
    }
}

/// Every stage in order with file artifacts under `root`.
pub fn run_all(config: &RunConfig, root: &Path) -> Result<Report> {
    config.validate()?;
    let l = RunLayout::new(root);
    create_dir(root)?;
    let cfg_path = root.join("config.txt");
    fs::write(&cfg_path, config.render()).map_err(|e| Error::io(&cfg_path, e))?;
    let scene = config.scene();
    generate_stage(
        &l.corpus("train"),
        config.n_train,
        config.theater_share,
        &scene,
        seed::derive(config.seed, "train-corpus"),
    )?;
    generate_stage(
        &l.corpus("test"),
        config.n_test,
        config.theater_share,
        &scene,
        seed::derive(config.seed, "test-corpus"),
    )?;
    for split in ["train", "test"] {
        normalize_stage(&l.corpus(split), &l.normalized(split), config)?;
    }
    create_dir(&l.models())?;
    train_image_head_stage(&l.normalized("train"), &l.model(IMAGE_HEAD_FILE), config)?;
    train_fusion_stage(
        &l.normalized("train"),
        &l.model(IMAGE_HEAD_FILE),
        &l.model(FUSION_FILE),
        config,
    )?;
    for split in ["train", "test"] {
        score_stage(&l.model(FUSION_FILE), &l.normalized(split), &l.scores(split), config)?;
    }
    train_agg_stage(&l.scores("train"), &l.corpus("train"), &l.model(AUX_FILE), config)?;
    detect_stage(&l.model(AUX_FILE), &l.scores("test"), &l.detections(), config)?;
    evaluate_stage(&l.detections(), &l.corpus("test"), &l.report())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let s = split_indices(100, 0.15, 2, 1);
        assert_eq!((s.train.len(), s.val.len()), (85, 15));
        let s = split_indices(6, 0.15, 2, 1);
        assert_eq!(s.val.len(), 2);
        let s = split_indices(15, 0.2, 0, 1);
        assert_eq!(s.val.len(), 3);
        let s = split_indices(2, 0.2, 0, 1);
        assert_eq!(s.val.len(), 0);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1]);
    }

    #[test]
    fn missing_corpus_names_the_stage() {
        let err = normalize_stage(
            Path::new("/nonexistent/corpus"),
            Path::new("/nonexistent/out"),
            &RunConfig::default(),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("normalize"), "{msg}");
    }
}
