use std::fmt::Write as _;
use std::path::Path;

use super::features::{frame_stats, mean_static, temporal_from_stats, FrameStats, STATIC_DIM};
use super::model::FusionModel;
use crate::error::{Error, Result};
use crate::thermal_io::NormalizedVideo;
use crate::windowing::ClipSchedule;

/// Per-second stream scores of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub times: Vec<f64>,
    pub p_fusion: Vec<f64>,
    pub p_vnb: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(times: Vec<f64>, p_fusion: Vec<f64>, p_vnb: Vec<f64>) -> Result<Self> {
        if times.len() != p_fusion.len() || times.len() != p_vnb.len() {
            return Err(Error::LengthMismatch(format!(
                "{} times, {} fusion scores, {} vnb scores",
                times.len(),
                p_fusion.len(),
                p_vnb.len()
            )));
        }
        if p_fusion.iter().chain(&p_vnb).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::DegenerateData("scores must lie in [0, 1]".into()));
        }
        Ok(Self {
            times,
            p_fusion,
            p_vnb,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `T x 2` rows of `[p_fusion, p_vnb]`.
    pub fn matrix(&self) -> Vec<[f64; 2]> {
        self.p_fusion
            .iter()
            .zip(&self.p_vnb)
            .map(|(&f, &v)| [f, v])
            .collect()
    }

    pub fn with_fusion_zeroed(&self) -> Self {
        Self {
            p_fusion: vec![0.0; self.len()],
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,p_fusion,p_vnb\n");
        for i in 0..self.len() {
            let _ = writeln!(out, "{},{},{}", self.times[i], self.p_fusion[i], self.p_vnb[i]);
        }
        out
    }

    /// Reads the first three columns of a `t,p_fusion,p_vnb,...` table.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if !header.starts_with("t,p_fusion,p_vnb") {
            return Err(Error::MalformedHeader(format!("unexpected score header `{header}`")));
        }
        let (mut t, mut f, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            let num = |k: usize| -> Result<f64> {
                cols.get(k)
                    .and_then(|c| c.trim().parse().ok())
                    .ok_or_else(|| Error::Metadata(format!("bad value in score row {}", i + 2)))
            };
            t.push(num(0)?);
            f.push(num(1)?);
            v.push(num(2)?);
        }
        Self::new(t, f, v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Model-independent features of one sampled clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatures {
    pub t: f64,
    pub end_frame: usize,
    pub static_mean: Vec<f64>,
    pub temporal: Vec<f64>,
}

/// Features of a whole video, computed with one pass per frame. Clip
/// features match what [`super::fusion_forward`] computes clip by clip.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    pub id: String,
    pub frame_rate: f64,
    pub clip_len: usize,
    pub frame_static: Vec<[f64; STATIC_DIM]>,
    pub clips: Vec<ClipFeatures>,
}

impl VideoFeatures {
    pub fn extract(video: &NormalizedVideo, clip_len: usize, tau: f64) -> Result<Self> {
        let v = video.video();
        if clip_len < 2 {
            return Err(Error::ClipTooShort { frames: clip_len });
        }
        let schedule = ClipSchedule::new(v.n_frames(), v.frame_rate(), clip_len, tau)?;
        let (h, w) = (v.height(), v.width());
        let last = schedule.entries.last().map_or(0, |e| e.1);
        let stats: Vec<FrameStats> = (0..=last)
            .map(|n| frame_stats(v.frame(n), n.checked_sub(1).map(|p| v.frame(p)), h, w))
            .collect();
        let clips = schedule
            .entries
            .iter()
            .map(|&(t, n)| {
                let window = &stats[n + 1 - clip_len..=n];
                Ok(ClipFeatures {
                    t,
                    end_frame: n,
                    static_mean: mean_static(window),
                    temporal: temporal_from_stats(window)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            id: v.id.clone(),
            frame_rate: v.frame_rate(),
            clip_len,
            frame_static: stats.iter().map(|s| s.static_features).collect(),
            clips,
        })
    }

    pub fn times(&self) -> Vec<f64> {
        self.clips.iter().map(|c| c.t).collect()
    }

    /// Capture time of frame `n` in seconds.
    pub fn frame_time(&self, n: usize) -> f64 {
        n as f64 / self.frame_rate
    }
}

pub fn score_features(model: &FusionModel, features: &VideoFeatures) -> Result<ScoreSeries> {
    let probs: Vec<f64> = features
        .frame_static
        .iter()
        .map(|f| model.image_head.prob(f))
        .collect();
    let f = features.clip_len;
    let mut p_fusion = Vec::with_capacity(features.clips.len());
    let mut p_vnb = Vec::with_capacity(features.clips.len());
    for clip in &features.clips {
        p_fusion.push(model.p_fusion(&clip.static_mean, &clip.temporal)?);
        let n = clip.end_frame;
        p_vnb.push(probs[n + 1 - f..=n].iter().sum::<f64>() / f as f64);
    }
    ScoreSeries::new(features.times(), p_fusion, p_vnb)
}

pub fn score_video(
    model: &FusionModel,
    video: &NormalizedVideo,
    clip_len: usize,
    tau: f64,
) -> Result<ScoreSeries> {
    score_features(model, &VideoFeatures::extract(video, clip_len, tau)?)
}
