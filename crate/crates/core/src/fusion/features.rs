//! Handcrafted stand-ins for the image and video backbones.
//!
//! Static features (per normalized frame, 16 values):
//!
//! | index | feature |
//! |-------|---------|
//! | 0, 1  | global mean, variance |
//! | 2..10 | 8-bin intensity histogram over `[0, 1]`, as fractions |
//! | 10    | hot fraction (pixels above [`HOT_THRESHOLD`]) |
//! | 11, 12| hot-mask centroid (row, col) in pixels; frame center when empty |
//! | 13    | hot-mask bounding-box area fraction |
//! | 14, 15| hot-mask row / column variance in pixels² |
//!
//! Temporal features (per clip, 9 values): mean absolute frame difference,
//! maximum mean squared frame difference, hot-fraction change from first to
//! last frame, hot-centroid displacement between first and last frame (0 when
//! either has no hot pixels), temporal variance of the four quadrant means,
//! and the least-squares slope of the global mean per frame.

use crate::error::{Error, Result};
use crate::windowing::Clip;

pub const STATIC_DIM: usize = 16;
pub const TEMPORAL_DIM: usize = 9;
pub const HOT_THRESHOLD: f32 = 0.8;
pub const HIST_BINS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractorKind {
    HandcraftedV1,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureExtractorSpec {
    pub static_dim: usize,
    pub temporal_dim: usize,
    pub kind: ExtractorKind,
}

impl FeatureExtractorSpec {
    pub const HANDCRAFTED_V1: Self = Self {
        static_dim: STATIC_DIM,
        temporal_dim: TEMPORAL_DIM,
        kind: ExtractorKind::HandcraftedV1,
    };
}

/// Everything a single pass over one frame yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub static_features: [f64; STATIC_DIM],
    pub quadrant_means: [f64; 4],
    pub hot_centroid: Option<(f64, f64)>,
    /// Mean `|I_n - I_{n-1}|`, 0 without a previous frame.
    pub diff_abs: f64,
    /// Mean `(I_n - I_{n-1})²`, 0 without a previous frame.
    pub diff_sq: f64,
}

impl FrameStats {
    pub fn mean(&self) -> f64 {
        self.static_features[0]
    }

    pub fn hot_fraction(&self) -> f64 {
        self.static_features[10]
    }
}

pub fn frame_stats(frame: &[f32], prev: Option<&[f32]>, height: usize, width: usize) -> FrameStats {
    debug_assert_eq!(frame.len(), height * width);
    let n = frame.len() as f64;
    let (h2, w2) = (height / 2, width / 2);
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut hist = [0usize; HIST_BINS];
    let mut quad = [0.0f64; 4];
    let mut quad_n = [0usize; 4];
    let mut hot = 0usize;
    let (mut sr, mut sc, mut srr, mut scc) = (0.0, 0.0, 0.0, 0.0);
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (usize::MAX, 0, usize::MAX, 0);

    for r in 0..height {
        let row = &frame[r * width..(r + 1) * width];
        for (c, &v) in row.iter().enumerate() {
            let x = f64::from(v);
            sum += x;
            sq += x * x;
            let bin = ((x * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
            hist[bin] += 1;
            let q = usize::from(r >= h2) * 2 + usize::from(c >= w2);
            quad[q] += x;
            quad_n[q] += 1;
            if v > HOT_THRESHOLD {
                hot += 1;
                let (rf, cf) = (r as f64, c as f64);
                sr += rf;
                sc += cf;
                srr += rf * rf;
                scc += cf * cf;
                rmin = rmin.min(r);
                rmax = rmax.max(r);
                cmin = cmin.min(c);
                cmax = cmax.max(c);
            }
        }
    }

    let mean = sum / n;
    let mut f = [0.0; STATIC_DIM];
    f[0] = mean;
    f[1] = (sq / n - mean * mean).max(0.0);
    for (b, &count) in hist.iter().enumerate() {
        f[2 + b] = count as f64 / n;
    }
    f[10] = hot as f64 / n;
    let hot_centroid = if hot > 0 {
        let k = hot as f64;
        let (cr, cc) = (sr / k, sc / k);
        f[11] = cr;
        f[12] = cc;
        f[13] = ((rmax - rmin + 1) * (cmax - cmin + 1)) as f64 / n;
        f[14] = (srr / k - cr * cr).max(0.0);
        f[15] = (scc / k - cc * cc).max(0.0);
        Some((cr, cc))
    } else {
        f[11] = (height as f64 - 1.0) / 2.0;
        f[12] = (width as f64 - 1.0) / 2.0;
        None
    };

    let mut quadrant_means = [0.0; 4];
    for q in 0..4 {
        if quad_n[q] > 0 {
            quadrant_means[q] = quad[q] / quad_n[q] as f64;
        }
    }

    let (diff_abs, diff_sq) = match prev {
        Some(p) => {
            let (mut a, mut s) = (0.0, 0.0);
            for (&x, &y) in frame.iter().zip(p) {
                let d = f64::from(x) - f64::from(y);
                a += d.abs();
                s += d * d;
            }
            (a / n, s / n)
        }
        None => (0.0, 0.0),
    };

    FrameStats {
        static_features: f,
        quadrant_means,
        hot_centroid,
        diff_abs,
        diff_sq,
    }
}

pub fn extract_static_features(frame: &[f32], height: usize, width: usize) -> Vec<f64> {
    frame_stats(frame, None, height, width).static_features.to_vec()
}

/// Per-frame stats of a clip; each frame's difference is taken against the
/// previous frame of the clip.
pub fn clip_frame_stats(clip: &Clip<'_>) -> Vec<FrameStats> {
    let mut prev: Option<&[f32]> = None;
    clip.frames()
        .map(|frame| {
            let s = frame_stats(frame, prev, clip.height(), clip.width());
            prev = Some(frame);
            s
        })
        .collect()
}

/// Mean static feature vector over a run of frames.
pub fn mean_static(stats: &[FrameStats]) -> Vec<f64> {
    let mut acc = [0.0; STATIC_DIM];
    for s in stats {
        for (a, v) in acc.iter_mut().zip(&s.static_features) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / stats.len() as f64).collect()
}

/// Temporal features from the stats of a clip's frames, oldest first. The
/// difference fields of the first frame are ignored.
pub fn temporal_from_stats(stats: &[FrameStats]) -> Result<Vec<f64>> {
    let len = stats.len();
    if len < 2 {
        return Err(Error::ClipTooShort { frames: len });
    }
    let pairs = &stats[1..];
    let mean_abs = pairs.iter().map(|s| s.diff_abs).sum::<f64>() / pairs.len() as f64;
    let max_energy = pairs.iter().map(|s| s.diff_sq).fold(0.0, f64::max);
    let (first, last) = (&stats[0], &stats[len - 1]);
    let hot_delta = last.hot_fraction() - first.hot_fraction();
    let displacement = match (first.hot_centroid, last.hot_centroid) {
        (Some(a), Some(b)) => ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt(),
        _ => 0.0,
    };

    let lf = len as f64;
    let mut out = vec![mean_abs, max_energy, hot_delta, displacement];
    for q in 0..4 {
        let m = stats.iter().map(|s| s.quadrant_means[q]).sum::<f64>() / lf;
        let v = stats
            .iter()
            .map(|s| (s.quadrant_means[q] - m).powi(2))
            .sum::<f64>()
            / lf;
        out.push(v);
    }

    let k_mean = (lf - 1.0) / 2.0;
    let y_mean = stats.iter().map(FrameStats::mean).sum::<f64>() / lf;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, s) in stats.iter().enumerate() {
        let dk = k as f64 - k_mean;
        num += dk * (s.mean() - y_mean);
        den += dk * dk;
    }
    out.push(num / den);
    Ok(out)
}

pub fn extract_temporal_features(clip: &Clip<'_>) -> Result<Vec<f64>> {
    if clip.len() < 2 {
        return Err(Error::ClipTooShort { frames: clip.len() });
    }
    temporal_from_stats(&clip_frame_stats(clip))
}
