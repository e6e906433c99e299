//! Skin-anchored intensity normalization.
//!
//! A 1-D Gaussian mixture is fitted by EM to a subsample of the raw video
//! intensities. The largest component mean inside a configured skin band is
//! taken as the video's skin temperature `mu_hat`, and every intensity is
//! clipped to `[mu_hat - delta_lo, mu_hat + delta_hi]` and rescaled to `[0, 1]`.
//! Because the range follows `mu_hat`, a constant offset on the raw video
//! leaves the normalized video unchanged.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::thermal_io::{NormalizedVideo, ThermalVideo};

const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_likelihood: f64,
    /// Log-likelihood after every EM iteration.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations_used: usize,
}

impl GmmFit {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    /// Means in ascending order.
    pub fn sorted_means(&self) -> Vec<f64> {
        let mut m = self.means.clone();
        m.sort_by(f64::total_cmp);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub skin_band_lo: f64,
    pub skin_band_hi: f64,
}

impl NormalizationParams {
    /// Skin band `[0.5, 0.9] * sensor_max`, deltas 15% of the band width.
    pub fn for_sensor_max(sensor_max: f64) -> Self {
        Self::from_band(0.5 * sensor_max, 0.9 * sensor_max)
    }

    pub fn from_band(lo: f64, hi: f64) -> Self {
        let delta = 0.15 * (hi - lo);
        Self {
            delta_lo: delta,
            delta_hi: delta,
            skin_band_lo: lo,
            skin_band_hi: hi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_lo > 0.0) {
            return Err(Error::config("delta_lo", "must be positive"));
        }
        if !(self.delta_hi > 0.0) {
            return Err(Error::config("delta_hi", "must be positive"));
        }
        if !(self.skin_band_lo < self.skin_band_hi) {
            return Err(Error::config("skin_band_lo", "must be below skin_band_hi"));
        }
        Ok(())
    }
}

impl Default for NormalizationParams {
    fn default() -> Self {
        Self::for_sensor_max(1024.0)
    }
}

/// Result of skin-mode selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkinMode {
    pub mu_hat: f64,
    pub component: usize,
    /// No component mean fell inside the skin band; the largest mean was used.
    pub fallback: bool,
}

/// Type-7 quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var)
}

/// Fits a `k`-component 1-D Gaussian mixture by EM.
///
/// Means start at the `i/(k+1)` sample quantiles, variances at the sample
/// variance, weights uniform. Iteration stops once the relative log-likelihood
/// gain drops below `tol`, or after `max_iter` iterations. The seed only
/// breaks ties between coinciding initial means.
pub fn fit_gmm(samples: &[f64], k: usize, tol: f64, max_iter: usize, seed: u64) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    let n = samples.len();
    if n < 10 * k {
        return Err(Error::DegenerateFit(format!(
            "{n} samples is too few for {k} components"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite sample".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var < VARIANCE_FLOOR {
        return Err(Error::DegenerateFit("all samples are equal".into()));
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut means: Vec<f64> = (1..=k)
        .map(|i| quantile_sorted(&sorted, i as f64 / (k + 1) as f64))
        .collect();
    let mut rng = seed::rng(seed);
    for i in 1..k {
        if means[i] <= means[i - 1] {
            means[i] = means[i - 1] + var.sqrt() * rng.gen_range(1e-3..1e-2);
        }
    }
    let mut variances = vec![var; k];
    let mut weights = vec![1.0 / k as f64; k];

    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut log_terms = vec![0.0; k];
    for _ in 0..max_iter {
        // E step
        let mut ll = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            for j in 0..k {
                log_terms[j] = weights[j].ln() + log_normal_pdf(x, means[j], variances[j]);
            }
            let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = log_terms.iter().map(|t| (t - max).exp()).sum();
            let lse = max + sum.ln();
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (log_terms[j] - lse).exp();
            }
        }
        if trace.is_empty() {
            prev_ll = ll;
        }

        // M step
        for j in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nk < 1e-10 * n as f64 {
                return Err(Error::DegenerateFit(format!(
                    "component {j} lost all support"
                )));
            }
            let mu = (0..n).map(|i| resp[i * k + j] * samples[i]).sum::<f64>() / nk;
            let v = (0..n)
                .map(|i| resp[i * k + j] * (samples[i] - mu).powi(2))
                .sum::<f64>()
                / nk;
            if !(v >= VARIANCE_FLOOR) {
                return Err(Error::DegenerateFit(format!(
                    "variance of component {j} collapsed to {v:e}"
                )));
            }
            means[j] = mu;
            variances[j] = v;
            weights[j] = nk / n as f64;
        }

        let ll = mixture_log_likelihood(samples, &means, &variances, &weights);
        trace.push(ll);
        let gain = (ll - prev_ll) / prev_ll.abs().max(f64::MIN_POSITIVE);
        prev_ll = ll;
        if gain < tol {
            break;
        }
    }

    Ok(GmmFit {
        means,
        variances,
        weights,
        log_likelihood: prev_ll,
        iterations_used: trace.len(),
        log_likelihood_trace: trace,
    })
}

pub fn mixture_log_likelihood(samples: &[f64], means: &[f64], variances: &[f64], weights: &[f64]) -> f64 {
    let k = means.len();
    let mut terms = vec![0.0; k];
    samples
        .iter()
        .map(|&x| {
            for j in 0..k {
                terms[j] = weights[j].ln() + log_normal_pdf(x, means[j], variances[j]);
            }
            let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
        })
        .sum()
}

/// Picks the largest component mean inside the skin band, falling back to the
/// largest mean overall.
pub fn select_skin_mode(fit: &GmmFit, params: &NormalizationParams) -> SkinMode {
    let largest = |pred: &dyn Fn(f64) -> bool| {
        fit.means
            .iter()
            .enumerate()
            .filter(|(_, &m)| pred(m))
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &m)| (i, m))
    };
    match largest(&|m| m >= params.skin_band_lo && m <= params.skin_band_hi) {
        Some((component, mu_hat)) => SkinMode {
            mu_hat,
            component,
            fallback: false,
        },
        None => {
            let (component, mu_hat) = largest(&|_| true).expect("a fit has components");
            SkinMode {
                mu_hat,
                component,
                fallback: true,
            }
        }
    }
}

/// The clip-and-rescale map for a single intensity.
pub fn normalize_value(x: f64, mu_hat: f64, params: &NormalizationParams) -> f64 {
    let lo = mu_hat - params.delta_lo;
    let hi = mu_hat + params.delta_hi;
    // rounding in `hi - lo` can overshoot 1 by an ulp
    ((x.clamp(lo, hi) - lo) / (params.delta_lo + params.delta_hi)).min(1.0)
}

pub fn normalize_video(
    video: &ThermalVideo,
    mu_hat: f64,
    params: &NormalizationParams,
) -> Result<NormalizedVideo> {
    if !mu_hat.is_finite() {
        return Err(Error::config("mu_hat", "must be finite"));
    }
    let data = video
        .data()
        .iter()
        .map(|&x| normalize_value(f64::from(x), mu_hat, params) as f32)
        .collect();
    let out = ThermalVideo::new(
        video.id.clone(),
        video.frame_rate(),
        video.height(),
        video.width(),
        data,
    )?;
    NormalizedVideo::new(out, mu_hat)
}

/// Every `stride_frames`-th frame, every `stride_pixels`-th row and column.
pub fn sample_intensities(video: &ThermalVideo, stride_frames: usize, stride_pixels: usize) -> Vec<f64> {
    let sf = stride_frames.max(1);
    let sp = stride_pixels.max(1);
    let w = video.width();
    let mut out = Vec::new();
    for n in (0..video.n_frames()).step_by(sf) {
        let frame = video.frame(n);
        for r in (0..video.height()).step_by(sp) {
            out.extend(frame[r * w..(r + 1) * w].iter().step_by(sp).map(|&v| f64::from(v)));
        }
    }
    out
}

/// Sampling, mixture fit, mode selection and rescaling in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub stride_frames: usize,
    pub stride_pixels: usize,
    pub params: NormalizationParams,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self {
            k: 3,
            tol: 1e-6,
            max_iter: 200,
            stride_frames: 8,
            stride_pixels: 4,
            params: NormalizationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationOutcome {
    pub video: NormalizedVideo,
    pub fit: GmmFit,
    pub mode: SkinMode,
}

impl Normalizer {
    pub fn run(&self, video: &ThermalVideo, seed: u64) -> Result<NormalizationOutcome> {
        self.params.validate()?;
        let samples = sample_intensities(video, self.stride_frames, self.stride_pixels);
        let fit = fit_gmm(&samples, self.k, self.tol, self.max_iter, seed)?;
        let mode = select_skin_mode(&fit, &self.params);
        let video = normalize_video(video, mode.mu_hat, &self.params)?;
        Ok(NormalizationOutcome { video, fit, mode })
    }
}
