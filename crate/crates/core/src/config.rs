//! Flat `key = value` run configuration.
//!
//! Unknown keys are rejected. Later assignments win, so command-line
//! overrides are applied after the file.

use std::fmt::Write as _;
use std::path::Path;

use crate::aggregation::{AuxTrainConfig, LossWeights};
use crate::error::{Error, Result};
use crate::fusion::{fusion_config, image_head_config};
use crate::nn::TrainConfig;
use crate::normalize::{NormalizationParams, Normalizer};
use crate::seed;
use crate::synthgen::SceneConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,

    pub n_train: usize,
    pub n_test: usize,
    /// Share of operating-theater episodes in both corpora.
    pub theater_share: f64,
    /// Share of training videos held out for validation and aggregation.
    pub val_fraction: f64,
    /// Share of aggregation videos held out for its early stopping.
    pub agg_val_fraction: f64,

    pub duration_s: f64,
    pub frame_rate: f64,
    pub height: usize,
    pub width: usize,
    pub noise_sigma: f64,
    pub occlusion_rate: f64,
    pub emergence_ramp_s: f64,
    pub sensor_max: f64,

    pub gmm_k: usize,
    pub gmm_tol: f64,
    pub gmm_max_iter: usize,
    pub skin_band_lo: f64,
    pub skin_band_hi: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,

    pub clip_len: usize,
    pub tau: f64,
    pub frame_stride: usize,

    pub window: usize,
    pub stride: usize,
    pub gamma: f64,
    pub theta: f64,
    pub taps: usize,
    pub alpha_evt: f64,
    pub alpha_tr: f64,
    pub alpha_joint: f64,
    pub fusion_dropout: f64,

    pub lr_decay: f64,
    pub patience: usize,
    pub image_head_lr: f64,
    pub image_head_epochs: usize,
    pub image_head_batch: usize,
    pub fusion_lr: f64,
    pub fusion_epochs: usize,
    pub fusion_batch: usize,
    pub aux_lr: f64,
    pub aux_epochs: usize,
    pub aux_batch: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scene = SceneConfig::default();
        let band = NormalizationParams::default();
        let ih = image_head_config(0);
        let fu = fusion_config(0);
        let aux = AuxTrainConfig::new(0);
        Self {
            seed: 7,
            n_train: 100,
            n_test: 35,
            theater_share: 10.0 / 35.0,
            val_fraction: 0.15,
            agg_val_fraction: 0.2,
            duration_s: scene.duration_s,
            frame_rate: scene.frame_rate,
            height: 63,
            width: 84,
            noise_sigma: scene.noise_sigma,
            occlusion_rate: scene.occlusion_rate,
            emergence_ramp_s: scene.newborn_emergence_ramp_s,
            sensor_max: scene.sensor_max,
            gmm_k: 3,
            gmm_tol: 1e-6,
            gmm_max_iter: 200,
            skin_band_lo: band.skin_band_lo,
            skin_band_hi: band.skin_band_hi,
            delta_lo: band.delta_lo,
            delta_hi: band.delta_hi,
            clip_len: 25,
            tau: 1.0,
            frame_stride: 2,
            window: aux.window,
            stride: aux.stride,
            gamma: crate::aggregation::DEFAULT_GAMMA,
            theta: crate::aggregation::DEFAULT_THETA,
            taps: crate::aggregation::DEFAULT_TAPS,
            alpha_evt: aux.weights.evt,
            alpha_tr: aux.weights.tr,
            alpha_joint: aux.weights.joint,
            fusion_dropout: aux.fusion_dropout,
            lr_decay: ih.adam.decay,
            patience: ih.patience,
            image_head_lr: ih.adam.learning_rate,
            image_head_epochs: ih.max_epochs,
            image_head_batch: ih.batch_size,
            fusion_lr: fu.adam.learning_rate,
            fusion_epochs: fu.max_epochs,
            fusion_batch: fu.batch_size,
            aux_lr: aux.train.adam.learning_rate,
            aux_epochs: aux.train.max_epochs,
            aux_batch: aux.train.batch_size,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{}`", value.trim())))
}

macro_rules! config_keys {
    ($($field:ident),* $(,)?) => {
        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key.trim() {
                    $(stringify!($field) => self.$field = parse(stringify!($field), value)?,)*
                    other => {
                        return Err(Error::Config {
                            field: "key",
                            reason: format!("unknown configuration key `{other}`"),
                        })
                    }
                }
                Ok(())
            }

            /// Every key in declaration order, one `key = value` per line.
            pub fn render(&self) -> String {
                let mut out = String::new();
                $(let _ = writeln!(out, "{} = {}", stringify!($field), self.$field);)*
                out
            }
        }
    };
}

config_keys!(
    seed, n_train, n_test, theater_share, val_fraction, agg_val_fraction, duration_s, frame_rate,
    height, width, noise_sigma, occlusion_rate, emergence_ramp_s, sensor_max, gmm_k, gmm_tol,
    gmm_max_iter, skin_band_lo, skin_band_hi, delta_lo, delta_hi, clip_len, tau, frame_stride,
    window, stride, gamma, theta, taps, alpha_evt, alpha_tr, alpha_joint, fusion_dropout,
    lr_decay, patience, image_head_lr, image_head_epochs, image_head_batch, fusion_lr,
    fusion_epochs, fusion_batch, aux_lr, aux_epochs, aux_batch,
);

impl RunConfig {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                field: "line",
                reason: format!("line {} is not `key = value`: `{line}`", i + 1),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::default();
        c.apply_text(&text)?;
        c.validate()?;
        Ok(c)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config {
                field: "override",
                reason: format!("`{o}` is not `key=value`"),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration_s", self.duration_s),
            ("frame_rate", self.frame_rate),
            ("tau", self.tau),
            ("gmm_tol", self.gmm_tol),
            ("image_head_lr", self.image_head_lr),
            ("fusion_lr", self.fusion_lr),
            ("aux_lr", self.aux_lr),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(k, "must be positive"));
            }
        }
        let unit = [
            ("theater_share", self.theater_share),
            ("val_fraction", self.val_fraction),
            ("agg_val_fraction", self.agg_val_fraction),
            ("fusion_dropout", self.fusion_dropout),
        ];
        for (k, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(k, "must lie in [0, 1]"));
            }
        }
        let counts = [
            ("n_train", self.n_train),
            ("n_test", self.n_test),
            ("gmm_k", self.gmm_k),
            ("window", self.window),
            ("stride", self.stride),
            ("frame_stride", self.frame_stride),
            ("image_head_batch", self.image_head_batch),
            ("fusion_batch", self.fusion_batch),
            ("aux_batch", self.aux_batch),
        ];
        for (k, v) in counts {
            if v == 0 {
                return Err(Error::config(k, "must be at least 1"));
            }
        }
        if self.n_train < 3 {
            return Err(Error::config("n_train", "needs at least 3 videos"));
        }
        if self.stride > self.window {
            return Err(Error::config("stride", "must not exceed window"));
        }
        if self.clip_len < 2 {
            return Err(Error::config("clip_len", "must be at least 2"));
        }
        if self.taps.is_multiple_of(2) {
            return Err(Error::config("taps", "must be odd"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::config("theta", "must lie in (0, 1)"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::config("lr_decay", "must lie in (0, 1]"));
        }
        self.weights().validate()?;
        self.normalizer().params.validate()?;
        self.scene().validate()
    }

    pub fn scene(&self) -> SceneConfig {
        SceneConfig {
            duration_s: self.duration_s,
            frame_rate: self.frame_rate,
            height: self.height,
            width: self.width,
            noise_sigma: self.noise_sigma,
            occlusion_rate: self.occlusion_rate,
            newborn_emergence_ramp_s: self.emergence_ramp_s,
            sensor_max: self.sensor_max,
            ..SceneConfig::default()
        }
    }

    pub fn normalizer(&self) -> Normalizer {
        Normalizer {
            k: self.gmm_k,
            tol: self.gmm_tol,
            max_iter: self.gmm_max_iter,
            params: NormalizationParams {
                delta_lo: self.delta_lo,
                delta_hi: self.delta_hi,
                skin_band_lo: self.skin_band_lo,
                skin_band_hi: self.skin_band_hi,
            },
            ..Normalizer::default()
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            evt: self.alpha_evt,
            tr: self.alpha_tr,
            joint: self.alpha_joint,
        }
    }

    fn train_config(&self, lr: f64, epochs: usize, batch: usize, stage: &str) -> TrainConfig {
        let mut c = image_head_config(seed::derive(self.seed, stage));
        c.adam.learning_rate = lr;
        c.adam.decay = self.lr_decay;
        c.max_epochs = epochs;
        c.batch_size = batch;
        c.patience = self.patience;
        c
    }

    pub fn image_head_train(&self) -> TrainConfig {
        self.train_config(self.image_head_lr, self.image_head_epochs, self.image_head_batch, "train-image-head")
    }

    pub fn fusion_train(&self) -> TrainConfig {
        self.train_config(self.fusion_lr, self.fusion_epochs, self.fusion_batch, "train-fusion")
    }

    pub fn aux_train(&self) -> AuxTrainConfig {
        AuxTrainConfig {
            train: self.train_config(self.aux_lr, self.aux_epochs, self.aux_batch, "train-agg"),
            window: self.window,
            stride: self.stride,
            weights: self.weights(),
            fusion_dropout: self.fusion_dropout,
        }
    }
}
