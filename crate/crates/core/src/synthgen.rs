//! Synthetic thermal birth episodes with known ground truth.
//!
//! A scene is a background plane with a vertical temperature gradient and a
//! slow global drift, overlaid with warm blobs: the mother's body (static),
//! clinicians (moving), optional hot clutter, the newborn (appearing at the
//! birth time and growing to full size over the emergence ramp) and transient
//! occluders that hide the newborn. Blobs have a flat core and a Gaussian
//! edge, and are composited by pulling each pixel toward the blob temperature.
//! Sensor noise is i.i.d. Gaussian and values are clamped to the sensor range.
//!
//! The blob model is an assumption; it is meant to make the detection task
//! nontrivial, not to be a faithful thermal simulation.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;
use crate::thermal_io::{GroundTruth, ThermalVideo};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneStyle {
    DeliveryRoom,
    OperatingTheater,
}

impl SceneStyle {
    pub fn name(self) -> &'static str {
        match self {
            SceneStyle::DeliveryRoom => "delivery_room",
            SceneStyle::OperatingTheater => "operating_theater",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "delivery_room" => Some(SceneStyle::DeliveryRoom),
            "operating_theater" => Some(SceneStyle::OperatingTheater),
            _ => None,
        }
    }

    fn clinician_count(self) -> usize {
        match self {
            SceneStyle::DeliveryRoom => 2,
            SceneStyle::OperatingTheater => 4,
        }
    }

    fn hot_clutter_count(self) -> usize {
        match self {
            SceneStyle::DeliveryRoom => 0,
            SceneStyle::OperatingTheater => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub duration_s: f64,
    pub frame_rate: f64,
    pub height: usize,
    pub width: usize,
    /// Birth time. `None` draws it uniformly from the middle 60% of the episode.
    pub tob_s: Option<f64>,
    pub background_temp_mean: f64,
    /// Mother's body and other ambient-warm surfaces.
    pub body_temp_mean: f64,
    /// Newborn skin.
    pub skin_temp_mean: f64,
    pub noise_sigma: f64,
    pub scene_style: SceneStyle,
    pub newborn_emergence_ramp_s: f64,
    /// Probability per second that an occluder starts.
    pub occlusion_rate: f64,
    pub sensor_max: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            duration_s: 120.0,
            frame_rate: 8.33,
            height: 252,
            width: 336,
            tob_s: None,
            background_temp_mean: 300.0,
            body_temp_mean: 650.0,
            skin_temp_mean: 760.0,
            noise_sigma: 8.0,
            scene_style: SceneStyle::DeliveryRoom,
            newborn_emergence_ramp_s: 3.0,
            occlusion_rate: 0.02,
            sensor_max: 1024.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        positive("duration_s", self.duration_s)?;
        positive("frame_rate", self.frame_rate)?;
        positive("noise_sigma", self.noise_sigma)?;
        positive("newborn_emergence_ramp_s", self.newborn_emergence_ramp_s)?;
        positive("sensor_max", self.sensor_max)?;
        if self.height < 8 || self.width < 8 {
            return Err(Error::config("height", "frames must be at least 8x8"));
        }
        if self.n_frames() == 0 {
            return Err(Error::config("duration_s", "episode holds no frames"));
        }
        if let Some(tob) = self.tob_s {
            if !(tob > 0.0 && tob < self.duration_s) {
                return Err(Error::config(
                    "tob_s",
                    format!("must lie in (0, {}), got {tob}", self.duration_s),
                ));
            }
        }
        if !(self.skin_temp_mean > self.background_temp_mean) {
            return Err(Error::config(
                "skin_temp_mean",
                "must exceed background_temp_mean",
            ));
        }
        if !(0.0..=1.0).contains(&self.occlusion_rate) {
            return Err(Error::config("occlusion_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.frame_rate).floor() as usize
    }
}

/// A warm blob with a flat core and Gaussian falloff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub row: f64,
    pub col: f64,
    pub core: f64,
    pub edge: f64,
    pub temp: f64,
}

impl Blob {
    fn composite(&self, frame: &mut [f64], height: usize, width: usize) {
        if self.core <= 0.0 && self.edge <= 0.0 {
            return;
        }
        let reach = self.core + 4.0 * self.edge;
        let r0 = (self.row - reach).floor().max(0.0) as usize;
        let r1 = ((self.row + reach).ceil() as isize).min(height as isize - 1);
        let c0 = (self.col - reach).floor().max(0.0) as usize;
        let c1 = ((self.col + reach).ceil() as isize).min(width as isize - 1);
        if r1 < 0 || c1 < 0 {
            return;
        }
        let two_e2 = 2.0 * self.edge * self.edge;
        for r in r0..=r1 as usize {
            let dr = r as f64 - self.row;
            for c in c0..=c1 as usize {
                let dc = c as f64 - self.col;
                let d = (dr * dr + dc * dc).sqrt();
                let p = if d <= self.core {
                    1.0
                } else if two_e2 > 0.0 {
                    (-(d - self.core).powi(2) / two_e2).exp()
                } else {
                    0.0
                };
                let px = &mut frame[r * width + c];
                *px += p * (self.temp - *px);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Mover {
    blob: Blob,
    amp: (f64, f64),
    omega: (f64, f64),
    phase: (f64, f64),
}

impl Mover {
    fn at(&self, t: f64) -> Blob {
        Blob {
            row: self.blob.row + self.amp.0 * (self.omega.0 * t + self.phase.0).sin(),
            col: self.blob.col + self.amp.1 * (self.omega.1 * t + self.phase.1).sin(),
            ..self.blob
        }
    }
}

/// Everything random about an episode except the per-pixel noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub tob_s: f64,
    /// Newborn at full size.
    pub newborn: Blob,
    /// Occlusion intervals `[start, end)` in whole seconds.
    pub occlusions: Vec<(u32, u32)>,
    mother: Blob,
    clutter: Vec<Blob>,
    clinicians: Vec<Mover>,
    gradient: f64,
    drift_amp: f64,
    drift_phase: f64,
}

impl Scene {
    pub fn occluded_at(&self, t: f64) -> bool {
        self.occlusions
            .iter()
            .any(|&(a, b)| t >= f64::from(a) && t < f64::from(b))
    }

    fn newborn_at(&self, t: f64, ramp: f64) -> Option<Blob> {
        if t < self.tob_s {
            return None;
        }
        let grow = ((t - self.tob_s) / ramp).min(1.0);
        Some(Blob {
            core: self.newborn.core * grow,
            edge: self.newborn.edge * grow,
            ..self.newborn
        })
    }
}

/// Draws the scene layout for `(config, seed)`; [`generate_video`] renders it.
pub fn plan_scene(config: &SceneConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let mut rng = seed::rng(seed::derive(seed, "scene"));
    let (h, w) = (config.height as f64, config.width as f64);
    let size = h.min(w);
    let dur = config.duration_s;

    let tob_s = match config.tob_s {
        Some(t) => t,
        None => rng.gen_range(0.2 * dur..0.8 * dur),
    };

    let mother = Blob {
        row: h * rng.gen_range(0.22..0.28),
        col: w * rng.gen_range(0.42..0.58),
        core: size * 0.14,
        edge: size * 0.05,
        temp: config.body_temp_mean,
    };
    let newborn = Blob {
        row: h * rng.gen_range(0.70..0.76),
        col: w * rng.gen_range(0.44..0.56),
        core: size * 0.09,
        edge: size * 0.03,
        temp: config.skin_temp_mean,
    };

    let clinicians = (0..config.scene_style.clinician_count())
        .map(|i| {
            // clinicians work from the sides and never reach the newborn's spot
            let side = if i % 2 == 0 { 0.1 } else { 0.9 };
            Mover {
                blob: Blob {
                    row: h * rng.gen_range(0.3..0.8),
                    col: w * (side + rng.gen_range(-0.04..0.04)),
                    core: size * rng.gen_range(0.05..0.08),
                    edge: size * 0.03,
                    temp: config.body_temp_mean - rng.gen_range(30.0..90.0),
                },
                amp: (size * rng.gen_range(0.05..0.15), size * rng.gen_range(0.02..0.06)),
                omega: (rng.gen_range(0.05..0.4), rng.gen_range(0.05..0.4)),
                phase: (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)),
            }
        })
        .collect();

    let clutter = (0..config.scene_style.hot_clutter_count())
        .map(|_| Blob {
            row: h * rng.gen_range(0.05..0.2),
            col: w * if rng.gen_bool(0.5) { 0.08 } else { 0.92 },
            core: size * 0.04,
            edge: size * 0.015,
            temp: config.skin_temp_mean + rng.gen_range(-20.0..20.0),
        })
        .collect();

    let mut occlusions = Vec::new();
    let seconds = dur.floor() as u32;
    let mut s = 0;
    while s < seconds {
        if rng.gen_bool(config.occlusion_rate) {
            let len = rng.gen_range(1..=3);
            occlusions.push((s, (s + len).min(seconds)));
            s += len;
        } else {
            s += 1;
        }
    }

    Ok(Scene {
        tob_s,
        newborn,
        occlusions,
        mother,
        clutter,
        clinicians,
        gradient: rng.gen_range(20.0..50.0),
        drift_amp: rng.gen_range(2.0..8.0),
        drift_phase: rng.gen_range(0.0..TAU),
    })
}

pub fn ground_truth(config: &SceneConfig, scene: &Scene) -> GroundTruth {
    let seconds = config.duration_s.floor() as usize;
    let visible_from = scene.tob_s + config.newborn_emergence_ramp_s;
    let vnb_mask = (0..seconds)
        .map(|s| {
            let t = s as f64;
            t >= visible_from && !scene.occluded_at(t)
        })
        .collect();
    GroundTruth {
        tob_s: scene.tob_s,
        vnb_mask,
    }
}

/// Renders one episode. A pure function of `(config, seed)`.
pub fn generate_video(
    id: impl Into<String>,
    config: &SceneConfig,
    seed: u64,
) -> Result<(ThermalVideo, GroundTruth)> {
    let scene = plan_scene(config, seed)?;
    let (h, w) = (config.height, config.width);
    let n_frames = config.n_frames();
    let size = (h.min(w)) as f64;

    let mut base = vec![0.0f64; h * w];
    for r in 0..h {
        let v = config.background_temp_mean + scene.gradient * (r as f64 / h as f64 - 0.5);
        base[r * w..(r + 1) * w].fill(v);
    }
    scene.mother.composite(&mut base, h, w);
    for blob in &scene.clutter {
        blob.composite(&mut base, h, w);
    }

    let noise = Normal::new(0.0, config.noise_sigma)
        .map_err(|_| Error::config("noise_sigma", "invalid standard deviation"))?;
    let mut rng = seed::rng(seed::derive(seed, "noise"));
    let mut frame = vec![0.0f64; h * w];
    let mut data = Vec::with_capacity(n_frames * h * w);
    for n in 0..n_frames {
        let t = n as f64 / config.frame_rate;
        let drift = scene.drift_amp * (TAU * t / 90.0 + scene.drift_phase).sin();
        for (dst, &b) in frame.iter_mut().zip(&base) {
            *dst = b + drift;
        }
        for c in &scene.clinicians {
            c.at(t).composite(&mut frame, h, w);
        }
        if let Some(nb) = scene.newborn_at(t, config.newborn_emergence_ramp_s) {
            nb.composite(&mut frame, h, w);
        }
        if scene.occluded_at(t) {
            Blob {
                core: scene.newborn.core * 1.4,
                edge: size * 0.03,
                temp: config.body_temp_mean - 60.0,
                ..scene.newborn
            }
            .composite(&mut frame, h, w);
        }
        data.extend(frame.iter().map(|&v| {
            (v + noise.sample(&mut rng)).clamp(0.0, config.sensor_max) as f32
        }));
    }

    let video = ThermalVideo::new(id, config.frame_rate, h, w, data)?;
    Ok((video, ground_truth(config, &scene)))
}

/// One planned corpus member; rendering is deferred so large corpora can be
/// streamed.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub id: String,
    pub config: SceneConfig,
    pub seed: u64,
}

impl EpisodeSpec {
    pub fn generate(&self) -> Result<(ThermalVideo, GroundTruth)> {
        generate_video(self.id.clone(), &self.config, self.seed)
    }
}

/// Plans `n_videos` episodes, `round(n_videos * style_mix)` of them in the
/// operating theater, assigned by a seeded shuffle.
pub fn plan_corpus(
    n_videos: usize,
    style_mix: f64,
    base: &SceneConfig,
    seed: u64,
) -> Result<Vec<EpisodeSpec>> {
    if n_videos == 0 {
        return Err(Error::config("n_videos", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&style_mix) {
        return Err(Error::config("style_mix", "must lie in [0, 1]"));
    }
    base.validate()?;
    let n_ot = (n_videos as f64 * style_mix).round() as usize;
    let mut styles: Vec<SceneStyle> = (0..n_videos)
        .map(|i| {
            if i < n_ot {
                SceneStyle::OperatingTheater
            } else {
                SceneStyle::DeliveryRoom
            }
        })
        .collect();
    styles.shuffle(&mut seed::rng(seed::derive(seed, "styles")));

    Ok(styles
        .into_iter()
        .enumerate()
        .map(|(i, style)| EpisodeSpec {
            id: format!("ep{i:03}"),
            config: SceneConfig {
                scene_style: style,
                tob_s: None,
                ..base.clone()
            },
            seed: seed::derive_indexed(seed, "episode", i as u64),
        })
        .collect())
}

pub fn generate_corpus(
    n_videos: usize,
    style_mix: f64,
    base: &SceneConfig,
    seed: u64,
) -> Result<Vec<(ThermalVideo, GroundTruth)>> {
    plan_corpus(n_videos, style_mix, base, seed)?
        .iter()
        .map(EpisodeSpec::generate)
        .collect()
}
