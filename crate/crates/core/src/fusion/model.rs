use std::path::Path;

use rand::Rng;

use super::features::{
    clip_frame_stats, mean_static, temporal_from_stats, ExtractorKind, FeatureExtractorSpec,
};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{decode_checkpoint, encode_checkpoint, LayerStack};
use crate::nn::{Activation, Dense, Grads, LayerRecord, Parameterized, Standardizer, Tape};
use crate::windowing::Clip;

pub const REFINE_WIDTH: usize = 16;
pub const SHARED_WIDTH: usize = 16;

pub const IMAGE_HEAD_KIND: &str = "image-head";
pub const FUSION_KIND: &str = "fusion";

/// Per-frame VNB classifier over standardized static features.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageHead {
    pub standardizer: Standardizer,
    pub dense: Dense,
}

impl ImageHead {
    pub fn new(standardizer: Standardizer) -> Self {
        let dim = standardizer.dim();
        Self {
            standardizer,
            dense: Dense::zeros(dim, 1, Activation::Sigmoid),
        }
    }

    pub fn dim(&self) -> usize {
        self.dense.in_dim
    }

    /// VNB probability of one frame's raw static features.
    pub fn prob(&self, static_features: &[f64]) -> f64 {
        let x = self.standardizer.apply(static_features);
        let mut y = [0.0];
        self.dense.forward_into(&x, &mut y);
        y[0]
    }

    fn layers(&self) -> Vec<LayerRecord> {
        vec![
            LayerRecord::Standardize(self.standardizer.clone()),
            LayerRecord::Dense(self.dense.clone()),
        ]
    }

    fn from_stack(stack: &mut LayerStack) -> Result<Self> {
        let standardizer = stack.standardize()?;
        let dense = stack.dense()?;
        if dense.out_dim != 1 || dense.in_dim != standardizer.dim() {
            return Err(Error::Checkpoint("image head has inconsistent shapes".into()));
        }
        Ok(Self { standardizer, dense })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_checkpoint(IMAGE_HEAD_KIND, &self.layers())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut stack = LayerStack::new(decode_checkpoint(bytes, IMAGE_HEAD_KIND)?);
        let head = Self::from_stack(&mut stack)?;
        stack.finish()?;
        Ok(head)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

impl Parameterized for ImageHead {
    /// Only the dense layer; the standardizer is fitted, not trained.
    fn params(&self) -> Vec<&[f64]> {
        self.dense.params()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.dense.params_mut()
    }
}

/// The trainable layers: one refinement layer per stream, a shared layer over
/// their concatenation and a sigmoid classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionHead {
    pub image_refine: Dense,
    pub video_refine: Dense,
    pub shared: Dense,
    pub classifier: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionCache {
    x_img: Vec<f64>,
    x_vid: Vec<f64>,
    r_img: Vec<f64>,
    r_vid: Vec<f64>,
    concat: Vec<f64>,
    shared: Vec<f64>,
    p: f64,
}

impl FusionHead {
    pub fn init<R: Rng>(static_dim: usize, temporal_dim: usize, rng: &mut R) -> Self {
        Self {
            image_refine: Dense::init(static_dim, REFINE_WIDTH, Activation::Relu, rng),
            video_refine: Dense::init(temporal_dim, REFINE_WIDTH, Activation::Relu, rng),
            shared: Dense::init(2 * REFINE_WIDTH, SHARED_WIDTH, Activation::Relu, rng),
            classifier: Dense::init(SHARED_WIDTH, 1, Activation::Sigmoid, rng),
        }
    }

    pub fn forward(&self, x_img: &[f64], x_vid: &[f64]) -> Result<f64> {
        Ok(self.forward_cache(x_img, x_vid)?.p)
    }

    fn forward_cache(&self, x_img: &[f64], x_vid: &[f64]) -> Result<FusionCache> {
        let r_img = self.image_refine.forward(x_img)?;
        let r_vid = self.video_refine.forward(x_vid)?;
        let concat = [r_img.as_slice(), r_vid.as_slice()].concat();
        let shared = self.shared.forward(&concat)?;
        let p = self.classifier.forward(&shared)?[0];
        Ok(FusionCache {
            x_img: x_img.to_vec(),
            x_vid: x_vid.to_vec(),
            r_img,
            r_vid,
            concat,
            shared,
            p,
        })
    }

    pub fn forward_taped(
        &self,
        x_img: &[f64],
        x_vid: &[f64],
        tape: &mut Tape<FusionCache>,
    ) -> Result<f64> {
        let cache = self.forward_cache(x_img, x_vid)?;
        let p = cache.p;
        tape.record(cache);
        Ok(p)
    }

    /// Adds `d loss / d params` into `grads` given `d loss / d p`.
    pub fn backward(&self, tape: &mut Tape<FusionCache>, grad_p: f64, grads: &mut Grads) -> Result<()> {
        let c = tape.take()?;
        let [g_iw, g_ib, g_vw, g_vb, g_sw, g_sb, g_cw, g_cb] = grads.0.as_mut_slice() else {
            return Err(Error::DimensionMismatch("fusion head needs 8 gradient tensors".into()));
        };
        let g_shared = self
            .classifier
            .backward(&c.shared, &[c.p], &[grad_p], g_cw, g_cb, true)
            .unwrap_or_default();
        let g_concat = self
            .shared
            .backward(&c.concat, &c.shared, &g_shared, g_sw, g_sb, true)
            .unwrap_or_default();
        let (g_rimg, g_rvid) = g_concat.split_at(REFINE_WIDTH.min(g_concat.len()));
        self.image_refine
            .backward(&c.x_img, &c.r_img, g_rimg, g_iw, g_ib, false);
        self.video_refine
            .backward(&c.x_vid, &c.r_vid, g_rvid, g_vw, g_vb, false);
        Ok(())
    }

    fn layers(&self) -> Vec<LayerRecord> {
        [&self.image_refine, &self.video_refine, &self.shared, &self.classifier]
            .into_iter()
            .map(|d| LayerRecord::Dense(d.clone()))
            .collect()
    }
}

impl Parameterized for FusionHead {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.image_refine.params();
        p.extend(self.video_refine.params());
        p.extend(self.shared.params());
        p.extend(self.classifier.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.image_refine.params_mut();
        p.extend(self.video_refine.params_mut());
        p.extend(self.shared.params_mut());
        p.extend(self.classifier.params_mut());
        p
    }
}

/// Two-stream model. The averaged static features of a clip are standardized
/// with the image head's standardizer; temporal features have their own.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub spec: FeatureExtractorSpec,
    pub image_head: ImageHead,
    pub temporal_standardizer: Standardizer,
    pub head: FusionHead,
}

impl FusionModel {
    pub fn new<R: Rng>(image_head: ImageHead, temporal_standardizer: Standardizer, rng: &mut R) -> Self {
        let spec = FeatureExtractorSpec {
            static_dim: image_head.dim(),
            temporal_dim: temporal_standardizer.dim(),
            kind: ExtractorKind::HandcraftedV1,
        };
        let head = FusionHead::init(spec.static_dim, spec.temporal_dim, rng);
        Self {
            spec,
            image_head,
            temporal_standardizer,
            head,
        }
    }

    /// Head inputs for a clip's mean static and temporal feature vectors.
    pub fn head_inputs(&self, static_mean: &[f64], temporal: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.image_head.standardizer.apply(static_mean),
            self.temporal_standardizer.apply(temporal),
        )
    }

    pub fn p_fusion(&self, static_mean: &[f64], temporal: &[f64]) -> Result<f64> {
        if static_mean.len() != self.spec.static_dim || temporal.len() != self.spec.temporal_dim {
            return Err(Error::DimensionMismatch(format!(
                "model expects {}+{} features, got {}+{}",
                self.spec.static_dim,
                self.spec.temporal_dim,
                static_mean.len(),
                temporal.len()
            )));
        }
        let (x_img, x_vid) = self.head_inputs(static_mean, temporal);
        self.head.forward(&x_img, &x_vid)
    }

    fn layers(&self) -> Vec<LayerRecord> {
        let mut layers = self.image_head.layers();
        layers.push(LayerRecord::Standardize(self.temporal_standardizer.clone()));
        layers.extend(self.head.layers());
        layers
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_checkpoint(FUSION_KIND, &self.layers())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut stack = LayerStack::new(decode_checkpoint(bytes, FUSION_KIND)?);
        let image_head = ImageHead::from_stack(&mut stack)?;
        let temporal_standardizer = stack.standardize()?;
        let head = FusionHead {
            image_refine: stack.dense()?,
            video_refine: stack.dense()?,
            shared: stack.dense()?,
            classifier: stack.dense()?,
        };
        stack.finish()?;
        let spec = FeatureExtractorSpec {
            static_dim: image_head.dim(),
            temporal_dim: temporal_standardizer.dim(),
            kind: ExtractorKind::HandcraftedV1,
        };
        if head.image_refine.in_dim != spec.static_dim
            || head.video_refine.in_dim != spec.temporal_dim
            || head.shared.in_dim != head.image_refine.out_dim + head.video_refine.out_dim
            || head.classifier.in_dim != head.shared.out_dim
            || head.classifier.out_dim != 1
        {
            return Err(Error::Checkpoint("fusion model has inconsistent shapes".into()));
        }
        Ok(Self {
            spec,
            image_head,
            temporal_standardizer,
            head,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// `(p_fusion, p_vnb)` for one clip.
pub fn fusion_forward(model: &FusionModel, clip: &Clip<'_>) -> Result<(f64, f64)> {
    if model.spec.kind != ExtractorKind::HandcraftedV1 {
        return Err(Error::DimensionMismatch(
            "only handcrafted extractors run in-process".into(),
        ));
    }
    let stats = clip_frame_stats(clip);
    let temporal = temporal_from_stats(&stats)?;
    let static_mean = mean_static(&stats);
    let p_fusion = model.p_fusion(&static_mean, &temporal)?;
    let p_vnb = stats
        .iter()
        .map(|s| model.image_head.prob(&s.static_features))
        .sum::<f64>()
        / stats.len() as f64;
    Ok((p_fusion, p_vnb))
}
