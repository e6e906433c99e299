//! Two-stream clip scoring: a static (image) stream and a temporal (video)
//! stream fused at the feature level into `p_fusion`, plus the frozen image
//! head's frame-averaged `p_vnb`.

pub mod features;
pub mod model;
pub mod score;
pub mod train;

pub use features::{
    extract_static_features, extract_temporal_features, ExtractorKind, FeatureExtractorSpec,
    STATIC_DIM, TEMPORAL_DIM,
};
pub use model::{fusion_forward, FusionHead, FusionModel, ImageHead};
pub use score::{score_features, score_video, ClipFeatures, ScoreSeries, VideoFeatures};
pub use train::{
    clip_examples, clip_label, frame_examples, fusion_config, image_head_config, in_emergence,
    train_fusion, train_image_head, LabeledClip, LabeledFrame,
};
