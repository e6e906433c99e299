//! Turns per-second stream scores into a birth time.
//!
//! Overlapping windows of the `[p_fusion, p_vnb]` series go through a small
//! recurrent model predicting an event peak and a pre/post transition; the
//! averaged joint signal `evt + tr` is thresholded at its maximum. The
//! moving-average and first-crossing baselines live here too.

pub mod estimate;
pub mod labels;
pub mod loss;
pub mod model;
pub mod segments;
pub mod train;

pub use estimate::{
    estimate_tob, fir_filter, hct_detect, threshold_first, TobEstimate, BINARY_THRESHOLD,
    DEFAULT_GAMMA, DEFAULT_TAPS, DEFAULT_THETA,
};
pub use labels::{build_labels, SupervisionSignals};
pub use loss::{aggregation_loss, aggregation_loss_grad, LossWeights, Targets};
pub use model::{aux_forward, AuxModel, AuxOutput};
pub use segments::{
    assemble_predictions, assemble_streaming, predict_series, window_segments, Segment,
};
pub use train::{train_aux, AuxTrainConfig, AuxVideo};
