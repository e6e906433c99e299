//! Time-of-birth detection in thermal video.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`normalize`]: fit a Gaussian mixture to raw intensities, pick the
//!    skin-temperature mode and rescale the video to `[0, 1]` around it.
//! 2. [`windowing`]: cut the normalized video into fixed-length clips ending at
//!    each sampled second.
//! 3. [`fusion`]: a two-stream model turns each clip into a fused birth score
//!    `p_fusion` and a visible-newborn score `p_vnb`.
//! 4. [`aggregation`]: a small recurrent model reads the per-second score
//!    matrix in overlapping windows and emits event / transition / joint
//!    traces, from which the birth time is estimated.
//! 5. [`eval`]: classification metrics and error statistics.
//!
//! [`synthgen`] produces labelled synthetic episodes, [`thermal_io`] stores
//! them on disk and [`pipeline`] chains the stages with file-based artifacts.

pub mod aggregation;
pub mod config;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod nn;
pub mod normalize;
pub mod pipeline;
pub mod seed;
pub mod synthgen;
pub mod thermal_io;
pub mod windowing;

pub use crate::error::{Error, Result};
pub use crate::thermal_io::{GroundTruth, NormalizedVideo, ThermalVideo};
