//! A small, dependency-free neural-network kernel.
//!
//! Dense and LSTM layers with analytic gradients (including backpropagation
//! through time), clamped BCE and MSE losses, Adam with per-epoch learning
//! rate decay, feature standardization, early stopping and a versioned binary
//! checkpoint format. Everything is `f64`.
//!
//! Parameters of a layer are exposed as a list of flat tensors; gradients use
//! the same layout so optimizers and gradient checks can treat any model as a
//! `Vec<&mut [f64]>`.

pub mod adam;
pub mod bilstm;
pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod standardize;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use bilstm::{BiLstm, BiLstmTrace};
pub use checkpoint::{load_checkpoint, save_checkpoint, LayerRecord};
pub use dense::{Activation, Dense};
pub use loss::{bce, bce_grad, mse, mse_grad, PROB_CLAMP};
pub use lstm::{Lstm, LstmTrace};
pub use standardize::Standardizer;
pub use train::{fit, EarlyStopping, TrainConfig, TrainReport};

use rand::Rng;

use crate::error::{Error, Result};

/// Gradients laid out like a model's parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn zeros(shapes: &[usize]) -> Self {
        Grads(shapes.iter().map(|&n| vec![0.0; n]).collect())
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.0.iter_mut().flatten().for_each(|x| *x *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Activations of one forward pass, consumed by the matching backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape<C> {
    cache: Option<C>,
}

impl<C> Default for Tape<C> {
    fn default() -> Self {
        Self { cache: None }
    }
}

impl<C> Tape<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, cache: C) {
        self.cache = Some(cache);
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_none()
    }

    /// Takes the recorded activations; fails if no forward pass was recorded.
    pub fn take(&mut self) -> Result<C> {
        self.cache.take().ok_or(Error::NoForwardCache)
    }
}

/// Anything with a flat parameter list.
pub trait Parameterized {
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params().iter().map(|p| p.to_vec()).collect()
    }

    fn restore(&mut self, saved: &[Vec<f64>]) {
        for (dst, src) in self.params_mut().into_iter().zip(saved) {
            dst.copy_from_slice(src);
        }
    }
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub(crate) fn uniform_init<R: Rng>(rng: &mut R, fan_in: usize, len: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
