use rand::Rng;

use super::{sigmoid, uniform_init, Parameterized};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sigmoid,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Sigmoid => 1,
            Activation::Relu => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Fully connected layer, `y = act(W x + b)` with `W` stored row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            weight: uniform_init(rng, in_dim, in_dim * out_dim),
            bias: uniform_init(rng, in_dim, out_dim),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.out_dim];
        self.forward_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked forward; `x` and `y` must have the layer's dimensions.
    pub fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        for (o, out) in y.iter_mut().enumerate() {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let z = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *out = self.activation.apply(z);
        }
    }

    /// Accumulates parameter gradients for one input/output pair and returns
    /// the gradient with respect to the input when `want_input` is set.
    pub fn backward(
        &self,
        x: &[f64],
        y: &[f64],
        grad_y: &[f64],
        grad_weight: &mut [f64],
        grad_bias: &mut [f64],
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let mut grad_x = want_input.then(|| vec![0.0; self.in_dim]);
        for o in 0..self.out_dim {
            let dz = grad_y[o] * self.activation.derivative_from_output(y[o]);
            if dz == 0.0 {
                continue;
            }
            grad_bias[o] += dz;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                grad_weight[row + i] += dz * x[i];
            }
            if let Some(gx) = grad_x.as_mut() {
                for i in 0..self.in_dim {
                    gx[i] += dz * self.weight[row + i];
                }
            }
        }
        grad_x
    }
}

impl Parameterized for Dense {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_identity_returns_bias() {
        let mut d = Dense::zeros(3, 2, Activation::Identity);
        d.bias = vec![0.7, -1.5];
        assert_eq!(d.forward(&[4.0, -2.0, 9.0]).unwrap(), vec![0.7, -1.5]);
    }

    #[test]
    fn zero_sigmoid_is_half() {
        let d = Dense::zeros(4, 3, Activation::Sigmoid);
        assert_eq!(d.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn shape_mismatch() {
        let d = Dense::zeros(4, 3, Activation::Relu);
        assert!(matches!(
            d.forward(&[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn affine_values() {
        let d = Dense {
            in_dim: 2,
            out_dim: 2,
            activation: Activation::Relu,
            weight: vec![1.0, 2.0, -1.0, -1.0],
            bias: vec![0.5, 0.0],
        };
        assert_eq!(d.forward(&[1.0, 1.0]).unwrap(), vec![3.5, 0.0]);
    }
}
