use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Learning-rate multiplier applied at every epoch boundary.
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay: 0.97,
        }
    }
}

/// Adam with bias correction and exponential per-epoch decay.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    epoch: u32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            epoch: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// `lr_0 * decay^epoch`.
    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate * self.config.decay.powi(self.epoch as i32)
    }

    pub fn end_epoch(&mut self) {
        self.epoch += 1;
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::DimensionMismatch(
                    "parameter and gradient shapes differ from optimizer state".into(),
                ));
            }
        }
        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let lr = self.learning_rate();
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut p = vec![0.3, -2.0, 7.5];
        let mut adam = Adam::new(AdamConfig::default(), &[3]);
        for _ in 0..5 {
            adam.step(vec![&mut p], &[vec![0.0; 3]]).unwrap();
        }
        assert_eq!(p, vec![0.3, -2.0, 7.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![1.0];
        let mut adam = Adam::new(AdamConfig::default(), &[1]);
        adam.step(vec![&mut p], &[vec![1.0]]).unwrap();
        assert!((1.0 - p[0] - 0.001).abs() < 1e-10, "{}", p[0]);
    }

    #[test]
    fn learning_rate_decays_per_epoch() {
        let mut adam = Adam::new(AdamConfig::default(), &[1]);
        adam.end_epoch();
        adam.end_epoch();
        assert!((adam.learning_rate() - 0.000_940_9).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![1.0, 2.0];
        let mut adam = Adam::new(AdamConfig::default(), &[1]);
        assert!(adam.step(vec![&mut p], &[vec![1.0, 1.0]]).is_err());
    }
}
