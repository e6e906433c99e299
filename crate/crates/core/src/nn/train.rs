use rand::seq::SliceRandom;

use super::{Adam, AdamConfig, Grads, Parameterized};
use crate::error::{Error, Result};
use crate::seed;

/// Tracks the best validation loss and signals when `patience` epochs pass
/// without improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best_loss: f64,
    best_epoch: usize,
    best_params: Option<Vec<Vec<f64>>>,
    epochs_seen: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            best_params: None,
            epochs_seen: 0,
        }
    }

    /// Records one epoch. Returns `true` when training should stop.
    pub fn observe(&mut self, loss: f64, params: impl FnOnce() -> Vec<Vec<f64>>) -> bool {
        let epoch = self.epochs_seen;
        self.epochs_seen += 1;
        if loss < self.best_loss || self.best_params.is_none() {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.best_params = Some(params());
            return false;
        }
        epoch - self.best_epoch >= self.patience
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn into_best(self) -> Option<Vec<Vec<f64>>> {
        self.best_params
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.adam.learning_rate > 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(self.adam.decay > 0.0 && self.adam.decay <= 1.0) {
            return Err(Error::config("lr_decay", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean minibatch loss of every completed epoch.
    pub train_losses: Vec<f64>,
    /// Validation loss before training, then after every epoch.
    pub val_losses: Vec<f64>,
    /// Index into `val_losses` of the restored parameters.
    pub best_epoch: usize,
}

/// Minibatch Adam with early stopping on `validate`, restoring the best
/// parameters seen (including the initial ones).
///
/// `example_grad` adds the gradient of one example's loss into the batch
/// accumulator and returns that loss; batch gradients are averaged.
pub fn fit<M, G, V>(
    model: &mut M,
    n_examples: usize,
    config: &TrainConfig,
    mut example_grad: G,
    mut validate: V,
) -> Result<TrainReport>
where
    M: Parameterized,
    G: FnMut(&M, usize, &mut Grads) -> Result<f64>,
    V: FnMut(&M) -> Result<f64>,
{
    config.validate()?;
    if n_examples == 0 {
        return Err(Error::InsufficientData("no training examples".into()));
    }
    let shapes = model.param_shapes();
    let mut adam = Adam::new(config.adam, &shapes);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut report = TrainReport::default();
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..n_examples).collect();
    let mut grads = Grads::zeros(&shapes);

    let initial = validate(model)?;
    report.val_losses.push(initial);
    stopper.observe(initial, || model.snapshot());

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.0.iter_mut().for_each(|g| g.fill(0.0));
            for &i in batch {
                epoch_loss += example_grad(model, i, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(model.params_mut(), &grads.0)?;
        }
        adam.end_epoch();
        report.train_losses.push(epoch_loss / n_examples as f64);
        let val = validate(model)?;
        report.val_losses.push(val);
        log::debug!("epoch {epoch}: train {:.5} val {val:.5}", epoch_loss / n_examples as f64);
        if !val.is_finite() {
            return Err(Error::DegenerateData(format!(
                "validation loss became {val} at epoch {epoch}"
            )));
        }
        if stopper.observe(val, || model.snapshot()) {
            break;
        }
    }
    report.best_epoch = stopper.best_epoch();
    if let Some(best) = stopper.into_best() {
        model.restore(&best);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience_and_keeps_best() {
        let mut es = EarlyStopping::new(2);
        assert!(!es.observe(1.0, || vec![vec![1.0]]));
        assert!(!es.observe(0.5, || vec![vec![2.0]]));
        assert!(!es.observe(0.7, || vec![vec![3.0]]));
        assert!(es.observe(0.6, || vec![vec![4.0]]));
        assert_eq!(es.best_epoch(), 1);
        assert_eq!(es.into_best(), Some(vec![vec![2.0]]));
    }

    struct Scalar(Vec<f64>);

    impl Parameterized for Scalar {
        fn params(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn params_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    fn config() -> TrainConfig {
        TrainConfig {
            adam: AdamConfig {
                learning_rate: 0.1,
                decay: 1.0,
                ..AdamConfig::default()
            },
            max_epochs: 200,
            batch_size: 2,
            patience: 5,
            seed: 1,
        }
    }

    #[test]
    fn fit_minimizes_a_quadratic() {
        // loss_i = (w - x_i)^2 with mean x = 2
        let xs = [1.0, 2.0, 3.0];
        let mut m = Scalar(vec![-1.0]);
        let report = fit(
            &mut m,
            3,
            &config(),
            |m, i, g| {
                let d = m.0[0] - xs[i];
                g.0[0][0] += 2.0 * d;
                Ok(d * d)
            },
            |m| Ok((m.0[0] - 2.0).powi(2)),
        )
        .unwrap();
        assert!((m.0[0] - 2.0).abs() < 0.1, "{}", m.0[0]);
        assert!(report.val_losses[report.best_epoch] <= report.val_losses[0]);
        assert_eq!(report.val_losses.len(), report.train_losses.len() + 1);
    }

    #[test]
    fn fit_restores_initial_parameters_when_nothing_improves() {
        let mut m = Scalar(vec![0.0]);
        let report = fit(
            &mut m,
            4,
            &config(),
            |_, _, g| {
                g.0[0][0] += 1.0;
                Ok(0.0)
            },
            |m| Ok(m.0[0].abs()),
        )
        .unwrap();
        assert_eq!(report.best_epoch, 0);
        assert_eq!(m.0, vec![0.0]);
        assert_eq!(report.train_losses.len(), 5);
    }

    #[test]
    fn fit_rejects_empty_data() {
        let mut m = Scalar(vec![0.0]);
        let r = fit(&mut m, 0, &config(), |_, _, _| Ok(0.0), |_| Ok(0.0));
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }
}
