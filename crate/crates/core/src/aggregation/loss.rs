use super::model::AuxOutput;
use crate::error::{Error, Result};
use crate::nn::{bce, bce_grad, mse, mse_grad};

/// Weights of the event, transition and joint terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub evt: f64,
    pub tr: f64,
    pub joint: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            evt: 0.4,
            tr: 0.4,
            joint: 0.2,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha_evt", self.evt), ("alpha_tr", self.tr), ("alpha_joint", self.joint)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be a finite non-negative number"));
            }
        }
        Ok(())
    }
}

/// Targets aligned with a prediction.
#[derive(Debug, Clone, Copy)]
pub struct Targets<'a> {
    pub evt: &'a [f64],
    pub tr: &'a [f64],
    pub joint: &'a [f64],
}

fn check(targets: &Targets<'_>, pred: &AuxOutput) -> Result<()> {
    let n = pred.len();
    if [targets.evt.len(), targets.tr.len(), targets.joint.len(), pred.tr.len(), pred.joint.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::LengthMismatch(
            "targets and predictions must share one length".into(),
        ));
    }
    Ok(())
}

/// `a_evt * BCE(evt) + a_tr * BCE(tr) + a_joint * MSE(joint)`, each a mean
/// over timesteps.
pub fn aggregation_loss(targets: &Targets<'_>, pred: &AuxOutput, weights: &LossWeights) -> Result<f64> {
    check(targets, pred)?;
    Ok(weights.evt * bce(targets.evt, &pred.evt)?
        + weights.tr * bce(targets.tr, &pred.tr)?
        + weights.joint * mse(targets.joint, &pred.joint)?)
}

/// Gradient of [`aggregation_loss`] with respect to the event and transition
/// outputs; the joint term reaches both through `joint = evt + tr`.
pub fn aggregation_loss_grad(
    targets: &Targets<'_>,
    pred: &AuxOutput,
    weights: &LossWeights,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check(targets, pred)?;
    let g_evt = bce_grad(targets.evt, &pred.evt)?;
    let g_tr = bce_grad(targets.tr, &pred.tr)?;
    let g_joint = mse_grad(targets.joint, &pred.joint)?;
    let evt = g_evt
        .iter()
        .zip(&g_joint)
        .map(|(e, j)| weights.evt * e + weights.joint * j)
        .collect();
    let tr = g_tr
        .iter()
        .zip(&g_joint)
        .map(|(e, j)| weights.tr * e + weights.joint * j)
        .collect();
    Ok((evt, tr))
}
