use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::checkpoint::{decode_checkpoint, encode_checkpoint, LayerStack};
use crate::nn::{Activation, BiLstm, BiLstmTrace, Dense, Grads, LayerRecord, Parameterized, Tape};

pub const AUX_KIND: &str = "aux";
pub const INPUT_DIM: usize = 2;
/// Width of each recurrent layer's output, split evenly between directions.
pub const LSTM_HIDDEN: usize = 16;
pub const DENSE_HIDDEN: usize = 8;

/// Per-timestep outputs for one segment or a whole series.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxOutput {
    pub evt: Vec<f64>,
    pub tr: Vec<f64>,
    /// Always `evt + tr`.
    pub joint: Vec<f64>,
}

impl AuxOutput {
    pub fn from_parts(evt: Vec<f64>, tr: Vec<f64>) -> Self {
        let joint = evt.iter().zip(&tr).map(|(a, b)| a + b).collect();
        Self { evt, tr, joint }
    }

    pub fn len(&self) -> usize {
        self.evt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evt.is_empty()
    }
}

/// Two stacked bidirectional LSTMs, a ReLU dense layer and a two-unit sigmoid
/// layer (event, transition) applied at every step.
///
/// Each step sees the whole segment, so the event output can fire at the
/// birth itself even though the scores only rise a few seconds later.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxModel {
    pub lstm1: BiLstm,
    pub lstm2: BiLstm,
    pub dense1: Dense,
    pub dense2: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxCache {
    trace1: BiLstmTrace,
    trace2: BiLstmTrace,
    hidden: Vec<f64>,
    out: Vec<f64>,
}

impl AuxModel {
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        Self {
            lstm1: BiLstm::init(INPUT_DIM, LSTM_HIDDEN / 2, rng),
            lstm2: BiLstm::init(LSTM_HIDDEN, LSTM_HIDDEN / 2, rng),
            dense1: Dense::init(LSTM_HIDDEN, DENSE_HIDDEN, Activation::Relu, rng),
            dense2: Dense::init(DENSE_HIDDEN, 2, Activation::Sigmoid, rng),
        }
    }

    pub fn zeros() -> Self {
        Self {
            lstm1: BiLstm::zeros(INPUT_DIM, LSTM_HIDDEN / 2),
            lstm2: BiLstm::zeros(LSTM_HIDDEN, LSTM_HIDDEN / 2),
            dense1: Dense::zeros(LSTM_HIDDEN, DENSE_HIDDEN, Activation::Relu),
            dense2: Dense::zeros(DENSE_HIDDEN, 2, Activation::Sigmoid),
        }
    }

    fn forward_cache(&self, segment: &[f64]) -> Result<AuxCache> {
        if segment.is_empty() || !segment.len().is_multiple_of(INPUT_DIM) {
            return Err(Error::DimensionMismatch(format!(
                "segment of {} values is not a sequence of [p_fusion, p_vnb] rows",
                segment.len()
            )));
        }
        let steps = segment.len() / INPUT_DIM;
        let trace1 = self.lstm1.forward_traced(segment)?;
        let trace2 = self.lstm2.forward_traced(trace1.hiddens())?;
        let h2 = trace2.hiddens();
        let mut hidden = vec![0.0; steps * DENSE_HIDDEN];
        let mut out = vec![0.0; steps * 2];
        for t in 0..steps {
            let hid = &mut hidden[t * DENSE_HIDDEN..(t + 1) * DENSE_HIDDEN];
            self.dense1
                .forward_into(&h2[t * LSTM_HIDDEN..(t + 1) * LSTM_HIDDEN], hid);
            self.dense2.forward_into(hid, &mut out[t * 2..t * 2 + 2]);
        }
        Ok(AuxCache {
            trace1,
            trace2,
            hidden,
            out,
        })
    }

    fn split(out: &[f64]) -> AuxOutput {
        AuxOutput::from_parts(
            out.iter().step_by(2).copied().collect(),
            out.iter().skip(1).step_by(2).copied().collect(),
        )
    }

    /// `segment` holds `w` rows of `[p_fusion, p_vnb]`, row-major.
    pub fn forward(&self, segment: &[f64]) -> Result<AuxOutput> {
        Ok(Self::split(&self.forward_cache(segment)?.out))
    }

    pub fn forward_taped(&self, segment: &[f64], tape: &mut Tape<AuxCache>) -> Result<AuxOutput> {
        let cache = self.forward_cache(segment)?;
        let out = Self::split(&cache.out);
        tape.record(cache);
        Ok(out)
    }

    /// Adds parameter gradients into `grads` given per-step `d loss / d evt`
    /// and `d loss / d tr`.
    pub fn backward(
        &self,
        tape: &mut Tape<AuxCache>,
        grad_evt: &[f64],
        grad_tr: &[f64],
        grads: &mut Grads,
    ) -> Result<()> {
        let c = tape.take()?;
        let steps = c.out.len() / 2;
        if grad_evt.len() != steps || grad_tr.len() != steps {
            return Err(Error::LengthMismatch(format!(
                "{steps} steps but {} / {} output gradients",
                grad_evt.len(),
                grad_tr.len()
            )));
        }
        let (g_l1, rest) = grads.0.split_at_mut(6);
        let (g_l2, rest) = rest.split_at_mut(6);
        let [g_d1w, g_d1b, g_d2w, g_d2b] = rest else {
            return Err(Error::DimensionMismatch("aux model needs 16 gradient tensors".into()));
        };
        let h2 = c.trace2.hiddens();
        let mut grad_h2 = vec![0.0; steps * LSTM_HIDDEN];
        for t in 0..steps {
            let hid = &c.hidden[t * DENSE_HIDDEN..(t + 1) * DENSE_HIDDEN];
            let out = &c.out[t * 2..t * 2 + 2];
            let g_hid = self
                .dense2
                .backward(hid, out, &[grad_evt[t], grad_tr[t]], g_d2w, g_d2b, true)
                .unwrap_or_default();
            let x = &h2[t * LSTM_HIDDEN..(t + 1) * LSTM_HIDDEN];
            if let Some(g) = self.dense1.backward(x, hid, &g_hid, g_d1w, g_d1b, true) {
                grad_h2[t * LSTM_HIDDEN..(t + 1) * LSTM_HIDDEN].copy_from_slice(&g);
            }
        }
        let grad_h1 = self.lstm2.backward(&c.trace2, &grad_h2, g_l2);
        self.lstm1.backward(&c.trace1, &grad_h1, g_l1);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_checkpoint(
            AUX_KIND,
            &[
                LayerRecord::Lstm(self.lstm1.fwd.clone()),
                LayerRecord::Lstm(self.lstm1.bwd.clone()),
                LayerRecord::Lstm(self.lstm2.fwd.clone()),
                LayerRecord::Lstm(self.lstm2.bwd.clone()),
                LayerRecord::Dense(self.dense1.clone()),
                LayerRecord::Dense(self.dense2.clone()),
            ],
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut stack = LayerStack::new(decode_checkpoint(bytes, AUX_KIND)?);
        let model = Self {
            lstm1: BiLstm {
                fwd: stack.lstm()?,
                bwd: stack.lstm()?,
            },
            lstm2: BiLstm {
                fwd: stack.lstm()?,
                bwd: stack.lstm()?,
            },
            dense1: stack.dense()?,
            dense2: stack.dense()?,
        };
        stack.finish()?;
        let bi_ok = |l: &BiLstm| l.bwd.in_dim == l.fwd.in_dim;
        if !bi_ok(&model.lstm1)
            || !bi_ok(&model.lstm2)
            || model.lstm1.in_dim() != INPUT_DIM
            || model.lstm2.in_dim() != model.lstm1.out_dim()
            || model.dense1.in_dim != model.lstm2.out_dim()
            || model.dense2.in_dim != model.dense1.out_dim
            || model.dense2.out_dim != 2
        {
            return Err(Error::Checkpoint("aux model has inconsistent shapes".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

impl Parameterized for AuxModel {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.lstm1.params();
        p.extend(self.lstm2.params());
        p.extend(self.dense1.params());
        p.extend(self.dense2.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.lstm1.params_mut();
        p.extend(self.lstm2.params_mut());
        p.extend(self.dense1.params_mut());
        p.extend(self.dense2.params_mut());
        p
    }
}

pub fn aux_forward(model: &AuxModel, segment: &[f64]) -> Result<AuxOutput> {
    model.forward(segment)
}
