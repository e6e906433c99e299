use rand::Rng;

use super::{Lstm, LstmTrace, Parameterized};
use crate::error::Result;

/// A forward and a time-reversed [`Lstm`] over the same sequence; step `t`
/// of the output is `[h_fwd(t), h_bwd(t)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmTrace {
    fwd: LstmTrace,
    bwd: LstmTrace,
    hiddens: Vec<f64>,
}

impl BiLstmTrace {
    /// `steps x (2 * hidden)`.
    pub fn hiddens(&self) -> &[f64] {
        &self.hiddens
    }
}

/// Reverses the order of `dim`-wide rows.
fn reverse_rows(xs: &[f64], dim: usize) -> Vec<f64> {
    xs.chunks(dim).rev().flatten().copied().collect()
}

impl BiLstm {
    /// `hidden` is per direction.
    pub fn init<R: Rng>(in_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let fwd = Lstm::init(in_dim, hidden, rng);
        let bwd = Lstm::init(in_dim, hidden, rng);
        Self { fwd, bwd }
    }

    pub fn zeros(in_dim: usize, hidden: usize) -> Self {
        Self {
            fwd: Lstm::zeros(in_dim, hidden),
            bwd: Lstm::zeros(in_dim, hidden),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.fwd.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.fwd.hidden + self.bwd.hidden
    }

    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_traced(inputs)?.hiddens)
    }

    pub fn forward_traced(&self, inputs: &[f64]) -> Result<BiLstmTrace> {
        let fwd = self.fwd.forward_traced(inputs)?;
        let bwd = self
            .bwd
            .forward_traced(&reverse_rows(inputs, self.bwd.in_dim))?;
        let (hf, hb) = (self.fwd.hidden, self.bwd.hidden);
        let back = reverse_rows(bwd.hiddens(), hb);
        let hiddens = fwd
            .hiddens()
            .chunks(hf)
            .zip(back.chunks(hb))
            .flat_map(|(a, b)| a.iter().chain(b))
            .copied()
            .collect();
        Ok(BiLstmTrace { fwd, bwd, hiddens })
    }

    /// Gradients go into six tensors (forward layer, then backward layer);
    /// returns `d loss / d x_t`.
    pub fn backward(
        &self,
        trace: &BiLstmTrace,
        grad_hiddens: &[f64],
        grads: &mut [Vec<f64>],
    ) -> Vec<f64> {
        let (hf, hb) = (self.fwd.hidden, self.bwd.hidden);
        let mut g_fwd = Vec::with_capacity(grad_hiddens.len() / 2);
        let mut g_bwd = Vec::with_capacity(grad_hiddens.len() / 2);
        for row in grad_hiddens.chunks(hf + hb) {
            g_fwd.extend_from_slice(&row[..hf]);
            g_bwd.extend_from_slice(&row[hf..]);
        }
        let (gf, gb) = grads.split_at_mut(3);
        let mut gx = self.fwd.backward(&trace.fwd, &g_fwd, gf);
        let gx_rev = self
            .bwd
            .backward(&trace.bwd, &reverse_rows(&g_bwd, hb), gb);
        for (a, b) in gx.iter_mut().zip(reverse_rows(&gx_rev, self.bwd.in_dim)) {
            *a += b;
        }
        gx
    }
}

impl Parameterized for BiLstm {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.fwd.params();
        p.extend(self.bwd.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.fwd.params_mut();
        p.extend(self.bwd.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{gradcheck, Grads};
    use crate::seed;

    #[test]
    fn halves_match_independent_passes() {
        let l = BiLstm::init(2, 3, &mut seed::rng(4));
        let xs = [0.1, 0.5, -0.3, 0.8, 0.9, 0.0, 0.2, -0.7];
        let h = l.forward(&xs).unwrap();
        let f = l.fwd.forward(&xs).unwrap();
        let b = l.bwd.forward(&reverse_rows(&xs, 2)).unwrap();
        for t in 0..4 {
            assert_eq!(&h[t * 6..t * 6 + 3], &f[t * 3..t * 3 + 3]);
            assert_eq!(&h[t * 6 + 3..t * 6 + 6], &b[(3 - t) * 3..(4 - t) * 3]);
        }
    }

    #[test]
    fn first_step_sees_the_last_input_only_through_the_reversed_half() {
        let l = BiLstm::init(1, 2, &mut seed::rng(5));
        let a = l.forward(&[0.0, 0.0, 0.0]).unwrap();
        let b = l.forward(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a[0..2], b[0..2]);
        assert_ne!(a[2..4], b[2..4]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut l = BiLstm::init(2, 3, &mut seed::rng(6));
        let xs = [0.3, -0.2, 0.7, 0.1, -0.5, 0.4, 0.2, 0.9];
        let wts: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let loss = |m: &BiLstm| {
            let h = m.forward(&xs).unwrap();
            h.iter().zip(&wts).map(|(a, b)| a * b).sum::<f64>()
        };
        let trace = l.forward_traced(&xs).unwrap();
        let mut grads = Grads::zeros(&l.param_shapes());
        l.backward(&trace, &wts, &mut grads.0);
        let report = gradcheck::check(&mut l, &grads, loss, 1e-5, 150, 3);
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }
}
