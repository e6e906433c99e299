use rand::Rng;

use super::{sigmoid, uniform_init, Parameterized};
use crate::error::{Error, Result};

/// LSTM layer with zero initial hidden and cell state.
///
/// Gate pre-activations are stacked in the order input, forget, cell
/// candidate, output: `a = W_x x_t + W_h h_{t-1} + b` with `W_x` of shape
/// `4h x in` and `W_h` of shape `4h x h`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub in_dim: usize,
    pub hidden: usize,
    pub w_x: Vec<f64>,
    pub w_h: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Activations cached by [`Lstm::forward_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrace {
    steps: usize,
    inputs: Vec<f64>,
    /// Post-activation gates `[i, f, g, o]` per step.
    gates: Vec<f64>,
    cells: Vec<f64>,
    hiddens: Vec<f64>,
}

impl LstmTrace {
    /// Hidden states, `steps x hidden`.
    pub fn hiddens(&self) -> &[f64] {
        &self.hiddens
    }
}

impl Lstm {
    pub fn zeros(in_dim: usize, hidden: usize) -> Self {
        Self {
            in_dim,
            hidden,
            w_x: vec![0.0; 4 * hidden * in_dim],
            w_h: vec![0.0; 4 * hidden * hidden],
            bias: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform weights in `±1/sqrt(in_dim)`, forget-gate bias 1.
    pub fn init<R: Rng>(in_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut bias = uniform_init(rng, in_dim, 4 * hidden);
        bias[hidden..2 * hidden].fill(1.0);
        Self {
            in_dim,
            hidden,
            w_x: uniform_init(rng, in_dim, 4 * hidden * in_dim),
            w_h: uniform_init(rng, in_dim, 4 * hidden * hidden),
            bias,
        }
    }

    /// Runs a `steps x in_dim` sequence and returns `steps x hidden` states.
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_traced(inputs)?.hiddens)
    }

    pub fn forward_traced(&self, inputs: &[f64]) -> Result<LstmTrace> {
        if self.in_dim == 0 || !inputs.len().is_multiple_of(self.in_dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values are not a sequence of {}-vectors",
                inputs.len(),
                self.in_dim
            )));
        }
        let h = self.hidden;
        let steps = inputs.len() / self.in_dim;
        let mut gates = vec![0.0; steps * 4 * h];
        let mut cells = vec![0.0; steps * h];
        let mut hiddens = vec![0.0; steps * h];
        let mut pre = vec![0.0; 4 * h];
        for t in 0..steps {
            let x = &inputs[t * self.in_dim..(t + 1) * self.in_dim];
            pre.copy_from_slice(&self.bias);
            for (r, p) in pre.iter_mut().enumerate() {
                let row = &self.w_x[r * self.in_dim..(r + 1) * self.in_dim];
                *p += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            }
            if t > 0 {
                let h_prev = &hiddens[(t - 1) * h..t * h];
                for (r, p) in pre.iter_mut().enumerate() {
                    let row = &self.w_h[r * h..(r + 1) * h];
                    *p += row.iter().zip(h_prev).map(|(w, v)| w * v).sum::<f64>();
                }
            }
            let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                g[j] = sigmoid(pre[j]);
                g[h + j] = sigmoid(pre[h + j]);
                g[2 * h + j] = pre[2 * h + j].tanh();
                g[3 * h + j] = sigmoid(pre[3 * h + j]);
            }
            for j in 0..h {
                let c_prev = if t > 0 { cells[(t - 1) * h + j] } else { 0.0 };
                let c = g[h + j] * c_prev + g[j] * g[2 * h + j];
                cells[t * h + j] = c;
                hiddens[t * h + j] = g[3 * h + j] * c.tanh();
            }
        }
        Ok(LstmTrace {
            steps,
            inputs: inputs.to_vec(),
            gates,
            cells,
            hiddens,
        })
    }

    /// Backpropagation through time.
    ///
    /// `grad_hiddens` is `d loss / d h_t` for every step. Gradients are added
    /// into `grads` (layout of [`Parameterized::params`]); the returned vector
    /// is `d loss / d x_t`, `steps x in_dim`.
    pub fn backward(
        &self,
        trace: &LstmTrace,
        grad_hiddens: &[f64],
        grads: &mut [Vec<f64>],
    ) -> Vec<f64> {
        let h = self.hidden;
        let n_in = self.in_dim;
        let [g_wx, g_wh, g_b] = grads else {
            panic!("lstm gradients need three tensors");
        };
        let mut grad_inputs = vec![0.0; trace.steps * n_in];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];
        for t in (0..trace.steps).rev() {
            let g = &trace.gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let (i_g, f_g, c_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let c = trace.cells[t * h + j];
                let c_prev = if t > 0 { trace.cells[(t - 1) * h + j] } else { 0.0 };
                let tc = c.tanh();
                let dh = grad_hiddens[t * h + j] + dh_next[j];
                let d_o = dh * tc;
                let dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];
                da[j] = dc * c_g * i_g * (1.0 - i_g);
                da[h + j] = dc * c_prev * f_g * (1.0 - f_g);
                da[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                da[3 * h + j] = d_o * o_g * (1.0 - o_g);
                dc_next[j] = dc * f_g;
            }
            let x = &trace.inputs[t * n_in..(t + 1) * n_in];
            let gx = &mut grad_inputs[t * n_in..(t + 1) * n_in];
            dh_next.fill(0.0);
            for (r, &d) in da.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g_b[r] += d;
                let wx_row = r * n_in;
                for k in 0..n_in {
                    g_wx[wx_row + k] += d * x[k];
                    gx[k] += d * self.w_x[wx_row + k];
                }
                if t > 0 {
                    let h_prev = &trace.hiddens[(t - 1) * h..t * h];
                    let wh_row = r * h;
                    for k in 0..h {
                        g_wh[wh_row + k] += d * h_prev[k];
                        dh_next[k] += d * self.w_h[wh_row + k];
                    }
                }
            }
        }
        grad_inputs
    }
}

impl Parameterized for Lstm {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.w_x, &self.w_h, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{gradcheck, Grads};
    use crate::seed;

    /// Straightforward per-gate unrolling with separate matrices.
    fn unrolled(l: &Lstm, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let h = l.hidden;
        let gate = |k: usize, x: &[f64], hp: &[f64], j: usize| {
            let r = k * h + j;
            let mut z = l.bias[r];
            for (i, xi) in x.iter().enumerate() {
                z += l.w_x[r * l.in_dim + i] * xi;
            }
            for (i, hi) in hp.iter().enumerate() {
                z += l.w_h[r * h + i] * hi;
            }
            z
        };
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let mut hp = vec![0.0; h];
        let mut cp = vec![0.0; h];
        let mut out = Vec::new();
        for x in xs {
            let mut hn = vec![0.0; h];
            let mut cn = vec![0.0; h];
            for j in 0..h {
                let i = s(gate(0, x, &hp, j));
                let f = s(gate(1, x, &hp, j));
                let g = gate(2, x, &hp, j).tanh();
                let o = s(gate(3, x, &hp, j));
                cn[j] = f * cp[j] + i * g;
                hn[j] = o * cn[j].tanh();
            }
            out.push(hn.clone());
            hp = hn;
            cp = cn;
        }
        out
    }

    #[test]
    fn forward_matches_unrolled_oracle() {
        let mut rng = seed::rng(3);
        let l = Lstm::init(2, 4, &mut rng);
        let xs = vec![vec![0.3, -1.2], vec![0.9, 0.1], vec![-0.4, 0.5]];
        let flat: Vec<f64> = xs.iter().flatten().copied().collect();
        let got = l.forward(&flat).unwrap();
        let want = unrolled(&l, &xs);
        for t in 0..3 {
            for j in 0..4 {
                assert!((got[t * 4 + j] - want[t][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let l = Lstm::init(3, 5, &mut seed::rng(0));
        assert!(l.bias[5..10].iter().all(|&b| b == 1.0));
    }

    #[test]
    fn ragged_sequence_rejected() {
        let l = Lstm::zeros(3, 2);
        assert!(l.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = seed::rng(17);
        let mut l = Lstm::init(3, 4, &mut rng);
        let xs: Vec<f64> = (0..5 * 3).map(|i| ((i * 7 % 11) as f64 - 5.0) / 4.0).collect();
        let weights: Vec<f64> = (0..5 * 4).map(|i| ((i * 3 % 7) as f64 - 3.0) / 3.0).collect();
        let loss = |l: &Lstm| -> f64 {
            let hs = l.forward(&xs).unwrap();
            hs.iter().zip(&weights).map(|(h, w)| h * w).sum()
        };
        let trace = l.forward_traced(&xs).unwrap();
        let mut grads = Grads::zeros(&l.param_shapes());
        l.backward(&trace, &weights, &mut grads.0);
        let report = gradcheck::check(&mut l, &grads, loss, 1e-5, 150, 5);
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }
}
