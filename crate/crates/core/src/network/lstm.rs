//! Single-layer unidirectional LSTM with forget gate and no peepholes.
//!
//! Gates are packed into one `4H x (D+H)` matrix in the order input,
//! forget, output, cell candidate:
//!
//! ```text
//! z_t = W [x_t; h_{t-1}] + b
//! i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```

use rand::Rng;

use super::tensor::{axpy, dot, Matrix};
use crate::encoder::Sequence;
use crate::error::{Error, Result};
use crate::types::sigmoid;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Activations of one forward pass. Rows are time steps.
#[derive(Clone, Debug)]
pub struct LstmCache {
    pub steps: usize,
    /// `T x 4H`, post-activation gate values (i, f, o, g).
    pub gates: Vec<f64>,
    /// `(T+1) x H`, row 0 is the zero initial state.
    pub cell: Vec<f64>,
    /// `(T+1) x H`.
    pub hidden: Vec<f64>,
    /// `T x H`, `tanh(c_t)`.
    pub cell_tanh: Vec<f64>,
}

impl LstmCache {
    pub fn final_hidden(&self) -> &[f64] {
        let h = self.hidden.len() / (self.steps + 1);
        &self.hidden[self.steps * h..]
    }
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            input_dim,
            hidden,
            weight: Matrix::zeros(4 * hidden, input_dim + hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform `±scale` everywhere except the forget-gate bias, which
    /// starts at 1.
    pub fn init(input_dim: usize, hidden: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let weight = Matrix::uniform(4 * hidden, input_dim + hidden, scale, rng);
        let mut bias: Vec<f64> = (0..4 * hidden).map(|_| rng.gen_range(-scale..=scale)).collect();
        bias[hidden..2 * hidden].fill(1.0);
        LstmParams {
            input_dim,
            hidden,
            weight,
            bias,
        }
    }

    pub fn forget_bias_mut(&mut self) -> &mut [f64] {
        let h = self.hidden;
        &mut self.bias[h..2 * h]
    }

    pub fn forward(&self, seq: &Sequence) -> Result<LstmCache> {
        if seq.dim() != self.input_dim {
            return Err(Error::dim("lstm input", self.input_dim, seq.dim()));
        }
        let steps = seq.len();
        if steps == 0 {
            return Err(Error::dim("lstm sequence length (at least)", 1, 0));
        }
        let h = self.hidden;
        let d = self.input_dim;
        let stride = self.weight.cols;
        let mut gates = vec![0.0; steps * 4 * h];
        let mut cell = vec![0.0; (steps + 1) * h];
        let mut hidden = vec![0.0; (steps + 1) * h];
        let mut cell_tanh = vec![0.0; steps * h];
        let mut z = vec![0.0; 4 * h];

        for t in 0..steps {
            z.copy_from_slice(&self.bias);
            seq.for_each_nonzero(t, |j, v| {
                for (r, zr) in z.iter_mut().enumerate() {
                    *zr += self.weight.data[r * stride + j] * v;
                }
            });
            let h_prev = &hidden[t * h..(t + 1) * h];
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += dot(&self.weight.row(r)[d..], h_prev);
            }
            let g_t = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            for k in 0..3 * h {
                g_t[k] = sigmoid(z[k]);
            }
            for k in 3 * h..4 * h {
                g_t[k] = z[k].tanh();
            }
            for k in 0..h {
                let c = g_t[h + k] * cell[t * h + k] + g_t[k] * g_t[3 * h + k];
                let tc = c.tanh();
                cell[(t + 1) * h + k] = c;
                cell_tanh[t * h + k] = tc;
                hidden[(t + 1) * h + k] = g_t[2 * h + k] * tc;
            }
        }
        Ok(LstmCache {
            steps,
            gates,
            cell,
            hidden,
            cell_tanh,
        })
    }

    /// Backpropagate `d_final`, the loss gradient w.r.t. `h_T`, through
    /// time, accumulating into `grad`.
    pub fn backward(&self, seq: &Sequence, cache: &LstmCache, d_final: &[f64], grad: &mut LstmParams) {
        let h = self.hidden;
        let d = self.input_dim;
        let stride = self.weight.cols;
        let mut dh = d_final.to_vec();
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];

        for t in (0..cache.steps).rev() {
            let g_t = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
            let c_prev = &cache.cell[t * h..(t + 1) * h];
            let tc = &cache.cell_tanh[t * h..(t + 1) * h];
            for k in 0..h {
                let (i, f, o, g) = (g_t[k], g_t[h + k], g_t[2 * h + k], g_t[3 * h + k]);
                let d_o = dh[k] * tc[k];
                let dck = dc[k] + dh[k] * o * (1.0 - tc[k] * tc[k]);
                let d_i = dck * g;
                let d_g = dck * i;
                let d_f = dck * c_prev[k];
                dz[k] = d_i * i * (1.0 - i);
                dz[h + k] = d_f * f * (1.0 - f);
                dz[2 * h + k] = d_o * o * (1.0 - o);
                dz[3 * h + k] = d_g * (1.0 - g * g);
                dc[k] = dck * f;
            }

            let h_prev = &cache.hidden[t * h..(t + 1) * h];
            dh.fill(0.0);
            for (r, &dzr) in dz.iter().enumerate() {
                grad.bias[r] += dzr;
                axpy(dzr, h_prev, &mut grad.weight.row_mut(r)[d..]);
                axpy(dzr, &self.weight.row(r)[d..], &mut dh);
            }
            seq.for_each_nonzero(t, |j, v| {
                for (r, &dzr) in dz.iter().enumerate() {
                    grad.weight.data[r * stride + j] += dzr * v;
                }
            });
        }
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 2] {
        [&self.weight.data, &self.bias]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weight.data, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_seq(steps: usize, dim: usize, rng: &mut impl Rng) -> Sequence {
        Sequence::dense(dim, (0..steps * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmParams::zeros(6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = p.forward(&random_seq(7, 6, &mut rng)).unwrap();
        assert!(c.final_hidden().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn decoupled_input_gives_length_independent_state() {
        // Only the forget bias is nonzero: the cell candidate is tanh(0)=0,
        // so the state never leaves zero regardless of input or length.
        let mut p = LstmParams::zeros(6, 4);
        p.forget_bias_mut().fill(1.0);
        let x: Vec<f64> = vec![0.3, -0.2, 1.0, 0.0, 0.5, 0.9];
        let one = p.forward(&Sequence::dense(6, x.clone()).unwrap()).unwrap();
        let five = p.forward(&Sequence::dense(6, x.repeat(5)).unwrap()).unwrap();
        assert_eq!(one.final_hidden(), five.final_hidden());
    }

    #[test]
    fn dimension_checks() {
        let p = LstmParams::zeros(6, 4);
        assert!(matches!(
            p.forward(&Sequence::dense(5, vec![0.0; 5]).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(p.forward(&Sequence::dense(6, vec![]).unwrap()).is_err());
    }

    /// Straight-line reference written without the packed-matrix tricks.
    fn reference_final_hidden(p: &LstmParams, xs: &[Vec<f64>]) -> Vec<f64> {
        let hsz = p.hidden;
        let mut h = vec![0.0; hsz];
        let mut c = vec![0.0; hsz];
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        for x in xs {
            let input: Vec<f64> = x.iter().chain(h.iter()).copied().collect();
            let pre: Vec<f64> = (0..4 * hsz)
                .map(|r| {
                    let mut s = p.bias[r];
                    for (j, v) in input.iter().enumerate() {
                        s += p.weight.data[r * input.len() + j] * v;
                    }
                    s
                })
                .collect();
            for k in 0..hsz {
                let i = sig(pre[k]);
                let f = sig(pre[hsz + k]);
                let o = sig(pre[2 * hsz + k]);
                let g = pre[3 * hsz + k].tanh();
                c[k] = f * c[k] + i * g;
                h[k] = o * c[k].tanh();
            }
        }
        h
    }

    #[test]
    fn matches_straight_line_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = LstmParams::init(6, 4, 0.5, &mut rng);
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let seq = Sequence::dense(6, xs.concat()).unwrap();
        let got = p.forward(&seq).unwrap();
        let want = reference_final_hidden(&p, &xs);
        for (a, b) in got.final_hidden().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
