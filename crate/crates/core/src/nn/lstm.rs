use rand::Rng;

use super::{Module, Param};
use crate::error::{Error, Result};

/// A single-layer LSTM. Gate rows are stacked as `[input, forget, cell, output]`,
/// each `hidden` rows tall.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w_input: Param,
    pub w_hidden: Param,
    pub bias: Param,
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    c: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Everything the backward pass needs from one forward sequence.
#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: Vec<StepCache>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut bias = Param::zeros(&[4 * hidden]);
        // open forget gates at start
        bias.value[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
        Self {
            w_input: Param::uniform(&[4 * hidden, input], bound, rng),
            w_hidden: Param::uniform(&[4 * hidden, hidden], bound, rng),
            bias,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: Param::zeros(&[4 * hidden, input]),
            w_hidden: Param::zeros(&[4 * hidden, hidden]),
            bias: Param::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.shape[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.shape[1]
    }

    /// One recurrence step from `(h, c)`; returns `(h', c')`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input_dim() || h.len() != self.hidden_dim() || c.len() != h.len() {
            return Err(Error::shape("lstm step dimensions do not match the cell"));
        }
        let s = self.step_cached(x, h, c);
        let h_new = self.hidden_from(&s);
        Ok((h_new, s.c.clone()))
    }

    fn step_cached(&self, x: &[f64], h: &[f64], c: &[f64]) -> StepCache {
        let hd = self.hidden_dim();
        let id = self.input_dim();
        let mut z = self.bias.value.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            let wx = &self.w_input.value[r * id..(r + 1) * id];
            let wh = &self.w_hidden.value[r * hd..(r + 1) * hd];
            *zr += wx.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
                + wh.iter().zip(h).map(|(w, v)| w * v).sum::<f64>();
        }
        let mut gates = z;
        for (k, g) in gates.iter_mut().enumerate() {
            *g = if (2 * hd..3 * hd).contains(&k) {
                g.tanh()
            } else {
                sigmoid(*g)
            };
        }
        let c_new: Vec<f64> = (0..hd)
            .map(|j| gates[hd + j] * c[j] + gates[j] * gates[2 * hd + j])
            .collect();
        StepCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            c_prev: c.to_vec(),
            tanh_c: c_new.iter().map(|v| v.tanh()).collect(),
            c: c_new,
            gates,
        }
    }

    fn hidden_from(&self, s: &StepCache) -> Vec<f64> {
        let hd = self.hidden_dim();
        (0..hd).map(|j| s.gates[3 * hd + j] * s.tanh_c[j]).collect()
    }

    /// Runs the sequence (row-major, `input_dim` values per step) from a zero
    /// state and returns the final hidden state.
    pub fn forward(&self, inputs: &[f64]) -> Result<(Vec<f64>, LstmCache)> {
        let id = self.input_dim();
        if inputs.is_empty() {
            return Err(Error::invalid("lstm input sequence is empty"));
        }
        if id == 0 || inputs.len() % id != 0 {
            return Err(Error::shape(format!(
                "sequence length {} is not a multiple of input width {id}",
                inputs.len()
            )));
        }
        let hd = self.hidden_dim();
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut steps = Vec::with_capacity(inputs.len() / id);
        for x in inputs.chunks_exact(id) {
            let s = self.step_cached(x, &h, &c);
            h = self.hidden_from(&s);
            c = s.c.clone();
            steps.push(s);
        }
        Ok((h, LstmCache { steps }))
    }

    /// Backpropagates `d_hidden` (gradient on the final hidden state) through
    /// time. Accumulates parameter gradients and returns input gradients.
    pub fn backward(&mut self, cache: &LstmCache, d_hidden: &[f64]) -> Vec<f64> {
        let hd = self.hidden_dim();
        let id = self.input_dim();
        let mut dh = d_hidden.to_vec();
        let mut dc = vec![0.0; hd];
        let mut dz = vec![0.0; 4 * hd];
        let mut d_inputs = vec![0.0; cache.steps.len() * id];
        for (t, s) in cache.steps.iter().enumerate().rev() {
            let g = &s.gates;
            for j in 0..hd {
                let (i, f, cand, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
                let tc = s.tanh_c[j];
                let d_o = dh[j] * tc;
                let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
                dz[j] = dcj * cand * i * (1.0 - i);
                dz[hd + j] = dcj * s.c_prev[j] * f * (1.0 - f);
                dz[2 * hd + j] = dcj * i * (1.0 - cand * cand);
                dz[3 * hd + j] = d_o * o * (1.0 - o);
                dc[j] = dcj * f;
            }
            let mut dh_prev = vec![0.0; hd];
            let dx = &mut d_inputs[t * id..(t + 1) * id];
            for (r, &gz) in dz.iter().enumerate() {
                if gz == 0.0 {
                    continue;
                }
                self.bias.grad[r] += gz;
                let wx = &self.w_input.value[r * id..(r + 1) * id];
                let gwx = &mut self.w_input.grad[r * id..(r + 1) * id];
                for k in 0..id {
                    gwx[k] += gz * s.x[k];
                    dx[k] += gz * wx[k];
                }
                let wh = &self.w_hidden.value[r * hd..(r + 1) * hd];
                let gwh = &mut self.w_hidden.grad[r * hd..(r + 1) * hd];
                for k in 0..hd {
                    gwh[k] += gz * s.h_prev[k];
                    dh_prev[k] += gz * wh[k];
                }
            }
            dh = dh_prev;
        }
        d_inputs
    }
}

impl Module for Lstm {
    fn named_params(&self) -> Vec<(String, &Param)> {
        vec![
            ("w_input".into(), &self.w_input),
            ("w_hidden".into(), &self.w_hidden),
            ("bias".into(), &self.bias),
        ]
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![
            ("w_input".into(), &mut self.w_input),
            ("w_hidden".into(), &mut self.w_hidden),
            ("bias".into(), &mut self.bias),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_give_zero_state() {
        let l = Lstm::zeros(1, 25);
        let (h, _) = l.forward(&[0.3, -1.0, 2.0, 5.0]).unwrap();
        assert_eq!(h, vec![0.0; 25]);
        assert!(l.forward(&[]).is_err());
    }

    #[test]
    fn length_one_is_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = Lstm::new(2, 4, &mut rng);
        let (h_seq, _) = l.forward(&[0.5, -0.25]).unwrap();
        let (h_step, _) = l.step(&[0.5, -0.25], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h_seq, h_step);
        assert!(l.forward(&[0.5, -0.25, 1.0]).is_err());
    }

    #[test]
    fn bptt_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut l = Lstm::new(2, 3, &mut rng);
            for p in l.params_mut() {
                p.value.iter_mut().for_each(|v| *v = rng.gen_range(-0.7..0.7));
            }
            let xs: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss = |l: &Lstm, xs: &[f64]| {
                let (h, _) = l.forward(xs).unwrap();
                h.iter().zip(&c).map(|(h, c)| c * h).sum::<f64>()
            };
            let (_, cache) = l.forward(&xs).unwrap();
            let dx = l.backward(&cache, &c);
            let h = 1e-5;
            for pi in 0..3 {
                let n = l.params_mut()[pi].len();
                for j in 0..n {
                    let a = l.params_mut()[pi].grad[j];
                    let mut lp = l.clone();
                    lp.params_mut()[pi].value[j] += h;
                    let mut lm = l.clone();
                    lm.params_mut()[pi].value[j] -= h;
                    let fd = (loss(&lp, &xs) - loss(&lm, &xs)) / (2.0 * h);
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                    assert!(rel < 1e-4, "seed {seed} param {pi}[{j}]: {a} vs {fd}");
                }
            }
            for k in 0..xs.len() {
                let mut xp = xs.clone();
                xp[k] += h;
                let mut xm = xs.clone();
                xm[k] -= h;
                let fd = (loss(&l, &xp) - loss(&l, &xm)) / (2.0 * h);
                assert!((dx[k] - fd).abs() / dx[k].abs().max(fd.abs()).max(1e-6) < 1e-4);
            }
        }
    }
}
