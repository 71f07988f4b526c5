use rand::Rng;

use super::{Module, Param};
use crate::error::{Error, Result};

/// Affine map `y = W x + b` with `W` stored row-major as `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    /// Fan-in scaled uniform initialisation, zero bias.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Self {
            weight: Param::uniform(&[output, input], bound, rng),
            bias: Param::zeros(&[output]),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Param::zeros(&[output, input]),
            bias: Param::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn scale_weights(&mut self, factor: f64) {
        self.weight.value.iter_mut().for_each(|w| *w *= factor);
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "linear expects input width {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let n_in = self.input_dim();
        Ok(self
            .weight
            .value
            .chunks_exact(n_in)
            .zip(&self.bias.value)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
            .collect())
    }

    /// Accumulates `dW`, `db` and returns `dx` for upstream gradient `dy`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let n_in = self.input_dim();
        debug_assert_eq!(x.len(), n_in);
        debug_assert_eq!(dy.len(), self.output_dim());
        let mut dx = vec![0.0; n_in];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias.grad[o] += g;
            let row = &self.weight.value[o * n_in..(o + 1) * n_in];
            let grow = &mut self.weight.grad[o * n_in..(o + 1) * n_in];
            for i in 0..n_in {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        dx
    }
}

impl Module for Linear {
    fn named_params(&self) -> Vec<(String, &Param)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![
            ("weight".into(), &mut self.weight),
            ("bias".into(), &mut self.bias),
        ]
    }
}
