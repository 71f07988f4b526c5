use rand::Rng;

use super::{Linear, Module, Param};
use crate::error::{Error, Result};

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

/// `y = x + fc2(relu(fc1(x)))`, width preserving.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone)]
pub struct ResidualCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
}

impl ResidualBlock {
    pub fn new<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Self {
        Self {
            fc1: Linear::new(width, width, rng),
            fc2: Linear::new(width, width, rng),
        }
    }

    pub fn zeros(width: usize) -> Self {
        Self {
            fc1: Linear::zeros(width, width),
            fc2: Linear::zeros(width, width),
        }
    }

    pub fn width(&self) -> usize {
        self.fc1.input_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ResidualCache)> {
        if x.len() != self.width() || self.fc2.output_dim() != self.width() {
            return Err(Error::shape(format!(
                "residual block of width {} given input of width {}",
                self.width(),
                x.len()
            )));
        }
        let pre = self.fc1.forward(x)?;
        let hidden = relu(&pre);
        let f = self.fc2.forward(&hidden)?;
        let y = x.iter().zip(&f).map(|(a, b)| a + b).collect();
        Ok((
            y,
            ResidualCache {
                input: x.to_vec(),
                pre,
                hidden,
            },
        ))
    }

    pub fn backward(&mut self, cache: &ResidualCache, dy: &[f64]) -> Vec<f64> {
        let dh = self.fc2.backward(&cache.hidden, dy);
        let dpre: Vec<f64> = dh
            .iter()
            .zip(&cache.pre)
            .map(|(g, p)| if *p > 0.0 { *g } else { 0.0 })
            .collect();
        let dx_inner = self.fc1.backward(&cache.input, &dpre);
        dy.iter().zip(&dx_inner).map(|(a, b)| a + b).collect()
    }
}

impl Module for ResidualBlock {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = Vec::new();
        for (n, p) in self.fc1.named_params() {
            out.push((format!("fc1.{n}"), p));
        }
        for (n, p) in self.fc2.named_params() {
            out.push((format!("fc2.{n}"), p));
        }
        out
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = Vec::new();
        for (n, p) in self.fc1.named_params_mut() {
            out.push((format!("fc1.{n}"), p));
        }
        for (n, p) in self.fc2.named_params_mut() {
            out.push((format!("fc2.{n}"), p));
        }
        out
    }
}
