//! Peak-load forecasting from the last two minutes of per-second rates.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, AdamConfig, AdamState, Linear, Lstm, Module, Param, ParamFile};
use crate::workload::{history_window, smape, WorkloadTrace, HISTORY_LEN};

pub const LSTM_UNITS: usize = 25;

/// Anything that turns a `HISTORY_LEN`-second history into a peak forecast.
pub trait LoadForecaster: Send + Sync {
    fn predict_peak(&self, history: &[f64]) -> Result<f64>;
}

fn check_history(history: &[f64]) -> Result<()> {
    if history.len() != HISTORY_LEN {
        return Err(Error::invalid(format!(
            "history must hold {HISTORY_LEN} rates, got {}",
            history.len()
        )));
    }
    Ok(())
}

/// Baseline forecaster: the maximum of the most recent `window` seconds.
#[derive(Debug, Clone, Copy)]
pub struct RecentPeak {
    pub window: usize,
}

impl Default for RecentPeak {
    fn default() -> Self {
        Self { window: 20 }
    }
}

impl LoadForecaster for RecentPeak {
    fn predict_peak(&self, history: &[f64]) -> Result<f64> {
        check_history(history)?;
        let w = self.window.clamp(1, HISTORY_LEN);
        Ok(history[HISTORY_LEN - w..].iter().copied().fold(0.0, f64::max))
    }
}

/// 25-unit LSTM followed by a one-unit dense layer. Inputs and outputs are
/// divided by `scale` (the training-set maximum rate).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub lstm: Lstm,
    pub head: Linear,
    pub scale: f64,
}

impl Module for PredictorModel {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out: Vec<(String, &Param)> = self
            .lstm
            .named_params()
            .into_iter()
            .map(|(n, p)| (format!("lstm.{n}"), p))
            .collect();
        out.extend(self.head.named_params().into_iter().map(|(n, p)| (format!("head.{n}"), p)));
        out
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out: Vec<(String, &mut Param)> = self
            .lstm
            .named_params_mut()
            .into_iter()
            .map(|(n, p)| (format!("lstm.{n}"), p))
            .collect();
        out.extend(
            self.head
                .named_params_mut()
                .into_iter()
                .map(|(n, p)| (format!("head.{n}"), p)),
        );
        out
    }
}

impl PredictorModel {
    pub fn zeros() -> Self {
        Self {
            lstm: Lstm::zeros(1, LSTM_UNITS),
            head: Linear::zeros(LSTM_UNITS, 1),
            scale: 1.0,
        }
    }

    pub fn new(seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            lstm: Lstm::new(1, LSTM_UNITS, &mut rng),
            head: Linear::new(LSTM_UNITS, 1, &mut rng),
            scale,
        }
    }

    fn normalized(&self, history: &[f64]) -> Vec<f64> {
        history.iter().map(|r| r / self.scale).collect()
    }

    /// Raw normalized output before clamping.
    fn forward_raw(&self, history: &[f64]) -> Result<f64> {
        let (h, _) = self.lstm.forward(&self.normalized(history))?;
        Ok(self.head.forward(&h)?[0])
    }

    pub fn predict_peak(&self, history: &[f64]) -> Result<f64> {
        check_history(history)?;
        Ok((self.forward_raw(history)? * self.scale).max(0.0))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({ "hidden": LSTM_UNITS, "scale": self.scale });
        ParamFile::from_module("predictor", meta, self).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = ParamFile::load(path)?;
        f.check_header("predictor")?;
        let scale = f.meta["scale"]
            .as_f64()
            .filter(|s| *s > 0.0)
            .ok_or_else(|| Error::Serde("predictor file lacks a positive scale".into()))?;
        let mut m = Self::zeros();
        m.scale = scale;
        f.load_into(&mut m)?;
        Ok(m)
    }

    /// Squared error on one normalized sample; accumulates gradients.
    fn accumulate(&mut self, history: &[f64], target: f64, weight: f64) -> Result<f64> {
        let (h, cache) = self.lstm.forward(&self.normalized(history))?;
        let y = self.head.forward(&h)?[0];
        let err = y - target / self.scale;
        let dh = self.head.backward(&h, &[2.0 * err * weight]);
        self.lstm.backward(&cache, &dh);
        Ok(err * err)
    }
}

impl LoadForecaster for PredictorModel {
    fn predict_peak(&self, history: &[f64]) -> Result<f64> {
        PredictorModel::predict_peak(self, history)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Seconds between consecutive training windows.
    pub stride: usize,
    pub validation_fraction: f64,
    pub max_grad_norm: f64,
}

impl Default for PredictorHyper {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            stride: 5,
            validation_fraction: 0.1,
            max_grad_norm: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorReport {
    pub train_samples: usize,
    pub validation_samples: usize,
    pub epochs: usize,
    pub scale: f64,
    /// Mean squared error on normalized targets after each epoch.
    pub train_loss: Vec<f64>,
    pub final_train_loss: f64,
    pub final_validation_loss: f64,
    pub validation_smape: f64,
}

impl PredictorReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `(history_window(t), max(rates[t+1..=t+20]))` pairs every `stride` seconds.
pub fn training_pairs(traces: &[WorkloadTrace], stride: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    for tr in traces {
        let mut t = 0;
        while let Some(target) = tr.future_peak(t) {
            out.push((history_window(tr, t)?, target));
            t += stride;
        }
    }
    Ok(out)
}

pub fn evaluate_smape(model: &PredictorModel, pairs: &[(Vec<f64>, f64)]) -> Result<f64> {
    let mut pred = Vec::with_capacity(pairs.len());
    let mut actual = Vec::with_capacity(pairs.len());
    for (h, y) in pairs {
        pred.push(model.predict_peak(h)?);
        actual.push(*y);
    }
    smape(&pred, &actual)
}

pub fn train_predictor(
    traces: &[WorkloadTrace],
    hyper: &PredictorHyper,
) -> Result<(PredictorModel, PredictorReport)> {
    if hyper.epochs == 0 || hyper.batch_size == 0 || !(0.0..1.0).contains(&hyper.validation_fraction)
    {
        return Err(Error::invalid("predictor needs epochs >= 1, batch >= 1, val fraction in [0,1)"));
    }
    let mut pairs = training_pairs(traces, hyper.stride)?;
    if pairs.len() < 2 {
        return Err(Error::invalid(format!(
            "traces yield {} training windows; need traces longer than {} s",
            pairs.len(),
            crate::workload::HORIZON + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    pairs.shuffle(&mut rng);
    let n_val = ((pairs.len() as f64 * hyper.validation_fraction).round() as usize).min(pairs.len() - 1);
    let val = pairs.split_off(pairs.len() - n_val);
    let train = pairs;

    let scale = traces
        .iter()
        .map(WorkloadTrace::max_rate)
        .fold(0.0, f64::max)
        .max(1e-9);
    let mut model = PredictorModel::new(hyper.seed, scale);
    let mut adam = AdamState::new(AdamConfig::with_lr(hyper.learning_rate), &model.params_mut());

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(hyper.batch_size) {
            let w = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (h, y) = &train[i];
                total += model.accumulate(h, *y, w)?;
            }
            let mut params = model.params_mut();
            clip_grad_norm(&mut params, hyper.max_grad_norm);
            adam.step(&mut params)?;
        }
        curve.push(total / train.len() as f64);
    }

    let mse = |set: &[(Vec<f64>, f64)]| -> Result<f64> {
        if set.is_empty() {
            return Ok(f64::NAN);
        }
        let mut s = 0.0;
        for (h, y) in set {
            let e = model.forward_raw(h)? - y / scale;
            s += e * e;
        }
        Ok(s / set.len() as f64)
    };
    let report = PredictorReport {
        train_samples: train.len(),
        validation_samples: val.len(),
        epochs: hyper.epochs,
        scale,
        final_train_loss: mse(&train)?,
        final_validation_loss: mse(&val)?,
        validation_smape: if val.is_empty() {
            f64::NAN
        } else {
            evaluate_smape(&model, &val)?
        },
        train_loss: curve,
    };
    Ok((model, report))
}
