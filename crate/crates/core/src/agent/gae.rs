use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    /// Generalized advantage estimates before normalization.
    pub raw: Vec<f64>,
    /// `raw + V(s_t)`.
    pub targets: Vec<f64>,
}

/// GAE over one trajectory. `values` holds `V(s_0..s_T)`, one more entry
/// than `rewards`; the last entry is the bootstrap value (0 if terminal).
pub fn compute_advantages(
    rewards: &[f64],
    values: &[f64],
    discount: f64,
    gae_lambda: f64,
) -> Result<Advantages> {
    if values.len() != rewards.len() + 1 {
        return Err(Error::shape(format!(
            "{} rewards need {} values, got {}",
            rewards.len(),
            rewards.len() + 1,
            values.len()
        )));
    }
    let mut raw = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + discount * values[t + 1] - values[t];
        acc = delta + discount * gae_lambda * acc;
        raw[t] = acc;
    }
    let targets = raw.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(Advantages { raw, targets })
}

/// Zero mean, unit variance. A constant input maps to all zeros.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}
