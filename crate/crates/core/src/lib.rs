pub mod agent;
pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod pipeline;
pub mod predictor;
pub mod workload;

pub use error::{Error, Result};
