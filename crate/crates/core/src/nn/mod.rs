//! A small dense neural-network kernel with hand-written backward passes.
//!
//! Every layer exposes a `forward` that returns whatever the backward pass
//! needs, and a `backward` that accumulates parameter gradients and returns
//! the gradient with respect to its input. There is no autodiff graph.

mod adam;
mod categorical;
mod io;
mod linear;
mod lstm;
mod param;
mod residual;

pub use adam::{clip_grad_norm, AdamConfig, AdamState};
pub use categorical::{argmax, entropy, log_softmax, sample_index, softmax};
pub use io::{ParamFile, TensorRecord, PARAM_FORMAT, PARAM_VERSION};
pub use linear::Linear;
pub use lstm::{Lstm, LstmCache};
pub use param::{Module, Param};
pub use residual::{relu, ResidualBlock, ResidualCache};
