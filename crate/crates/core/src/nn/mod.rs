//! Minimal differentiable building blocks: affine layers, an LSTM cell,
//! Gaussian and categorical heads, and an adaptive-moment optimizer.
//!
//! Every layer exposes an explicit `backward` that accumulates parameter
//! gradients; there is no general autodiff graph.

pub mod adam;
pub mod gradcheck;
pub mod heads;
pub mod linear;
pub mod lstm;
pub mod mlp;
pub mod param;

pub use adam::{adam_update, Adam, StepOutcome};
pub use gradcheck::{blockwise_relative_error, central_difference, finite_diff_check, relative_error};
pub use heads::{gaussian_sample, normal_log_density, CategoricalHead, GaussianHead, LOG_STD_MAX, LOG_STD_MIN};
pub use linear::{affine_forward, Linear};
pub use lstm::{recurrent_step, LstmCache, LstmCell, LstmState};
pub use mlp::{Mlp, MlpCache};
pub use param::{ParamTensor, Parameterized};
