//! Minimal reverse-mode autodiff, AMSGrad, reproducible RNG, Gaussian latent
//! helpers, and the checkpoint container.

pub mod checkpoint;
pub mod gradcheck;
pub mod optim;
pub mod rng;
pub mod tape;
pub mod vae;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{ParamStore, AMSGRAD_BETA1, AMSGRAD_BETA2, AMSGRAD_EPS};
pub use rng::Rng;
pub use tape::{Tape, TapeError, Tensor};
pub use vae::{kl_normal, reparam_sample, Gaussian};
