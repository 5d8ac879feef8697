//! Molecule-difference VAE: encoder, sequential decoder, loss, training.

pub mod decoder;
pub mod encoder;
pub mod params;
pub mod train;

pub use decoder::{
    pair_loss, sample_decode, Counter, DecodeError, DecodeLimits, DecodeTrace, HeadAccuracy,
    LossParts, PairForward,
};
pub use encoder::LatentDiff;
pub use params::{HyperParams, ModelParams, TapeModel};
pub use train::{evaluate_accuracy, train, BatchLogRow, TrainError, TrainOutcome};
