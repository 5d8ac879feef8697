//! Training loop: shuffled minibatches, AMSGrad, and the stepped KL weight.

use thiserror::Error;

use crate::chem::tree::NodeVocabulary;
use crate::pairs::TrainingPair;
use crate::tensor::optim::{AMSGRAD_BETA1, AMSGRAD_BETA2, AMSGRAD_EPS};
use crate::tensor::rng::Rng;
use crate::tensor::tape::Tape;

use super::decoder::{pair_loss, DecodeError, HeadAccuracy, LossParts};
use super::params::{HyperParams, ModelParams};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("forward pass failed: {0}")]
    Decode(#[from] DecodeError),
    #[error("loss became non-finite at epoch {epoch} batch {batch} (pair {pair})")]
    NonFinite {
        epoch: usize,
        batch: usize,
        pair: usize,
    },
    #[error("checkpoint callback: {0}")]
    Callback(String),
}

#[derive(Debug, Clone, Copy)]
pub struct BatchLogRow {
    pub epoch: usize,
    pub batch: usize,
    pub beta: f64,
    pub parts: LossParts,
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<BatchLogRow>,
}

/// Trains in place from `start_epoch` (1-based; pass >1 to resume a loaded
/// checkpoint bit-exactly). Shuffling and reparameterization noise derive
/// from (seed, epoch, batch, pair), so interrupted and straight-through runs
/// agree. `on_epoch` fires after each epoch for checkpointing.
pub fn train(
    pairs: &[TrainingPair],
    vocab: &NodeVocabulary,
    hp: &HyperParams,
    seed: u64,
    start_epoch: usize,
    mut params: ModelParams,
    mut on_epoch: impl FnMut(usize, &ModelParams) -> Result<(), String>,
) -> Result<TrainOutcome, TrainError> {
    let mut log = Vec::new();
    if pairs.is_empty() {
        return Ok(TrainOutcome { params, log });
    }
    let batches_per_epoch = pairs.len().div_ceil(hp.batch);

    for epoch in start_epoch..=hp.epochs {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        Rng::derive(seed, &[epoch as u64]).shuffle(&mut order);

        for (batch_idx, chunk) in order.chunks(hp.batch).enumerate() {
            let post_batches = if epoch <= 1 {
                0
            } else {
                (epoch - 2) * batches_per_epoch + batch_idx
            };
            let beta = hp.beta_at(epoch, post_batches);

            params.store.zero_grad();
            let mut batch_parts = LossParts::default();
            let scale = 1.0 / chunk.len() as f64;
            for &pair_idx in chunk {
                let tape = Tape::new();
                let tm = params.on_tape(&tape);
                let mut rng = Rng::derive(seed, &[
                    0x7261696e,
                    epoch as u64,
                    batch_idx as u64,
                    pair_idx as u64,
                ]);
                let fwd = pair_loss(&tm, vocab, &pairs[pair_idx], beta, &mut rng, false)?;
                if !fwd.parts.total.is_finite() {
                    return Err(TrainError::NonFinite {
                        epoch,
                        batch: batch_idx,
                        pair: pair_idx,
                    });
                }
                tape.backward(fwd.loss).map_err(DecodeError::Tape)?;
                params.harvest_grads(&tape, &tm, scale);
                accumulate(&mut batch_parts, &fwd.parts, scale);
            }
            params
                .store
                .amsgrad_step(hp.lr, AMSGRAD_BETA1, AMSGRAD_BETA2, AMSGRAD_EPS);
            log.push(BatchLogRow {
                epoch,
                batch: batch_idx,
                beta,
                parts: batch_parts,
            });
        }
        on_epoch(epoch, &params).map_err(TrainError::Callback)?;
    }
    Ok(TrainOutcome { params, log })
}

fn accumulate(into: &mut LossParts, from: &LossParts, scale: f64) {
    into.total += scale * from.total;
    into.kl += scale * from.kl;
    into.dsp += scale * from.dsp;
    into.rfp += scale * from.rfp;
    into.fc += scale * from.fc;
    into.fl += scale * from.fl;
    into.gp += scale * from.gp;
    into.gc += scale * from.gc;
}

/// Teacher-forced per-step accuracy over a pair set, evaluated at the
/// posterior mean (no sampling noise).
pub fn evaluate_accuracy(
    params: &ModelParams,
    vocab: &NodeVocabulary,
    pairs: &[TrainingPair],
) -> Result<HeadAccuracy, DecodeError> {
    let mut total = HeadAccuracy::default();
    for pair in pairs {
        let tape = Tape::new();
        let tm = params.on_tape(&tape);
        let mut rng = Rng::new(0);
        let fwd = pair_loss(&tm, vocab, pair, 0.0, &mut rng, true)?;
        total.merge(&fwd.acc);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::molecule::Molecule;
    use crate::chem::parse::parse_smiles;
    use crate::pairs::extract::{extract_pairs, ExtractConfig};
    use crate::props::LogpScorer;

    fn toy_setup() -> (Vec<TrainingPair>, NodeVocabulary, HyperParams) {
        let mols: Vec<Molecule> = ["CCCCCO", "CCCCCCl", "CCCCCN", "CCCCC"]
            .iter()
            .map(|s| parse_smiles(s).unwrap())
            .collect();
        let vocab = NodeVocabulary::from_corpus(&mols).unwrap();
        let cfg = ExtractConfig {
            sim_min: 0.3,
            delta_min: -100.0,
            node_cap: 40,
        };
        let (pairs, _) = extract_pairs(&mols, &vocab, &LogpScorer, &cfg).unwrap();
        let hp = HyperParams {
            hidden: 8,
            z_dim: 4,
            t_a: 2,
            t_n: 2,
            batch: 4,
            epochs: 3,
            lr: 0.01,
            ..HyperParams::default()
        };
        (pairs, vocab, hp)
    }

    #[test]
    fn empty_training_is_a_noop() {
        let (_, vocab, hp) = toy_setup();
        let params = ModelParams::init(&hp, vocab.len(), &mut Rng::new(1));
        let before = params.store.clone();
        let out = train(&[], &vocab, &hp, 7, 1, params, |_, _| Ok(())).unwrap();
        assert_eq!(out.params.store, before);
        assert!(out.log.is_empty());
    }

    #[test]
    fn loss_decreases_on_toy_pairs() {
        let (pairs, vocab, hp) = toy_setup();
        let params = ModelParams::init(&hp, vocab.len(), &mut Rng::new(1));
        let out = train(&pairs, &vocab, &hp, 7, 1, params, |_, _| Ok(())).unwrap();
        let first = out.log.first().unwrap().parts.total;
        let last = out.log.last().unwrap().parts.total;
        assert!(
            last < first,
            "training did not reduce the loss: {first} -> {last}"
        );
    }

    #[test]
    fn training_is_seed_deterministic_and_resumable() {
        let (pairs, vocab, hp) = toy_setup();
        let init = ModelParams::init(&hp, vocab.len(), &mut Rng::new(2));

        let full = train(&pairs, &vocab, &hp, 9, 1, init.clone(), |_, _| Ok(())).unwrap();

        // Stop after epoch 2, then resume into epoch 3.
        let mut hp2 = hp.clone();
        hp2.epochs = 2;
        let half = train(&pairs, &vocab, &hp2, 9, 1, init.clone(), |_, _| Ok(())).unwrap();
        let resumed = train(&pairs, &vocab, &hp, 9, 3, half.params, |_, _| Ok(())).unwrap();

        for name in full.params.store.names() {
            let a = &full.params.store.get(name).data;
            let b = &resumed.params.store.get(name).data;
            assert_eq!(a, b, "resume diverged at {name}");
        }
    }

    #[test]
    fn beta_schedule_logged() {
        let (pairs, vocab, mut hp) = toy_setup();
        hp.epochs = 3;
        hp.beta_every = 1; // step every post-epoch-1 batch to see movement
        let params = ModelParams::init(&hp, vocab.len(), &mut Rng::new(3));
        let out = train(&pairs, &vocab, &hp, 11, 1, params, |_, _| Ok(())).unwrap();
        for row in &out.log {
            let expect = if row.epoch == 1 {
                hp.beta_init
            } else {
                let bpe = pairs.len().div_ceil(hp.batch);
                let post = (row.epoch - 2) * bpe + row.batch;
                (hp.beta_init + hp.beta_step * post as f64).min(hp.beta_cap)
            };
            assert_eq!(row.beta, expect);
        }
    }
}
