//! Mini-batch training loops for the sequence model and the MLP.
//!
//! Both loops shuffle with a per-epoch derived seed, walk mini-batches in
//! order (the final partial batch is trained, not dropped), and record one
//! mean loss per epoch. Everything is deterministic given the seed.

use crate::error::{Error, Result};
use crate::neural::adam::{AdamConfig, AdamState};
use crate::neural::cnn_lstm::TrainedModel;
use crate::neural::mlp::MlpModel;
use crate::rng::Rng;
use crate::textprep::TokenSequence;
use crate::vectorize::SparseVector;

/// Knobs shared by both training loops. Defaults follow the evaluation
/// protocol: 10 epochs, batch size 32.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            seed,
            adam: AdamConfig::default(),
        }
    }
}

/// Train the CNN-LSTM on encoded sequences and class indices.
pub fn train(
    mut model: TrainedModel,
    data: &[TokenSequence],
    targets: &[usize],
    config: TrainConfig,
) -> Result<TrainedModel> {
    if data.is_empty() {
        return Err(Error::Model("cannot train on an empty corpus".into()));
    }
    if data.len() != targets.len() {
        return Err(Error::Model("data/targets length mismatch".into()));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Model("epochs and batch size must be >= 1".into()));
    }

    let mut adam = AdamState::new(config.adam, &model.params);
    let mut dropout_rng = Rng::derived(config.seed, "neural.train.dropout", 0);
    let mut loss_history = Vec::with_capacity(config.epochs);
    let n = data.len();

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        Rng::derived(config.seed, "neural.train.shuffle", epoch as u64).shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<TokenSequence> = chunk.iter().map(|&i| data[i].clone()).collect();
            let batch_targets: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grads) = model.loss_and_grads_inner(
                &batch,
                &batch_targets,
                if model.spec.dropout_rate > 0.0 {
                    Some(&mut dropout_rng)
                } else {
                    None
                },
            )?;
            adam.step(&mut model.params, &grads);
            epoch_loss += loss * chunk.len() as f64;
        }
        loss_history.push(epoch_loss / n as f64);
    }

    model.meta.seed = config.seed;
    model.meta.epochs = config.epochs;
    model.meta.loss_history = loss_history;
    Ok(model)
}

/// Train the MLP baseline on sparse feature vectors.
pub fn train_mlp(
    mut model: MlpModel,
    data: &[SparseVector],
    targets: &[usize],
    config: TrainConfig,
) -> Result<MlpModel> {
    if data.is_empty() {
        return Err(Error::Model("cannot train on an empty corpus".into()));
    }
    if data.len() != targets.len() {
        return Err(Error::Model("data/targets length mismatch".into()));
    }

    let mut adam = AdamState::new(config.adam, &model.params);
    let mut loss_history = Vec::with_capacity(config.epochs);
    let n = data.len();

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        Rng::derived(config.seed, "neural.train.shuffle", epoch as u64).shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&SparseVector> = chunk.iter().map(|&i| &data[i]).collect();
            let batch_targets: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grads) = model.loss_and_grads(&batch, &batch_targets)?;
            adam.step(&mut model.params, &grads);
            epoch_loss += loss * chunk.len() as f64;
        }
        loss_history.push(epoch_loss / n as f64);
    }

    model.meta.seed = config.seed;
    model.meta.epochs = config.epochs;
    model.meta.loss_history = loss_history;
    Ok(model)
}
