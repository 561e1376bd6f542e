use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss, AdamConfig, AdamState, LossKind, Matrix, Network, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl TrainConfig {
    /// 10 epochs of 128-row mini-batches.
    pub fn new(loss: LossKind, seed: u64) -> Self {
        Self {
            epochs: 10,
            batch_size: 128,
            loss,
            seed,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Row-weighted mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

/// Mini-batch training with a per-epoch shuffle drawn from a stream seeded
/// by `cfg.seed`. Runs `epochs * ceil(N / batch_size)` Adam steps.
pub fn train<T: Scalar>(
    net: &mut Network<T>,
    inputs: &Matrix<T>,
    targets: &Matrix<T>,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    let n = inputs.rows();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    if targets.rows() != n {
        return Err(Error::Shape(format!("{n} inputs but {} targets", targets.rows())));
    }
    if targets.cols() != net.out_dim() || inputs.cols() != net.in_dim() {
        return Err(Error::Shape(format!(
            "network maps {} -> {}, data is {} -> {}",
            net.in_dim(),
            net.out_dim(),
            inputs.cols(),
            targets.cols()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Invalid("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(net, cfg.adam);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = inputs.gather_rows(chunk);
            let y = targets.gather_rows(chunk);
            let trace = net.forward(&x, true, &mut rng)?;
            let (value, grad) = loss(cfg.loss, trace.output(), &y)?;
            let grads = net.backward(&trace, &grad)?;
            state.step(net, &grads)?;
            epoch_total += value * chunk.len() as f64;
        }
        history.epoch_losses.push(epoch_total / n as f64);
    }
    history.steps = state.t;
    Ok(history)
}
