use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::AEModel;
use crate::error::{Error, Result};
use crate::num::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 20,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("Adam moments must lie in [0, 1) and eps be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean loss per snapshot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: Option<usize>,
}

pub struct Adam {
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
    t: i32,
}

impl Adam {
    pub fn new(shapes: &[DenseMatrix]) -> Self {
        let z: Vec<_> = shapes.iter().map(|w| DenseMatrix::zeros(w.rows(), w.cols())).collect();
        Self { m: z.clone(), v: z, t: 0 }
    }

    pub fn step(&mut self, weights: &mut [DenseMatrix], grads: &[DenseMatrix], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for ((w, g), (m, v)) in weights.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let it = w
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice().iter_mut()));
            for ((wi, gi), (mi, vi)) in it {
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
                *wi -= cfg.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + cfg.eps);
            }
        }
    }
}

/// Summed loss and gradient over a batch. Samples run in parallel; the sum
/// is taken in sample order so results do not depend on thread count.
pub fn batch_loss_and_grad(model: &AEModel, batch: &[&[f64]]) -> Result<(f64, Vec<DenseMatrix>)> {
    let parts = batch
        .par_iter()
        .map(|x| model.loss_and_grad(x))
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().ok_or_else(|| Error::Contract("empty batch".into()))?;
    for (l, g) in iter {
        loss += l;
        for (a, b) in grads.iter_mut().zip(&g) {
            a.axpy(1.0, b)?;
        }
    }
    Ok((loss, grads))
}

/// Mean loss per snapshot.
pub fn mean_loss(model: &AEModel, data: &[Vec<f64>]) -> Result<f64> {
    if data.is_empty() {
        return Ok(f64::NAN);
    }
    let losses = data.par_iter().map(|x| model.loss(x)).collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

/// Adam on shuffled mini-batches. The model ends with the parameters of the
/// epoch with the lowest validation loss (training loss when no validation
/// data is given).
pub fn train(model: &mut AEModel, train: &[Vec<f64>], val: &[Vec<f64>], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("no training snapshots".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.weights());
    let mut report = TrainReport::default();
    let mut best: Option<(f64, Vec<DenseMatrix>)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| train[i].as_slice()).collect();
            let (loss, grads) = batch_loss_and_grad(model, &batch)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NanLoss { epoch, batch: b });
            }
            epoch_loss += loss;
            adam.step(model.weights_mut(), &grads, cfg);
        }
        report.train_loss.push(epoch_loss / train.len() as f64);
        let score = if val.is_empty() {
            mean_loss(model, train)?
        } else {
            let v = mean_loss(model, val)?;
            report.val_loss.push(v);
            v
        };
        if !score.is_finite() {
            return Err(Error::NanLoss { epoch, batch: 0 });
        }
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, model.weights().to_vec()));
            report.best_epoch = Some(epoch);
        }
    }
    if let Some((_, w)) = best {
        model.weights_mut().clone_from_slice(&w);
    }
    Ok(report)
}
