use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::subset::{draw_sample, TrainingSubset};
use crate::channel::sigma_from_ebn0;
use crate::codec::Codebook;
use crate::decoders::NetworkModel;
use crate::neuralnet::{backward_and_step, Adam, AdamConfig};
use crate::{rng, Error, Result};

/// Everything besides the model that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSetup {
    /// Training Eb/N0 in dB; `None` trains without noise.
    pub rho_t_db: Option<f64>,
    pub batch_size: usize,
    /// Size of the sample pool; consumption beyond it wraps around.
    pub num_train_samples: usize,
    pub seed: u64,
}

/// Model plus optimiser state. Training randomness is derived from
/// `(setup.seed, step)`, so a checkpoint resumes bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: NetworkModel,
    pub adam: Adam<f32>,
}

impl Checkpoint {
    pub fn new(model: NetworkModel, adam: AdamConfig) -> Self {
        let adam = Adam::new(adam, &model.net);
        Checkpoint { model, adam }
    }

    /// Completed optimiser steps.
    pub fn step(&self) -> u64 {
        self.adam.step()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: u64,
    pub loss: f64,
}

/// Steps at which training progress is recorded: powers of ten and the final
/// step.
pub fn is_log_step(step: u64, last: u64) -> bool {
    if step == last {
        return true;
    }
    let mut p = 1;
    while p < step {
        p *= 10;
    }
    p == step
}

/// A fixed pool of `num_train_samples` training pairs, visited in order during
/// the first pass and in a fresh random order on every later pass.
///
/// Pair `q` is generated on demand from its own stream, so the pool is never
/// materialised and any position can be reached without replaying the ones
/// before it.
pub struct TrainingPool<'a> {
    subset: &'a TrainingSubset,
    book: &'a Codebook,
    sigma: f64,
    seed: u64,
    size: usize,
    order: Option<(u64, Vec<u32>)>,
    scratch: Vec<f64>,
}

impl<'a> TrainingPool<'a> {
    pub fn new(subset: &'a TrainingSubset, book: &'a Codebook, setup: &TrainSetup) -> Result<Self> {
        if setup.num_train_samples == 0 || setup.num_train_samples > u32::MAX as usize {
            return Err(Error::config(format!(
                "num_train_samples {} out of range",
                setup.num_train_samples
            )));
        }
        let sigma = match setup.rho_t_db {
            Some(db) => sigma_from_ebn0(db, book.code().rate())?,
            None => 0.0,
        };
        Ok(TrainingPool {
            subset,
            book,
            sigma,
            seed: setup.seed,
            size: setup.num_train_samples,
            order: None,
            scratch: Vec::new(),
        })
    }

    fn pool_index(&mut self, position: u64) -> u64 {
        let epoch = position / self.size as u64;
        let offset = (position % self.size as u64) as usize;
        if epoch == 0 {
            return offset as u64;
        }
        if self.order.as_ref().is_none_or(|(e, _)| *e != epoch) {
            let mut order: Vec<u32> = (0..self.size as u32).collect();
            order.shuffle(&mut rng::stream(
                self.seed,
                rng::domain::TRAIN_SHUFFLE,
                epoch,
            ));
            self.order = Some((epoch, order));
        }
        u64::from(self.order.as_ref().unwrap().1[offset])
    }

    /// The batch consumed by optimiser step `step` (0-based).
    pub fn batch(&mut self, step: u64, batch_size: usize) -> (Array2<f32>, Array2<f32>) {
        let (n, k) = (self.book.code().n(), self.book.code().k());
        let mut inputs = Array2::zeros((batch_size, n));
        let mut targets = Array2::zeros((batch_size, k));
        let first = step * batch_size as u64;
        for (row, (mut x, mut t)) in inputs
            .rows_mut()
            .into_iter()
            .zip(targets.rows_mut())
            .enumerate()
        {
            let q = self.pool_index(first + row as u64);
            let mut r = rng::stream(self.seed, rng::domain::TRAIN_POOL, q);
            draw_sample(
                self.subset,
                self.book,
                self.sigma,
                &mut r,
                x.as_slice_mut().unwrap(),
                t.as_slice_mut().unwrap(),
                &mut self.scratch,
            );
        }
        (inputs, targets)
    }
}

/// Advances `ckpt` to `until` steps. `on_log` runs after every log step (see
/// [`is_log_step`]) with the checkpoint as it stands.
///
/// On a non-finite loss or gradient the offending step is not applied; the
/// checkpoint keeps the last good state for diagnosis and the error is
/// returned.
pub fn train_from<F>(
    ckpt: &mut Checkpoint,
    subset: &TrainingSubset,
    book: &Codebook,
    setup: &TrainSetup,
    until: u64,
    mut on_log: F,
) -> Result<Vec<LossPoint>>
where
    F: FnMut(&Checkpoint) -> Result<()>,
{
    if setup.batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    let mut pool = TrainingPool::new(subset, book, setup)?;
    let mut trace = Vec::new();
    for step in ckpt.step()..until {
        let (x, y) = pool.batch(step, setup.batch_size);
        let mut dropout = rng::stream(setup.seed, rng::domain::DROPOUT, step);
        let report = backward_and_step(
            &mut ckpt.model.net,
            &mut ckpt.adam,
            x.view(),
            y.view(),
            &mut dropout,
        )?;
        if is_log_step(report.step_index, until) {
            trace.push(LossPoint {
                step: report.step_index,
                loss: report.loss,
            });
            on_log(ckpt)?;
        }
    }
    Ok(trace)
}

/// Trains a fresh or partially trained model for `steps` mini-batch steps.
pub fn train(
    model: NetworkModel,
    adam: AdamConfig,
    subset: &TrainingSubset,
    book: &Codebook,
    setup: &TrainSetup,
    steps: u64,
) -> Result<(NetworkModel, Vec<LossPoint>)> {
    let mut ckpt = Checkpoint::new(model, adam);
    let trace = train_from(&mut ckpt, subset, book, setup, steps, |_| Ok(()))?;
    Ok((ckpt.model, trace))
}
