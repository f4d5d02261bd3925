//! Minibatch training with Adam and best-checkpoint selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_batches, Batch, DataError, SolidRecord};
use crate::features::{encode_coedges, encode_edges, encode_faces, Standardizer};
use crate::metrics::{ConfusionTally, MetricsError};
use crate::model::{BRepNetModel, ModelError};
use crate::nn::{cross_entropy, Adam, AdamConfig, ShapeError, Tensor2};
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("optimizer: {0}")]
    Optimizer(#[from] ShapeError),
    #[error("the training set is empty")]
    NoTrainingData,
    #[error("solid {0} has no face labels")]
    Unlabelled(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Approximate number of faces per minibatch.
    pub face_budget: usize,
    pub adam: AdamConfig,
    /// Seeds the batch order; epoch `k` shuffles with `seed + k`.
    pub seed: u64,
    /// Standardize one-hot and flag columns too.
    pub scale_flags: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, face_budget: 1000, adam: AdamConfig::default(), seed: 0, scale_flags: true }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// Starts at 1.
    pub epoch: usize,
    /// Face-weighted mean of the minibatch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    /// Whether this epoch produced a new best checkpoint.
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Weights with the lowest validation loss (training loss when there is
    /// no validation set). The initial weights if no epoch ran.
    pub best: BRepNetModel<T>,
    pub best_epoch: Option<usize>,
    /// Weights after the last epoch.
    pub last: BRepNetModel<T>,
    pub log: Vec<EpochLog>,
}

/// Fits a standardizer on the encoded features of `records`.
pub fn fit_standardizer(records: &[SolidRecord], scale_flags: bool) -> Result<Standardizer, DataError> {
    let encoded: Vec<(Tensor2<f64>, Tensor2<f64>, Tensor2<f64>)> = records
        .iter()
        .map(|r| (encode_faces(&r.faces), encode_edges(&r.edges), encode_coedges(&r.coedges)))
        .collect();
    Ok(Standardizer::fit(encoded.iter().map(|(f, e, c)| (f, e, c)), scale_flags)?)
}

/// Pooled loss and confusion counts of a model over a set of batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub tally: ConfusionTally,
}

fn batch_labels<T>(batch: &Batch<T>) -> Result<&[usize], TrainError> {
    batch.labels.as_deref().ok_or_else(|| TrainError::Unlabelled(batch.solid_ids.join(",")))
}

/// Evaluates labelled batches concurrently. The result does not depend on
/// the number of threads.
pub fn evaluate<T: Scalar>(model: &BRepNetModel<T>, batches: &[Batch<T>]) -> Result<Evaluation, TrainError> {
    let parts: Vec<Result<(f64, usize, ConfusionTally), TrainError>> = batches
        .par_iter()
        .map(|batch| {
            let labels = batch_labels(batch)?;
            let logits = model.classify(batch.input())?;
            let (loss, _) = cross_entropy(&logits, labels).map_err(ModelError::from)?;
            let mut tally = ConfusionTally::new(model.config.num_classes);
            tally.accumulate(&logits, labels)?;
            Ok((loss.to_f64_lossy(), labels.len(), tally))
        })
        .collect();
    let mut tally = ConfusionTally::new(model.config.num_classes);
    let (mut loss_sum, mut faces) = (0.0, 0usize);
    for part in parts {
        let (loss, n, t) = part?;
        loss_sum += loss * n as f64;
        faces += n;
        tally.merge(&t)?;
    }
    if faces == 0 {
        return Err(MetricsError::Empty.into());
    }
    Ok(Evaluation { loss: loss_sum / faces as f64, tally })
}

/// Trains `model` on `train`, selecting the checkpoint with the lowest
/// validation loss.
///
/// If the model has no standardizer one is fit on `train` and attached.
/// `on_epoch` runs after every epoch with the log line and the current
/// weights.
pub fn train<T: Scalar>(
    mut model: BRepNetModel<T>,
    train: &[SolidRecord],
    validation: &[SolidRecord],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, &BRepNetModel<T>),
) -> Result<TrainOutcome<T>, TrainError> {
    if train.is_empty() {
        return Err(TrainError::NoTrainingData);
    }
    if let Some(r) = train.iter().chain(validation).find(|r| r.labels.is_none()) {
        return Err(TrainError::Unlabelled(r.id.clone()));
    }
    if model.standardizer.is_none() {
        model.standardizer = Some(fit_standardizer(train, config.scale_flags)?);
    }
    let standardizer = model.standardizer.clone();
    let val_batches: Vec<Batch<T>> = make_batches(validation, config.face_budget, config.seed, standardizer.as_ref())?;

    let mut optimizer = Adam::new(config.adam);
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = None;
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let seed = config.seed.wrapping_add(epoch as u64);
        let batches: Vec<Batch<T>> = make_batches(train, config.face_budget, seed, standardizer.as_ref())?;
        let (mut loss_sum, mut faces) = (0.0, 0usize);
        for batch in &batches {
            let labels = batch_labels(batch)?;
            let (loss, grads) = model.loss_and_grads(batch.input(), labels)?;
            loss_sum += loss.to_f64_lossy() * labels.len() as f64;
            faces += labels.len();
            optimizer.step(&mut model.param_blocks_mut(), &grads.blocks())?;
        }
        let train_loss = loss_sum / faces as f64;
        let (val_loss, val_accuracy) = if val_batches.is_empty() {
            (None, None)
        } else {
            let eval = evaluate(&model, &val_batches)?;
            (Some(eval.loss), Some(eval.tally.accuracy()?))
        };
        let score = val_loss.unwrap_or(train_loss);
        let improved = score < best_loss;
        if improved {
            best_loss = score;
            best_epoch = Some(epoch);
            best = model.clone();
        }
        let entry = EpochLog { epoch, train_loss, val_loss, val_accuracy, improved };
        on_epoch(&entry, &model);
        log.push(entry);
    }
    Ok(TrainOutcome { best, best_epoch, last: model, log })
}
