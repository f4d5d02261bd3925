//! Face segmentation metrics pooled over every face of an evaluation set.

use serde::{Deserialize, Serialize};

use crate::nn::Tensor2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("label {label} is out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("logits have {actual} columns, the tally has {expected} classes")]
    ClassMismatch { expected: usize, actual: usize },
    #[error("no faces have been evaluated")]
    Empty,
}

/// Counts of (true class, predicted class) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTally {
    num_classes: usize,
    /// Row-major: `counts[truth * num_classes + predicted]`.
    counts: Vec<u64>,
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

impl ConfusionTally {
    pub fn new(num_classes: usize) -> Self {
        ConfusionTally { num_classes, counts: vec![0; num_classes * num_classes] }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.num_classes).map(|k| self.get(k, k)).sum()
    }

    /// Adds one face per row of `logits`, predicted as the row's argmax.
    pub fn accumulate<T: Scalar>(&mut self, logits: &Tensor2<T>, labels: &[usize]) -> Result<(), MetricsError> {
        if logits.cols() != self.num_classes {
            return Err(MetricsError::ClassMismatch { expected: self.num_classes, actual: logits.cols() });
        }
        let predictions: Vec<usize> = logits.iter_rows().map(argmax).collect();
        self.accumulate_predictions(&predictions, labels)
    }

    /// Adds one face per entry. Nothing is added if any entry is invalid.
    pub fn accumulate_predictions(&mut self, predictions: &[usize], labels: &[usize]) -> Result<(), MetricsError> {
        if predictions.len() != labels.len() {
            return Err(MetricsError::LengthMismatch { predictions: predictions.len(), labels: labels.len() });
        }
        let u = self.num_classes;
        if let Some(&label) = predictions.iter().chain(labels).find(|&&l| l >= u) {
            return Err(MetricsError::LabelOutOfRange { label, num_classes: u });
        }
        for (&p, &t) in predictions.iter().zip(labels) {
            self.counts[t * u + p] += 1;
        }
        Ok(())
    }

    /// Elementwise sum with another tally of the same size.
    pub fn merge(&mut self, other: &ConfusionTally) -> Result<(), MetricsError> {
        if other.num_classes != self.num_classes {
            return Err(MetricsError::ClassMismatch { expected: self.num_classes, actual: other.num_classes });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn accuracy(&self) -> Result<f64, MetricsError> {
        let total = self.total();
        if total == 0 {
            return Err(MetricsError::Empty);
        }
        Ok(self.correct() as f64 / total as f64)
    }

    /// TP/(TP+FP+FN) per class; `None` for a class that never occurs as
    /// either truth or prediction.
    pub fn iou(&self) -> Result<Vec<Option<f64>>, MetricsError> {
        if self.total() == 0 {
            return Err(MetricsError::Empty);
        }
        let u = self.num_classes;
        Ok((0..u)
            .map(|k| {
                let tp = self.get(k, k);
                let fn_: u64 = (0..u).filter(|&j| j != k).map(|j| self.get(k, j)).sum();
                let fp: u64 = (0..u).filter(|&j| j != k).map(|j| self.get(j, k)).sum();
                let denom = tp + fp + fn_;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect())
    }

    /// Mean of the defined per-class IoU values.
    pub fn mean_iou(&self) -> Result<f64, MetricsError> {
        let defined: Vec<f64> = self.iou()?.into_iter().flatten().collect();
        Ok(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    /// Absent when the class never occurs in truth or prediction.
    pub iou: Option<f64>,
    pub support: u64,
    pub predicted: u64,
}

/// Summary written by evaluation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub num_faces: u64,
    pub accuracy: f64,
    pub mean_iou: f64,
    pub classes: Vec<ClassReport>,
    pub confusion: Vec<Vec<u64>>,
}

impl EvaluationReport {
    /// `class_names` must have one entry per class.
    pub fn from_tally(tally: &ConfusionTally, class_names: &[&str]) -> Result<Self, MetricsError> {
        let u = tally.num_classes;
        if class_names.len() != u {
            return Err(MetricsError::ClassMismatch { expected: u, actual: class_names.len() });
        }
        let iou = tally.iou()?;
        Ok(EvaluationReport {
            num_faces: tally.total(),
            accuracy: tally.accuracy()?,
            mean_iou: tally.mean_iou()?,
            classes: (0..u)
                .map(|k| ClassReport {
                    class: class_names[k].to_string(),
                    iou: iou[k],
                    support: (0..u).map(|j| tally.get(k, j)).sum(),
                    predicted: (0..u).map(|j| tally.get(j, k)).sum(),
                })
                .collect(),
            confusion: (0..u).map(|t| (0..u).map(|p| tally.get(t, p)).collect()).collect(),
        })
    }
}
