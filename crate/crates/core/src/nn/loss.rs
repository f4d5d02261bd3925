use super::tensor::Tensor2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LossError {
    #[error("label {label} at row {row} is outside 0..{num_classes}")]
    InvalidLabel { row: usize, label: usize, num_classes: usize },
    #[error("{labels} labels for {rows} rows of logits")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("cross-entropy over zero rows")]
    Empty,
}

/// Row-wise softmax with the max subtracted first.
pub fn softmax_rows<T: Scalar>(logits: &Tensor2<T>) -> Tensor2<T> {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean negative log-likelihood of `labels` under the row softmax, and its
/// gradient with respect to the logits.
pub fn cross_entropy<T: Scalar>(
    logits: &Tensor2<T>,
    labels: &[usize],
) -> Result<(T, Tensor2<T>), LossError> {
    let (rows, classes) = logits.shape();
    if labels.len() != rows {
        return Err(LossError::LengthMismatch { rows, labels: labels.len() });
    }
    if rows == 0 {
        return Err(LossError::Empty);
    }
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(LossError::InvalidLabel { row, label, num_classes: classes });
    }
    let n = T::from_usize(rows).expect("row count fits the scalar");
    let mut grad = softmax_rows(logits);
    let mut loss = T::zero();
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let log_sum: T = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        loss += log_sum - row[label];
        grad[(i, label)] -= T::one();
    }
    for v in grad.as_mut_slice() {
        *v /= n;
    }
    Ok((loss / n, grad))
}
