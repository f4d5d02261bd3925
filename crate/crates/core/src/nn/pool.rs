use super::tensor::{ShapeError, Tensor2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PoolError {
    #[error("segment {0} has no rows")]
    EmptySegment(usize),
    #[error("row {row} has segment id {id} but there are only {num_segments} segments")]
    SegmentOutOfRange { row: usize, id: usize, num_segments: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Result of a segment max-pool together with the winning row of every
/// output entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<T> {
    pub values: Tensor2<T>,
    /// `argmax[j * cols + k]` is the input row that supplied output `(j, k)`.
    pub argmax: Vec<usize>,
}

/// Column-wise maximum over the rows sharing a segment id. Ties go to the
/// lowest row index.
pub fn segment_max_pool<T: Scalar>(
    z: &Tensor2<T>,
    segment_ids: &[usize],
    num_segments: usize,
) -> Result<Pooled<T>, PoolError> {
    if segment_ids.len() != z.rows() {
        return Err(ShapeError::new("segment_max_pool", (segment_ids.len(), z.cols()), z.shape()).into());
    }
    let cols = z.cols();
    let mut values = Tensor2::zeros(num_segments, cols);
    let mut argmax = vec![usize::MAX; num_segments * cols];
    for (row, &id) in segment_ids.iter().enumerate() {
        if id >= num_segments {
            return Err(PoolError::SegmentOutOfRange { row, id, num_segments });
        }
        let src = z.row(row);
        let dst = values.row_mut(id);
        let arg = &mut argmax[id * cols..(id + 1) * cols];
        for k in 0..cols {
            if arg[k] == usize::MAX || src[k] > dst[k] {
                dst[k] = src[k];
                arg[k] = row;
            }
        }
    }
    if cols > 0 {
        if let Some(j) = (0..num_segments).find(|&j| argmax[j * cols] == usize::MAX) {
            return Err(PoolError::EmptySegment(j));
        }
    } else if let Some(j) = (0..num_segments).find(|j| !segment_ids.contains(j)) {
        return Err(PoolError::EmptySegment(j));
    }
    Ok(Pooled { values, argmax })
}

/// Routes each pooled gradient entry to the row that won the max.
pub fn segment_max_pool_backward<T: Scalar>(
    pooled_argmax: &[usize],
    d_pooled: &Tensor2<T>,
    num_rows: usize,
) -> Tensor2<T> {
    let cols = d_pooled.cols();
    let mut dz = Tensor2::zeros(num_rows, cols);
    for j in 0..d_pooled.rows() {
        for (k, &g) in d_pooled.row(j).iter().enumerate() {
            dz[(pooled_argmax[j * cols + k], k)] += g;
        }
    }
    dz
}
