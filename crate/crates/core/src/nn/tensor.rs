use std::fmt;
use std::ops::Range;

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Tensor2<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
pub struct ShapeError {
    pub op: &'static str,
    pub expected: (usize, usize),
    pub actual: (usize, usize),
}

impl ShapeError {
    pub fn new(op: &'static str, expected: (usize, usize), actual: (usize, usize)) -> Self {
        Self { op, expected, actual }
    }
}

impl<T: Scalar> Tensor2<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, ShapeError> {
        if data.len() != rows * cols {
            return Err(ShapeError::new("from_vec", (rows, cols), (data.len(), 1)));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self, ShapeError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(ShapeError::new("from_rows", (i, cols), (i, row.len())));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_f64_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ShapeError> {
        let converted: Vec<Vec<T>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&v| T::of_f64(v)).collect())
            .collect();
        Self::from_rows(&converted)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t[(i, i)] = T::one();
        }
        t
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_slice_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact panics on zero width
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Copy of the columns in `range`.
    pub fn column_block(&self, range: Range<usize>) -> Tensor2<T> {
        assert!(range.end <= self.cols, "column block out of range");
        let width = range.len();
        let mut data = Vec::with_capacity(self.rows * width);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[range.clone()]);
        }
        Tensor2 { rows: self.rows, cols: width, data }
    }

    /// Writes `block` into the columns starting at `start`.
    pub fn set_column_block(&mut self, start: usize, block: &Tensor2<T>) {
        assert_eq!(block.rows, self.rows);
        assert!(start + block.cols <= self.cols);
        for i in 0..self.rows {
            self.row_mut(i)[start..start + block.cols].copy_from_slice(block.row(i));
        }
    }

    /// Stacks matrices vertically. All inputs must share a width.
    pub fn vstack(parts: &[&Tensor2<T>]) -> Result<Tensor2<T>, ShapeError> {
        let cols = parts.first().map_or(0, |p| p.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(ShapeError::new("vstack", (p.rows, cols), p.shape()));
            }
            data.extend_from_slice(&p.data);
            rows += p.rows;
        }
        Ok(Tensor2 { rows, cols, data })
    }

    /// Rows `range` as a new matrix.
    pub fn row_block(&self, range: Range<usize>) -> Tensor2<T> {
        Tensor2 {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Tensor2<T>) -> Result<Tensor2<T>, ShapeError> {
        if self.cols != rhs.rows {
            return Err(ShapeError::new("matmul", (self.cols, rhs.cols), rhs.shape()));
        }
        let mut out = Tensor2::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                if aik == T::zero() {
                    continue;
                }
                for (oj, &bkj) in o.iter_mut().zip(rhs.row(k)) {
                    *oj += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs`, without materializing the transpose.
    pub fn transpose_matmul(&self, rhs: &Tensor2<T>) -> Result<Tensor2<T>, ShapeError> {
        if self.rows != rhs.rows {
            return Err(ShapeError::new("transpose_matmul", (self.rows, rhs.cols), rhs.shape()));
        }
        let mut out = Tensor2::zeros(self.cols, rhs.cols);
        for i in 0..self.rows {
            let b = rhs.row(i);
            for (k, &aik) in self.row(i).iter().enumerate() {
                if aik == T::zero() {
                    continue;
                }
                for (oj, &bij) in out.row_mut(k).iter_mut().zip(b) {
                    *oj += aik * bij;
                }
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ`.
    pub fn matmul_transpose(&self, rhs: &Tensor2<T>) -> Result<Tensor2<T>, ShapeError> {
        if self.cols != rhs.cols {
            return Err(ShapeError::new("matmul_transpose", (rhs.rows, self.cols), rhs.shape()));
        }
        let mut out = Tensor2::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for k in 0..rhs.rows {
                out.data[i * rhs.rows + k] = dot(a, rhs.row(k));
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Tensor2<T> {
        let mut out = Tensor2::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor2<T> {
        Tensor2 { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, factor: T) -> Tensor2<T> {
        self.map(|v| v * factor)
    }

    /// Sum of elementwise products.
    pub fn frobenius_dot(&self, other: &Tensor2<T>) -> T {
        assert_eq!(self.shape(), other.shape());
        dot(&self.data, &other.data)
    }

    pub fn max_abs_diff(&self, other: &Tensor2<T>) -> T {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |m, d| if d > m { d } else { m })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor2<U> {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::of_f64(v.to_f64_lossy())).collect(),
        }
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

impl<T> std::ops::Index<(usize, usize)> for Tensor2<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Tensor2<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Tensor2 {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?},", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree_with_explicit_transpose() {
        let a = Tensor2::<f64>::from_f64_rows(&[[1.0, 2.0, 0.0], [-1.0, 0.5, 3.0]]).unwrap();
        let b = Tensor2::<f64>::from_f64_rows(&[[2.0, 1.0], [0.0, -1.0], [4.0, 1.5]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.as_slice(), &[2.0, -1.0, 10.0, 3.0]);
        let c = Tensor2::<f64>::from_f64_rows(&[[1.0, 1.0], [2.0, -3.0]]).unwrap();
        assert_eq!(a.transpose_matmul(&c).unwrap(), a.transpose().matmul(&c).unwrap());
        assert_eq!(ab.matmul_transpose(&c).unwrap(), ab.matmul(&c.transpose()).unwrap());
    }

    #[test]
    fn shape_errors_are_reported() {
        let a = Tensor2::<f64>::zeros(2, 3);
        assert!(a.matmul(&Tensor2::zeros(2, 2)).is_err());
        assert!(Tensor2::<f64>::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Tensor2::<f64>::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn column_blocks_round_trip() {
        let a = Tensor2::<f32>::from_f64_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let mid = a.column_block(1..2);
        assert_eq!(mid.as_slice(), &[2.0, 5.0]);
        let mut b = Tensor2::zeros(2, 3);
        b.set_column_block(1, &mid);
        assert_eq!(b.as_slice(), &[0.0, 2.0, 0.0, 0.0, 5.0, 0.0]);
    }
}
