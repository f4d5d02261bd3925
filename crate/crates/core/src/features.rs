//! Input feature encoding and standardization.
//!
//! Face rows are `[plane, cylinder, cone, sphere, torus, rational, area]`,
//! edge rows are `[line, circle, ellipse, helix, intersection, concave,
//! convex, smooth, closed, length]` and coedge rows hold a single
//! direction flag.

use serde::{Deserialize, Serialize};

use crate::nn::Tensor2;
use crate::scalar::Scalar;

pub const FACE_FEATURES: usize = 7;
pub const EDGE_FEATURES: usize = 10;
pub const COEDGE_FEATURES: usize = 1;

/// Deviations below this leave the column unscaled.
pub const STD_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceType {
    Plane,
    Cylinder,
    Cone,
    Sphere,
    Torus,
    RationalBspline,
    NonrationalBspline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveType {
    Line,
    Circle,
    Ellipse,
    Helix,
    IntersectionCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Concave,
    Convex,
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceAttributes {
    pub surface_type: SurfaceType,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeAttributes {
    pub curve_type: CurveType,
    pub convexity: Convexity,
    pub closed: bool,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoedgeAttributes {
    /// Coedge runs along the parametric direction of its edge curve.
    pub forward: bool,
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn face_row(attrs: &FaceAttributes) -> [f64; FACE_FEATURES] {
    let mut row = [0.0; FACE_FEATURES];
    let slot = match attrs.surface_type {
        SurfaceType::Plane => Some(0),
        SurfaceType::Cylinder => Some(1),
        SurfaceType::Cone => Some(2),
        SurfaceType::Sphere => Some(3),
        SurfaceType::Torus => Some(4),
        SurfaceType::RationalBspline => Some(5),
        SurfaceType::NonrationalBspline => None,
    };
    if let Some(k) = slot {
        row[k] = 1.0;
    }
    row[6] = attrs.area;
    row
}

pub fn edge_row(attrs: &EdgeAttributes) -> [f64; EDGE_FEATURES] {
    let mut row = [0.0; EDGE_FEATURES];
    row[match attrs.curve_type {
        CurveType::Line => 0,
        CurveType::Circle => 1,
        CurveType::Ellipse => 2,
        CurveType::Helix => 3,
        CurveType::IntersectionCurve => 4,
    }] = 1.0;
    row[match attrs.convexity {
        Convexity::Concave => 5,
        Convexity::Convex => 6,
        Convexity::Smooth => 7,
    }] = 1.0;
    row[8] = flag(attrs.closed);
    row[9] = attrs.length;
    row
}

fn encode<T: Scalar, const W: usize>(rows: impl Iterator<Item = [f64; W]>) -> Tensor2<T> {
    let data: Vec<T> = rows.flat_map(|r| r.into_iter().map(T::of_f64)).collect();
    let n = data.len() / W;
    Tensor2::from_vec(n, W, data).expect("row width is fixed")
}

pub fn encode_faces<T: Scalar>(attrs: &[FaceAttributes]) -> Tensor2<T> {
    encode(attrs.iter().map(face_row))
}

pub fn encode_edges<T: Scalar>(attrs: &[EdgeAttributes]) -> Tensor2<T> {
    encode(attrs.iter().map(edge_row))
}

pub fn encode_coedges<T: Scalar>(attrs: &[CoedgeAttributes]) -> Tensor2<T> {
    encode(attrs.iter().map(|a| [flag(a.forward)]))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StandardizeError {
    #[error("cannot fit a standardizer on an empty training set")]
    EmptyTrainingSet,
    #[error("feature width mismatch: expected {expected} columns, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
}

/// Per-column mean and population deviation of one feature matrix family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns that are actually transformed.
    pub scaled: Vec<bool>,
}

impl ColumnScaler {
    /// Fits on the row-wise concatenation of `matrices`. Columns listed in
    /// `exempt` are never scaled.
    pub fn fit<'a, T: Scalar>(
        matrices: impl IntoIterator<Item = &'a Tensor2<T>>,
        width: usize,
        exempt: &[usize],
    ) -> Result<Self, StandardizeError> {
        let mut sum = vec![0.0f64; width];
        let mut count = 0usize;
        let mut seen = Vec::new();
        for m in matrices {
            if m.cols() != width {
                return Err(StandardizeError::WidthMismatch { expected: width, actual: m.cols() });
            }
            for row in m.iter_rows() {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v.to_f64_lossy();
                }
            }
            count += m.rows();
            seen.push(m);
        }
        if count == 0 {
            return Err(StandardizeError::EmptyTrainingSet);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        // second pass on centred values keeps the variance accurate
        let mut sq = vec![0.0f64; width];
        for m in &seen {
            for row in m.iter_rows() {
                for ((s, v), mu) in sq.iter_mut().zip(row).zip(&mean) {
                    let d = v.to_f64_lossy() - mu;
                    *s += d * d;
                }
            }
        }
        let std: Vec<f64> = sq.iter().map(|s| (s / count as f64).sqrt()).collect();
        let scaled = (0..width).map(|j| std[j] >= STD_GUARD && !exempt.contains(&j)).collect();
        Ok(ColumnScaler { mean, std, scaled })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply<T: Scalar>(&self, x: &Tensor2<T>) -> Result<Tensor2<T>, StandardizeError> {
        if x.cols() != self.width() {
            return Err(StandardizeError::WidthMismatch { expected: self.width(), actual: x.cols() });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                if self.scaled[j] {
                    *v = T::of_f64((v.to_f64_lossy() - self.mean[j]) / self.std[j]);
                }
            }
        }
        Ok(out)
    }
}

/// Standardization statistics for faces, edges and coedges, fit on a
/// training split and reused unchanged for every other split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub faces: ColumnScaler,
    pub edges: ColumnScaler,
    pub coedges: ColumnScaler,
    /// Whether one-hot and flag columns are scaled along with the
    /// continuous ones.
    pub scale_flags: bool,
}

impl Standardizer {
    /// Fits on the training feature matrices, given as `(X^f, X^e, X^c)`
    /// triples, one per solid or batch.
    pub fn fit<'a, T: Scalar>(
        training: impl IntoIterator<Item = (&'a Tensor2<T>, &'a Tensor2<T>, &'a Tensor2<T>)> + Clone,
        scale_flags: bool,
    ) -> Result<Self, StandardizeError> {
        let (face_exempt, edge_exempt, coedge_exempt): (Vec<usize>, Vec<usize>, Vec<usize>) =
            if scale_flags {
                (vec![], vec![], vec![])
            } else {
                ((0..6).collect(), (0..9).collect(), vec![0])
            };
        Ok(Standardizer {
            faces: ColumnScaler::fit(training.clone().into_iter().map(|t| t.0), FACE_FEATURES, &face_exempt)?,
            edges: ColumnScaler::fit(training.clone().into_iter().map(|t| t.1), EDGE_FEATURES, &edge_exempt)?,
            coedges: ColumnScaler::fit(training.into_iter().map(|t| t.2), COEDGE_FEATURES, &coedge_exempt)?,
            scale_flags,
        })
    }

    pub fn apply<T: Scalar>(
        &self,
        faces: &Tensor2<T>,
        edges: &Tensor2<T>,
        coedges: &Tensor2<T>,
    ) -> Result<(Tensor2<T>, Tensor2<T>, Tensor2<T>), StandardizeError> {
        Ok((self.faces.apply(faces)?, self.edges.apply(edges)?, self.coedges.apply(coedges)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_rows() {
        let x: Tensor2<f64> = encode_faces(&[
            FaceAttributes { surface_type: SurfaceType::Plane, area: 1.5 },
            FaceAttributes { surface_type: SurfaceType::NonrationalBspline, area: 2.0 },
            FaceAttributes { surface_type: SurfaceType::RationalBspline, area: 0.0 },
        ]);
        assert_eq!(x.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.5]);
        assert_eq!(x.row(1), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(x.row(2), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn edge_rows() {
        let x: Tensor2<f64> = encode_edges(&[
            EdgeAttributes { curve_type: CurveType::Line, convexity: Convexity::Convex, closed: false, length: 2.0 },
            EdgeAttributes { curve_type: CurveType::Circle, convexity: Convexity::Smooth, closed: true, length: 6.283 },
            EdgeAttributes {
                curve_type: CurveType::IntersectionCurve,
                convexity: Convexity::Concave,
                closed: false,
                length: 0.1,
            },
        ]);
        assert_eq!(x.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 2.0]);
        assert_eq!(x.row(1), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 6.283]);
        assert_eq!(x.row(2), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.1]);
    }

    #[test]
    fn coedge_rows_preserve_order() {
        let x: Tensor2<f32> = encode_coedges(&[
            CoedgeAttributes { forward: true },
            CoedgeAttributes { forward: false },
            CoedgeAttributes { forward: true },
        ]);
        assert_eq!(x.shape(), (3, 1));
        assert_eq!(x.as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn two_point_column() {
        let x = Tensor2::<f64>::from_f64_rows(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        let s = ColumnScaler::fit([&x], 2, &[]).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 0.0]);
        let y = s.apply(&x).unwrap();
        // constant column passes through
        assert_eq!(y.as_slice(), &[-1.0, 5.0, 1.0, 5.0]);
    }

    #[test]
    fn other_splits_use_training_statistics() {
        let train = Tensor2::<f64>::from_f64_rows(&[[0.0], [2.0], [4.0]]).unwrap();
        let val = Tensor2::<f64>::from_f64_rows(&[[10.0], [20.0]]).unwrap();
        let s = ColumnScaler::fit([&train], 1, &[]).unwrap();
        let sigma = (8.0f64 / 3.0).sqrt();
        let y = s.apply(&val).unwrap();
        assert_eq!(y.as_slice(), &[(10.0 - 2.0) / sigma, (20.0 - 2.0) / sigma]);
        let own = ColumnScaler::fit([&val], 1, &[]).unwrap();
        assert_ne!(own.apply(&val).unwrap(), y);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert_eq!(
            ColumnScaler::fit::<f64>([], 3, &[]),
            Err(StandardizeError::EmptyTrainingSet)
        );
        let x = Tensor2::<f64>::zeros(0, 3);
        assert_eq!(ColumnScaler::fit([&x], 3, &[]), Err(StandardizeError::EmptyTrainingSet));
        let y = Tensor2::<f64>::zeros(2, 2);
        assert!(matches!(ColumnScaler::fit([&y], 3, &[]), Err(StandardizeError::WidthMismatch { .. })));
    }

    #[test]
    fn flag_switch_leaves_one_hot_columns() {
        let f: Tensor2<f64> = encode_faces(&[
            FaceAttributes { surface_type: SurfaceType::Plane, area: 1.0 },
            FaceAttributes { surface_type: SurfaceType::Cylinder, area: 3.0 },
        ]);
        let e: Tensor2<f64> = encode_edges(&[EdgeAttributes {
            curve_type: CurveType::Line,
            convexity: Convexity::Convex,
            closed: false,
            length: 1.0,
        }]);
        let c: Tensor2<f64> = encode_coedges(&[CoedgeAttributes { forward: true }, CoedgeAttributes { forward: false }]);
        let off = Standardizer::fit([(&f, &e, &c)], false).unwrap();
        let (fs, _, cs) = off.apply(&f, &e, &c).unwrap();
        assert_eq!(&fs.row(0)[..6], &f.row(0)[..6]);
        assert_eq!(fs.row(0)[6], -1.0);
        assert_eq!(cs, c);
        let on = Standardizer::fit([(&f, &e, &c)], true).unwrap();
        let (fs, _, cs) = on.apply(&f, &e, &c).unwrap();
        assert_eq!(fs.row(0)[0], 1.0);
        assert_eq!(fs.row(1)[0], -1.0);
        assert_eq!(cs.as_slice(), &[1.0, -1.0]);
    }
}
