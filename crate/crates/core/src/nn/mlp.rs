use rand::Rng;

use super::tensor::{ShapeError, Tensor2};
use crate::scalar::Scalar;

/// Fully connected layer `y = x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor2<T>,
    pub bias: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads<T> {
    pub weight: Tensor2<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(fan_in: usize, fan_out: usize, bias: bool) -> Self {
        Linear { weight: Tensor2::zeros(fan_in, fan_out), bias: bias.then(|| vec![T::zero(); fan_out]) }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot_uniform<R: Rng>(fan_in: usize, fan_out: usize, bias: bool, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| T::of_f64(rng.gen_range(-limit..=limit))).collect();
        Linear {
            weight: Tensor2::from_vec(fan_in, fan_out, data).expect("sized above"),
            bias: bias.then(|| vec![T::zero(); fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    pub fn num_params(&self) -> usize {
        self.weight.as_slice().len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub fn forward(&self, x: &Tensor2<T>) -> Result<Tensor2<T>, ShapeError> {
        let mut y = x.matmul(&self.weight)?;
        if let Some(b) = &self.bias {
            for i in 0..y.rows() {
                for (v, &bj) in y.row_mut(i).iter_mut().zip(b) {
                    *v += bj;
                }
            }
        }
        Ok(y)
    }
}

/// Stack of linear layers with ReLU between them and none after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Linear<T>>,
}

/// Layer inputs recorded during the forward pass. `inputs[0]` is the MLP
/// input; `inputs[k]` for `k > 0` is the post-ReLU output of layer `k-1`.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    pub inputs: Vec<Tensor2<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T> {
    pub layers: Vec<LinearGrads<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// Layer `k` maps `widths[k] -> widths[k + 1]`. Hidden layers always
    /// carry a bias; the last one only if `final_bias`.
    pub fn new_with<F>(widths: &[usize], final_bias: bool, mut make: F) -> Self
    where
        F: FnMut(usize, usize, bool) -> Linear<T>,
    {
        assert!(widths.len() >= 2, "an MLP needs at least one layer");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|k| make(widths[k], widths[k + 1], k + 1 < n || final_bias))
            .collect();
        Mlp { layers }
    }

    pub fn glorot<R: Rng>(widths: &[usize], final_bias: bool, rng: &mut R) -> Self {
        Self::new_with(widths, final_bias, |i, o, b| Linear::glorot_uniform(i, o, b, rng))
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").fan_out()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Linear::num_params).sum()
    }

    pub fn forward(&self, x: &Tensor2<T>) -> Result<(Tensor2<T>, MlpCache<T>), ShapeError> {
        if x.cols() != self.input_width() {
            return Err(ShapeError::new("mlp_forward", (x.rows(), self.input_width()), x.shape()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(&current)?;
            if k < last {
                for v in y.as_mut_slice() {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
            inputs.push(std::mem::replace(&mut current, y));
        }
        Ok((current, MlpCache { inputs }))
    }

    /// Gradients of the parameters and of the MLP input given `d_out`, the
    /// gradient with respect to the output.
    pub fn backward(
        &self,
        cache: &MlpCache<T>,
        d_out: &Tensor2<T>,
        need_input_grad: bool,
    ) -> Result<(MlpGrads<T>, Option<Tensor2<T>>), ShapeError> {
        let mut grads: Vec<LinearGrads<T>> = Vec::with_capacity(self.layers.len());
        let mut delta = d_out.clone();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &cache.inputs[k];
            let d_weight = input.transpose_matmul(&delta)?;
            let d_bias = layer.bias.as_ref().map(|_| {
                let mut b = vec![T::zero(); delta.cols()];
                for row in delta.iter_rows() {
                    for (bj, &d) in b.iter_mut().zip(row) {
                        *bj += d;
                    }
                }
                b
            });
            grads.push(LinearGrads { weight: d_weight, bias: d_bias });
            if k == 0 && !need_input_grad {
                return Ok((MlpGrads { layers: reversed(grads) }, None));
            }
            let mut d_input = delta.matmul_transpose(&layer.weight)?;
            if k > 0 {
                // input[k] is a ReLU output, so the mask is input > 0
                for (d, &a) in d_input.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            delta = d_input;
        }
        Ok((MlpGrads { layers: reversed(grads) }, Some(delta)))
    }

    /// Parameter slices in a fixed order: weight then bias per layer.
    pub fn param_blocks_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            if let Some(b) = &mut l.bias {
                out.push(b.as_mut_slice());
            }
        }
        out
    }

    pub fn param_blocks(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.weight.as_slice());
            if let Some(b) = &l.bias {
                out.push(b.as_slice());
            }
        }
        out
    }
}

fn reversed<T>(mut v: Vec<T>) -> Vec<T> {
    v.reverse();
    v
}

impl<T: Scalar> MlpGrads<T> {
    /// Same order as [`Mlp::param_blocks`].
    pub fn blocks(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.weight.as_slice());
            if let Some(b) = &l.bias {
                out.push(b.as_slice());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input() {
        let mlp = Mlp { layers: vec![Linear { weight: Tensor2::<f64>::identity(3), bias: Some(vec![0.0; 3]) }] };
        let x = Tensor2::from_f64_rows(&[[1.0, -2.0, 3.0]]).unwrap();
        assert_eq!(mlp.forward(&x).unwrap().0, x);
    }

    #[test]
    fn relu_zeroes_negated_positives() {
        let neg = Tensor2::<f64>::identity(2).scale(-1.0);
        let mlp = Mlp {
            layers: vec![
                Linear { weight: neg.clone(), bias: Some(vec![0.0; 2]) },
                Linear { weight: neg, bias: None },
            ],
        };
        let x = Tensor2::from_f64_rows(&[[2.0, -3.0]]).unwrap();
        let (y, cache) = mlp.forward(&x).unwrap();
        assert_eq!(cache.inputs[1].as_slice(), &[0.0, 3.0]);
        assert_eq!(y.as_slice(), &[0.0, -3.0]);
    }

    #[test]
    fn forward_matches_hand_composed_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mlp = Mlp::<f64>::glorot(&[4, 6, 5, 3], true, &mut rng);
        for block in mlp.param_blocks_mut() {
            for v in block {
                *v += rng.gen_range(-0.3..0.3);
            }
        }
        let x = Tensor2::from_vec(7, 4, (0..28).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let (y, _) = mlp.forward(&x).unwrap();
        for i in 0..7 {
            let mut a: Vec<f64> = x.row(i).to_vec();
            for (k, layer) in mlp.layers.iter().enumerate() {
                let mut next = vec![0.0; layer.fan_out()];
                for (j, n) in next.iter_mut().enumerate() {
                    let mut s = layer.bias.as_ref().map_or(0.0, |b| b[j]);
                    for (p, &ap) in a.iter().enumerate() {
                        s += ap * layer.weight[(p, j)];
                    }
                    *n = if k + 1 < mlp.layers.len() { s.max(0.0) } else { s };
                }
                a = next;
            }
            for j in 0..3 {
                assert!((a[j] - y[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut mlp = Mlp::<f64>::glorot(&[3, 5, 2], true, &mut rng);
        for b in mlp.layers[0].bias.as_mut().unwrap() {
            *b = rng.gen_range(-0.2..0.2);
        }
        let x = Tensor2::from_vec(4, 3, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let g = Tensor2::from_vec(4, 2, (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let objective = |m: &Mlp<f64>, x: &Tensor2<f64>| m.forward(x).unwrap().0.frobenius_dot(&g);
        let (_, cache) = mlp.forward(&x).unwrap();
        let (grads, dx) = mlp.backward(&cache, &g, true).unwrap();
        let analytic: Vec<f64> = grads.blocks().concat();
        let h = 1e-6;
        let mut k = 0;
        for b in 0..mlp.param_blocks().len() {
            for idx in 0..mlp.param_blocks()[b].len() {
                let mut plus = mlp.clone();
                plus.param_blocks_mut()[b][idx] += h;
                let mut minus = mlp.clone();
                minus.param_blocks_mut()[b][idx] -= h;
                let numeric = (objective(&plus, &x) - objective(&minus, &x)) / (2.0 * h);
                assert!((numeric - analytic[k]).abs() < 1e-8, "param {k}");
                k += 1;
            }
        }
        let dx = dx.unwrap();
        for idx in 0..12 {
            let mut xp = x.clone();
            xp.as_mut_slice()[idx] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[idx] -= h;
            let numeric = (objective(&mlp, &xp) - objective(&mlp, &xm)) / (2.0 * h);
            assert!((numeric - dx.as_slice()[idx]).abs() < 1e-8);
        }
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::<f32>::glorot(&[3, 2], false, &mut rng);
        assert!(mlp.forward(&Tensor2::zeros(2, 4)).is_err());
        assert_eq!(mlp.num_params(), 6);
    }
}
