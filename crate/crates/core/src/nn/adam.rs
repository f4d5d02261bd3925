use serde::{Deserialize, Serialize};

use super::tensor::ShapeError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam with bias-corrected moments, one moment buffer per parameter block.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Moment buffers are created on the first call and
    /// every later call must present the same block shapes.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<(), ShapeError> {
        if params.len() != grads.len() {
            return Err(ShapeError::new("adam_step", (params.len(), 0), (grads.len(), 0)));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(ShapeError::new("adam_step", (k, p.len()), (k, g.len())));
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(ShapeError::new("adam_state", (self.first.len(), 0), (params.len(), 0)));
        }

        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let beta1 = T::of_f64(c.beta1);
        let beta2 = T::of_f64(c.beta2);
        let one = T::one();
        let correction1 = T::of_f64(1.0 - c.beta1.powi(t));
        let correction2 = T::of_f64(1.0 - c.beta2.powi(t));
        let lr = T::of_f64(c.learning_rate);
        let eps = T::of_f64(c.epsilon);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (one - beta1) * gi;
                v[i] = beta2 * v[i] + (one - beta2) * gi * gi;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = Adam::<f64>::new(AdamConfig::default());
        let mut theta = vec![0.0];
        adam.step(&mut [theta.as_mut_slice()], &[&[1.0]]).unwrap();
        // m_hat = v_hat = 1
        assert!((theta[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut adam = Adam::<f64>::new(AdamConfig::default());
        let mut theta = vec![0.5, -2.0];
        for _ in 0..10 {
            adam.step(&mut [theta.as_mut_slice()], &[&[0.0, 0.0]]).unwrap();
        }
        assert_eq!(theta, vec![0.5, -2.0]);
    }

    #[test]
    fn quadratic_converges_like_reference_recurrence() {
        let config = AdamConfig { learning_rate: 0.01, ..AdamConfig::default() };
        let mut adam = Adam::<f64>::new(config);
        let mut theta = vec![1.0];
        let (mut m, mut v, mut reference) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=1000 {
            let g = 2.0 * theta[0];
            adam.step(&mut [theta.as_mut_slice()], &[&[g]]).unwrap();
            let rg = 2.0 * reference;
            m = 0.9 * m + 0.1 * rg;
            v = 0.999 * v + 0.001 * rg * rg;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            reference -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((theta[0] - reference).abs() < 1e-12);
        assert!(theta[0].abs() < 1e-3, "theta = {}", theta[0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut adam = Adam::<f32>::new(AdamConfig::default());
        let mut theta = vec![0.0f32; 2];
        assert!(adam.step(&mut [theta.as_mut_slice()], &[&[1.0]]).is_err());
        adam.step(&mut [theta.as_mut_slice()], &[&[1.0, 1.0]]).unwrap();
        let mut other = vec![0.0f32; 3];
        assert!(adam.step(&mut [other.as_mut_slice()], &[&[1.0, 1.0, 1.0]]).is_err());
    }
}
