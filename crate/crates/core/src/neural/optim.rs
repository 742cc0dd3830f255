use serde::{Deserialize, Serialize};

use super::param::ParamArray;
use crate::{Error, Result};

/// Linear warmup to `base_lr`, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
}

impl LrSchedule {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch + 1 >= self.warmup_epochs {
            self.base_lr
        } else {
            self.base_lr * (epoch + 1) as f64 / self.warmup_epochs as f64
        }
    }
}

pub fn lr_at(schedule: &LrSchedule, epoch: usize) -> f64 {
    schedule.lr_at(epoch)
}

/// Adam with bias correction. Moments mirror the parameter set.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &[ParamArray]) -> Self {
        Self {
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One update from the accumulated gradients, which are then zeroed.
    pub fn step(&mut self, params: &mut [ParamArray], lr: f64) -> Result<()> {
        if let Some(bad) = params.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(Error::NonFiniteGradient(bad.name.clone()));
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for (((w, g), m), v) in p.values.iter_mut().zip(p.grad.iter_mut()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * *g;
                *v = b2 * *v + (1.0 - b2) * *g * *g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                *g = 0.0;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ParamKind;

    fn scalar(w: f64, g: f64) -> Vec<ParamArray> {
        let mut p = ParamArray::from_values("w", vec![1], ParamKind::Weight, vec![w]);
        p.grad[0] = g;
        vec![p]
    }

    #[test]
    fn warmup_values() {
        let s = LrSchedule { base_lr: 6e-3, warmup_epochs: 500 };
        assert_eq!(s.lr_at(0), 1.2e-5);
        assert_eq!(s.lr_at(249), 3e-3);
        assert_eq!(s.lr_at(499), 6e-3);
        assert_eq!(s.lr_at(10_000), 6e-3);
    }

    #[test]
    fn first_step_is_lr_sized() {
        // t = 1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let mut p = scalar(0.0, 1.0);
        let mut adam = AdamState::new(&p);
        adam.step(&mut p, 1e-3).unwrap();
        assert!((p[0].values[0] + 1e-3).abs() < 1e-8);
        assert_eq!(p[0].grad[0], 0.0);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar(0.75, 0.0);
        let mut adam = AdamState::new(&p);
        adam.step(&mut p, 1e-2).unwrap();
        assert_eq!(p[0].values[0], 0.75);
    }

    #[test]
    fn second_step_not_larger() {
        let mut p = scalar(0.0, 1.0);
        let mut adam = AdamState::new(&p);
        adam.step(&mut p, 1e-3).unwrap();
        let d1 = p[0].values[0].abs();
        let before = p[0].values[0];
        p[0].grad[0] = 1.0;
        adam.step(&mut p, 1e-3).unwrap();
        let d2 = (p[0].values[0] - before).abs();
        assert!(d2 <= d1 + 1e-9);
        assert!(adam.v[0][0] >= 0.0);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = scalar(0.0, f64::NAN);
        let mut adam = AdamState::new(&p);
        match adam.step(&mut p, 1e-3) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "w"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
