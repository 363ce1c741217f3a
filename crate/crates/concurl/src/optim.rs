//! Adam with bias correction, the only optimizer the trainer uses. State is
//! kept per parameter in the order of the first step and must stay aligned
//! with it for the run's lifetime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

pub struct Adam {
    cfg: AdamConfig,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Adam { cfg, t: 0, m: Vec::new(), v: Vec::new() })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update over all parameters. `params` and `grads` must line up
    /// one-to-one and keep the same order on every call.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer state holds {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.cfg.beta2.powi(self.t as i32);
        for ((param, grad), (m, v)) in
            params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if param.shape() != grad.shape() || param.shape() != m.shape() {
                return Err(Error::Shape(format!(
                    "parameter {:?} vs gradient {:?} vs state {:?}",
                    param.shape(),
                    grad.shape(),
                    m.shape()
                )));
            }
            for ((p, &g), (ms, vs)) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *ms = self.cfg.beta1 * *ms + (1.0 - self.cfg.beta1) * g;
                *vs = self.cfg.beta2 * *vs + (1.0 - self.cfg.beta2) * g * g;
                let m_hat = *ms / c1;
                let v_hat = *vs / c2;
                *p -= self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_untouched() {
        let mut adam = Adam::new(AdamConfig::default()).unwrap();
        let mut p = Tensor::vector(&[1.5, -2.0, 0.25]);
        let before = p.data().to_vec();
        let zero = Tensor::zeros(&[3]);
        for _ in 0..5 {
            adam.step(&mut [&mut p], &[zero.clone()]).unwrap();
        }
        assert_eq!(p.data(), &before[..]);
        assert_eq!(adam.step_count(), 5);
    }

    #[test]
    fn single_step_moves_by_roughly_the_learning_rate() {
        let cfg = AdamConfig { learning_rate: 0.1, ..AdamConfig::default() };
        let mut adam = Adam::new(cfg).unwrap();
        let mut p = Tensor::vector(&[1.0]);
        adam.step(&mut [&mut p], &[Tensor::vector(&[1.0])]).unwrap();
        // First step: m_hat = v_hat = g = 1, so the update is
        // lr * 1 / (1 + eps).
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn matches_scalar_recurrence_oracle() {
        let cfg = AdamConfig { learning_rate: 0.05, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let mut adam = Adam::new(cfg).unwrap();
        let mut p = Tensor::vector(&[0.7]);
        let grads = [1.0, -0.5, 0.25, 2.0, -1.0, 0.1, 0.0, 3.0, -0.75, 0.3];
        // Independent scalar recurrence.
        let (mut x, mut m, mut v) = (0.7f64, 0.0f64, 0.0f64);
        for (t, &g) in grads.iter().enumerate() {
            adam.step(&mut [&mut p], &[Tensor::vector(&[g])]).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t as i32 + 1));
            let v_hat = v / (1.0 - 0.999f64.powi(t as i32 + 1));
            x -= 0.05 * m_hat / (v_hat.sqrt() + 1e-8);
            assert!((p.data()[0] - x).abs() < 1e-12, "step {t}: {} vs {x}", p.data()[0]);
        }
    }

    #[test]
    fn identical_runs_produce_identical_trajectories() {
        let run = || {
            let mut adam = Adam::new(AdamConfig::default()).unwrap();
            let mut a = Tensor::vector(&[1.0, 2.0]);
            let mut b = Tensor::full(&[2, 2], 0.5);
            for i in 0..20 {
                let ga = Tensor::vector(&[(i as f64).sin(), (i as f64).cos()]);
                let gb = Tensor::full(&[2, 2], 0.01 * i as f64 - 0.05);
                adam.step(&mut [&mut a, &mut b], &[ga, gb]).unwrap();
            }
            (a.data().to_vec(), b.data().to_vec())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sliding_averages_damp_oscillating_gradients() {
        // Alternating +1/-1 gradients: Adam's first moment shrinks the
        // effective step, so the parameter stays near its start.
        let cfg = AdamConfig { learning_rate: 0.01, ..AdamConfig::default() };
        let mut adam = Adam::new(cfg).unwrap();
        let mut p = Tensor::vector(&[0.0]);
        for i in 0..200 {
            let g = if i % 2 == 0 { 1.0 } else { -1.0 };
            adam.step(&mut [&mut p], &[Tensor::vector(&[g])]).unwrap();
        }
        assert!(p.data()[0].abs() < 0.05, "drifted to {}", p.data()[0]);
    }

    #[test]
    fn rejects_mismatched_inputs_and_bad_config() {
        let mut adam = Adam::new(AdamConfig::default()).unwrap();
        let mut p = Tensor::vector(&[1.0]);
        assert!(adam.step(&mut [&mut p], &[]).is_err());
        assert!(adam.step(&mut [&mut p], &[Tensor::zeros(&[2])]).is_err());
        // Establish state with one parameter, then change the count.
        adam.step(&mut [&mut p], &[Tensor::zeros(&[1])]).unwrap();
        let mut q = Tensor::vector(&[1.0]);
        assert!(adam.step(&mut [&mut p, &mut q], &[Tensor::zeros(&[1]), Tensor::zeros(&[1])]).is_err());

        assert!(Adam::new(AdamConfig { learning_rate: 0.0, ..AdamConfig::default() }).is_err());
        assert!(Adam::new(AdamConfig { beta1: 1.0, ..AdamConfig::default() }).is_err());
        assert!(Adam::new(AdamConfig { beta2: -0.1, ..AdamConfig::default() }).is_err());
        assert!(Adam::new(AdamConfig { eps: 0.0, ..AdamConfig::default() }).is_err());
    }
}
