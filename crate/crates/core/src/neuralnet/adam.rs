use ndarray::{ArrayD, Zip};
use serde::{Deserialize, Serialize};

use super::{Network, Real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimiser state: first and second moments for every parameter tensor
/// of one network, plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Adam<T> {
    config: AdamConfig,
    step: u64,
    m: Vec<ArrayD<T>>,
    v: Vec<ArrayD<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, net: &Network<T>) -> Self {
        let zeros: Vec<ArrayD<T>> = net
            .params()
            .iter()
            .map(|p| ArrayD::zeros(p.shape()))
            .collect();
        Adam {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[ArrayD<T>], &[ArrayD<T>]) {
        (&self.m, &self.v)
    }

    /// Applies one bias-corrected Adam update with gradients `grads` (in
    /// [`Network::params`] order).
    pub fn update(&mut self, net: &mut Network<T>, grads: &[ArrayD<T>]) -> Result<()> {
        let mut params = net.params_mut();
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::argument(
                "gradient list does not match the network parameters",
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c = &self.config;
        let b1 = T::from(c.beta1).unwrap();
        let b2 = T::from(c.beta2).unwrap();
        let one = T::one();
        let lr = T::from(c.learning_rate).unwrap();
        let eps = T::from(c.epsilon).unwrap();
        let bc1 = T::from(1.0 - c.beta1.powi(t)).unwrap();
        let bc2 = T::from(1.0 - c.beta2.powi(t)).unwrap();
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            if p.shape() != g.shape() {
                return Err(Error::argument(
                    "gradient shape does not match parameter shape",
                ));
            }
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}
