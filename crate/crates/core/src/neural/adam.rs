use super::params::Parameters;
use crate::math::sqrt;
use crate::Result;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Parameters,
    v: Parameters,
}

impl Adam {
    pub const DEFAULT_LR: f64 = 5e-4;

    pub fn new(params: &Parameters, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Parameters::zeros_like(params),
            v: Parameters::zeros_like(params),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Parameters {
        &self.m
    }

    pub fn second_moment(&self) -> &Parameters {
        &self.v
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &Parameters) -> Result<()> {
        self.m.check_layout(params)?;
        self.m.check_layout(grads)?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(t));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(t));
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let arrays = params
            .arrays_mut()
            .iter_mut()
            .zip(grads.arrays())
            .zip(self.m.arrays_mut().iter_mut().zip(self.v.arrays_mut()));
        for ((p, g), (m, v)) in arrays {
            for k in 0..p.data.len() {
                let gk = g.data[k];
                m.data[k] = b1 * m.data[k] + (1.0 - b1) * gk;
                v.data[k] = b2 * v.data[k] + (1.0 - b2) * gk * gk;
                let mhat = m.data[k] / c1;
                let vhat = v.data[k] / c2;
                p.data[k] -= lr * mhat / (sqrt(vhat) + eps);
            }
        }
        Ok(())
    }
}
