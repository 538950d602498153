use serde::{Deserialize, Serialize};

use super::net::Params;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    step: i32,
    m: Params,
    v: Params,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &Params) -> Self {
        Self {
            cfg,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn update(&mut self, params: &mut Params, grads: &Params) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let tensors = params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::net::Dense;
    use ndarray::{arr1, arr2};

    fn single(w: f64) -> Params {
        let d = |x: f64| Dense {
            weight: arr2(&[[x]]),
            bias: arr1(&[0.0]),
        };
        Params {
            trunk: vec![d(w)],
            policy: d(0.0),
            value: d(0.0),
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // bias correction makes the first step lr * sign(g)
        let mut p = single(1.0);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.update(&mut p, &single(0.37));
        assert!((p.trunk[0].weight[[0, 0]] - (1.0 - 1e-3)).abs() < 1e-9);
        assert_eq!(p.policy.weight[[0, 0]], 0.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = single(3.0);
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(cfg, &p);
        for _ in 0..2000 {
            let w = p.trunk[0].weight[[0, 0]];
            adam.update(&mut p, &single(2.0 * (w - 0.5)));
        }
        assert!((p.trunk[0].weight[[0, 0]] - 0.5).abs() < 1e-3);
    }
}
