//! Diffusion noise schedule and the deterministic (eta = 0) DDIM step grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cumulative signal schedule alpha_bar over training steps, plus the sparse
/// strictly-decreasing subsequence visited at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdimSchedule {
    alpha_bar: Vec<f64>,
    inference: Vec<usize>,
}

impl DdimSchedule {
    /// Linear beta schedule; the conventional choice.
    pub fn linear(t_train: usize, beta_start: f64, beta_end: f64, inference_steps: usize) -> Self {
        assert!(t_train >= 2 && inference_steps >= 1 && inference_steps <= t_train);
        let mut alpha_bar = Vec::with_capacity(t_train);
        let mut prod = 1.0;
        for i in 0..t_train {
            let beta = beta_start + (beta_end - beta_start) * i as f64 / (t_train - 1) as f64;
            prod *= 1.0 - beta;
            alpha_bar.push(prod);
        }
        // evenly spaced over [0, t_train), strictly decreasing for sampling
        let inference: Vec<usize> = (0..inference_steps)
            .map(|j| {
                if inference_steps == 1 {
                    t_train - 1
                } else {
                    ((t_train - 1) as f64 * (inference_steps - 1 - j) as f64
                        / (inference_steps - 1) as f64)
                        .round() as usize
                }
            })
            .collect();
        Self {
            alpha_bar,
            inference,
        }
    }

    /// Paper-style default: T = 1000, beta linear 1e-4 to 2e-2, 30 steps.
    pub fn default_30() -> Self {
        Self::linear(1000, 1e-4, 2e-2, 30)
    }

    pub fn t_train(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn inference_steps(&self) -> &[usize] {
        &self.inference
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bar
            .get(t)
            .copied()
            .ok_or(Error::StepNotInSchedule(t))
    }

    pub fn contains(&self, t: usize) -> bool {
        t < self.alpha_bar.len()
    }
}
