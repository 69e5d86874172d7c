use std::f64::consts::PI;

use super::DistillConfig;
use crate::models::ParamSet;
use crate::tensor::{Scalar, Tape};
use crate::models::Bound;

/// Linear warmup to `peak_lr`, then cosine annealing towards zero.
pub fn lr_schedule(epoch: usize, cfg: &DistillConfig) -> f64 {
    let (w, n, peak) = (cfg.warmup_epochs, cfg.epochs, cfg.peak_lr);
    if epoch < w {
        return peak * (epoch + 1) as f64 / w as f64;
    }
    if n <= w {
        return peak;
    }
    let progress = (epoch - w) as f64 / (n - w) as f64;
    peak * 0.5 * (1.0 + (PI * progress).cos())
}

/// Adaptive moment estimation over the trainable entries of a [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet) -> Self {
        let zeros = || params.entries().iter().map(|p| if p.frozen { Vec::new() } else { vec![0.0; p.tensor.len()] }).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Apply one update from the gradients recorded on `tape` for `bound`.
    /// Frozen entries are never touched.
    pub fn step<T: Scalar>(&mut self, params: &mut ParamSet, tape: &Tape<T>, bound: &Bound, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            if params.entries()[i].frozen {
                continue;
            }
            let Some(g) = tape.grad(bound[i]) else { continue };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, w) in params.get_mut(i).data_mut().iter_mut().enumerate() {
                let gj = g.data()[j].as_f64();
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let update = lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
                *w = (*w as f64 - update) as f32;
            }
        }
    }
}
