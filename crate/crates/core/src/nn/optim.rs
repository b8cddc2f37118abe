use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer, schedule, and data-pipeline settings for [`super::train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub batch: usize,
    pub grad_accumulation: usize,
    pub warmup_steps: usize,
    pub cosine_t_max: usize,
    pub lr_min: f64,
    pub peak_lr: f64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub replay_buffer: usize,
    /// Fresh stream examples pushed into the buffer before each micro-batch.
    pub refresh_per_batch: usize,
    pub validation_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: super::mlp::DEFAULT_HIDDEN.to_vec(),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            grad_clip: 1.0,
            batch: 256,
            grad_accumulation: 5,
            warmup_steps: 2000,
            cosine_t_max: 20_000,
            lr_min: 1e-6,
            peak_lr: 5e-4,
            epochs: 200,
            steps_per_epoch: 2000,
            replay_buffer: 6000,
            refresh_per_batch: 64,
            validation_size: 4096,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn total_steps(&self) -> usize {
        self.epochs * self.steps_per_epoch
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch", self.batch),
            ("grad_accumulation", self.grad_accumulation),
            ("epochs", self.epochs),
            ("steps_per_epoch", self.steps_per_epoch),
            ("replay_buffer", self.replay_buffer),
            ("cosine_t_max", self.cosine_t_max),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.warmup_steps > self.total_steps() {
            return Err(Error::Config(format!(
                "warmup ({}) exceeds total steps ({})",
                self.warmup_steps,
                self.total_steps()
            )));
        }
        if !(self.peak_lr > 0.0 && self.lr_min >= 0.0 && self.eps > 0.0 && self.grad_clip > 0.0) {
            return Err(Error::Config(
                "learning rates, eps and clip must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Linear warmup from 0 to the peak, then cosine decay to `lr_min` over
/// `cosine_t_max` steps, flat afterwards.
pub fn lr_at(step: usize, cfg: &TrainConfig) -> f64 {
    if step < cfg.warmup_steps {
        return cfg.peak_lr * step as f64 / cfg.warmup_steps as f64;
    }
    let s = (step - cfg.warmup_steps).min(cfg.cosine_t_max) as f64;
    let cos = (PI * s / cfg.cosine_t_max as f64).cos();
    cfg.lr_min + (cfg.peak_lr - cfg.lr_min) * (1.0 + cos) / 2.0
}

/// AdamW with decoupled weight decay, bias correction, and global-norm
/// gradient clipping ahead of the moment update.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(params: usize, cfg: &TrainConfig) -> Self {
        AdamW {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
            grad_clip: cfg.grad_clip,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Clips `grads` in place to the configured global norm and returns the
    /// norm before clipping.
    pub fn clip(&self, grads: &mut [f64]) -> f64 {
        let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > self.grad_clip {
            let scale = self.grad_clip / norm;
            grads.iter_mut().for_each(|g| *g *= scale);
        }
        norm
    }

    pub fn step(&mut self, params: &mut [f64], grads: &mut [f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape {
                expected: self.m.len(),
                got: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradients"));
        }
        self.clip(grads);
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] *= 1.0 - lr * self.weight_decay;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}
