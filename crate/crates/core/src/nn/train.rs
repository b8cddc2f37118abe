use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::MlpModel;
use super::optim::{lr_at, AdamW, TrainConfig};
use crate::datagen::{feature_len, generate_examples, SamplerConfig, TrainingExample};
use crate::error::{Error, Result};
use crate::par::{map_slice, Execution};
use crate::rng::{derive_seed, substream, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub val_mae: f64,
    pub val_r2: f64,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub mae: f64,
    pub r2: f64,
}

/// Result of [`train`]: the best-validation checkpoint and the training log.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub best_epoch: usize,
    pub history: Vec<EpochMetrics>,
    /// Mean micro-batch loss of every optimizer step.
    pub step_losses: Vec<f64>,
}

/// Fixed-capacity ring of the most recent stream examples.
struct ReplayBuffer {
    items: Vec<TrainingExample>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    fn new(capacity: usize) -> Self {
        ReplayBuffer {
            items: Vec::with_capacity(capacity),
            capacity,
            next: 0,
        }
    }

    fn push(&mut self, ex: TrainingExample) {
        if self.items.len() < self.capacity {
            self.items.push(ex);
        } else {
            self.items[self.next] = ex;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    fn is_full(&self) -> bool {
        self.items.len() == self.capacity
    }

    fn sample(&self, rows: usize, rng: &mut StreamRng, width: usize) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(rows * width);
        let mut ys = Vec::with_capacity(rows);
        for _ in 0..rows {
            let ex = &self.items[rng.random_range(0..self.items.len())];
            xs.extend_from_slice(&ex.features);
            ys.push(ex.label as f64);
        }
        (xs, ys)
    }
}

fn pull<I>(stream: &mut I, width: usize) -> Result<TrainingExample>
where
    I: Iterator<Item = Result<TrainingExample>>,
{
    let ex = stream.next().ok_or(Error::StreamExhausted)??;
    if ex.features.len() != width {
        return Err(Error::Shape {
            expected: width,
            got: ex.features.len(),
        });
    }
    Ok(ex)
}

/// Held-out examples drawn from a seed disjoint from the training stream.
pub fn validation_set(
    sampler: &SamplerConfig,
    resuffix_optimize: bool,
    size: usize,
    exec: Execution,
) -> Result<Vec<TrainingExample>> {
    let mut cfg = sampler.clone();
    cfg.seed = derive_seed(sampler.seed, "validation", 0);
    generate_examples(&cfg, size, resuffix_optimize, exec)
}

/// Endless pass over a fixed example set, reshuffled every epoch.
pub fn cycle_examples(
    examples: Vec<TrainingExample>,
    seed: u64,
) -> impl Iterator<Item = Result<TrainingExample>> {
    let mut rng = substream(seed, "dataset-cycle", 0);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut pos = order.len();
    std::iter::from_fn(move || {
        if examples.is_empty() {
            return None;
        }
        if pos == order.len() {
            order.shuffle(&mut rng);
            pos = 0;
        }
        pos += 1;
        Some(Ok(examples[order[pos - 1]].clone()))
    })
}

/// MSE, MAE and coefficient of determination of `model` on `examples`.
pub fn evaluate(model: &MlpModel, examples: &[TrainingExample]) -> Result<RegressionMetrics> {
    const CHUNK: usize = 512;
    let mut preds = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(CHUNK) {
        let xs: Vec<f64> = chunk
            .iter()
            .flat_map(|e| e.features.iter().copied())
            .collect();
        preds.extend(model.forward(&xs)?);
    }
    let labels: Vec<f64> = examples.iter().map(|e| e.label as f64).collect();
    Ok(regression_metrics(&preds, &labels))
}

pub fn regression_metrics(preds: &[f64], labels: &[f64]) -> RegressionMetrics {
    let n = labels.len() as f64;
    if labels.is_empty() {
        return RegressionMetrics {
            mse: f64::NAN,
            mae: f64::NAN,
            r2: f64::NAN,
        };
    }
    let mean = labels.iter().sum::<f64>() / n;
    let sse: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum();
    let sae: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum();
    let sst: f64 = labels.iter().map(|y| (y - mean).powi(2)).sum();
    RegressionMetrics {
        mse: sse / n,
        mae: sae / n,
        r2: if sst > 0.0 { 1.0 - sse / sst } else { f64::NAN },
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va * vb).sqrt()
}

/// Trains a fresh model on `stream` through a replay buffer.
///
/// Every optimizer step accumulates `grad_accumulation` micro-batches of
/// `batch` rows sampled uniformly with replacement from the buffer; before
/// each micro-batch `refresh_per_batch` new stream examples replace the
/// oldest ones. Validation runs on the f32-rounded weights after each epoch,
/// so the returned checkpoint behaves exactly like its saved file.
pub fn train<I>(
    mut stream: I,
    validation: &[TrainingExample],
    qubits: usize,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome>
where
    I: Iterator<Item = Result<TrainingExample>>,
{
    cfg.validate()?;
    let width = feature_len(qubits);
    let mut model = MlpModel::new(qubits, &cfg.hidden, &mut substream(cfg.seed, "init", 0))?;
    let mut opt = AdamW::new(model.param_count(), cfg);
    let mut rng = substream(cfg.seed, "training-shuffle", 0);

    let mut buffer = ReplayBuffer::new(cfg.replay_buffer);
    while !buffer.is_full() {
        buffer.push(pull(&mut stream, width)?);
    }

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step_losses = Vec::with_capacity(cfg.total_steps());
    let mut best: Option<(f64, usize, MlpModel)> = None;
    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        let mut lr = 0.0;
        for s in 0..cfg.steps_per_epoch {
            let step = epoch * cfg.steps_per_epoch + s;
            let mut micro = Vec::with_capacity(cfg.grad_accumulation);
            for _ in 0..cfg.grad_accumulation {
                for _ in 0..cfg.refresh_per_batch {
                    buffer.push(pull(&mut stream, width)?);
                }
                micro.push(buffer.sample(cfg.batch, &mut rng, width));
            }
            let parts = map_slice(exec, &micro, |(xs, ys)| model.loss_and_grad(xs, ys));
            let mut grads = vec![0.0; model.param_count()];
            let mut loss = 0.0;
            for part in parts {
                let (l, g) = part?;
                loss += l;
                grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let scale = 1.0 / cfg.grad_accumulation as f64;
            loss *= scale;
            grads.iter_mut().for_each(|g| *g *= scale);
            if !loss.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            lr = lr_at(step, cfg);
            opt.step(model.params_mut(), &mut grads, lr)?;
            step_losses.push(loss);
            epoch_loss += loss;
        }

        let mut snapshot = model.clone();
        snapshot.quantize_f32();
        let val = evaluate(&snapshot, validation)?;
        let train_mse = epoch_loss / cfg.steps_per_epoch as f64;
        let metrics = EpochMetrics {
            epoch,
            train_mse,
            val_mse: val.mse,
            val_mae: val.mae,
            val_r2: val.r2,
            lr,
        };
        log::info!(
            "epoch {epoch}: train_mse {train_mse:.4} val_mse {:.4} val_mae {:.4} lr {lr:.2e}",
            val.mse,
            val.mae
        );
        history.push(metrics);
        let key = if validation.is_empty() {
            train_mse
        } else {
            val.mse
        };
        if best.as_ref().is_none_or(|(b, _, _)| key < *b) {
            best = Some((key, epoch, snapshot));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        history,
        step_losses,
    })
}

/// Metrics log as CSV with header `epoch,train_mse,val_mse,val_mae,val_r2,lr`.
pub fn metrics_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,train_mse,val_mse,val_mae,val_r2,lr\n");
    for m in history {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.epoch, m.train_mse, m.val_mse, m.val_mae, m.val_r2, m.lr
        ));
    }
    out
}
