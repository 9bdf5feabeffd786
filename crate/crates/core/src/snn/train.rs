//! Training loop: Adam over surrogate gradients, stratified validation
//! split, best-validation checkpointing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::backward::{loss_grads_preds, Gradients};
use super::config::Plan;
use super::forward::{argmax_class, forward};
use super::params::Parameters;
use super::surrogate::SurrogateSpec;
use super::{Result, SnnError};
use crate::aer::SpikeTensor;

/// One training example: input channels plus a 1-based class label.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub channels: Vec<SpikeTensor>,
    pub class: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub surrogate: SurrogateSpec,
    pub val_fraction: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 10,
            batch_size: 16,
            seed: 0,
            surrogate: SurrogateSpec::default(),
            val_fraction: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Parameters,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    /// True if training stopped early on a non-finite loss; `params` then
    /// holds the last good checkpoint.
    pub diverged: bool,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    fn new(params: &Parameters) -> Self {
        Adam {
            m: params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect(),
            v: params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, master: &mut [Vec<f64>], grads: &Gradients, hp: &Hyperparams) {
        self.t += 1;
        let b1 = hp.adam_beta1;
        let b2 = hp.adam_beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for (ti, g) in grads.tensors.iter().enumerate() {
            let m = &mut self.m[ti];
            let v = &mut self.v[ti];
            let w = &mut master[ti];
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                w[i] -= hp.lr * mh / (vh.sqrt() + hp.adam_eps);
            }
        }
    }
}

fn snapshot(params: &Parameters, master: &[Vec<f64>]) -> Parameters {
    let mut out = params.clone();
    for (t, src) in out.tensors.iter_mut().zip(master) {
        for (d, &s) in t.data.iter_mut().zip(src) {
            *d = s as f32;
        }
    }
    out
}

/// Stratified split of item indices into (train, val).
fn split_indices(
    items: &[TrainItem],
    classes: usize,
    val_fraction: f64,
    rng: &mut ChaCha12Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, item) in items.iter().enumerate() {
        by_class[item.class - 1].push(i);
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for bucket in by_class.iter_mut() {
        bucket.shuffle(rng);
        let n_val = ((bucket.len() as f64) * val_fraction).round() as usize;
        let n_val = n_val.min(bucket.len().saturating_sub(1));
        val.extend_from_slice(&bucket[..n_val]);
        train.extend_from_slice(&bucket[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn evaluate_split(
    plan: &Plan,
    params: &Parameters,
    items: &[TrainItem],
    idxs: &[usize],
) -> Result<(f64, f64)> {
    if idxs.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    for &i in idxs {
        let item = &items[i];
        let out = forward(plan, params, &item.channels)?;
        let t = out.per_step_readout.len() as f64;
        let mean: Vec<f64> = out.scores.iter().map(|&s| s / t).collect();
        let max = mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = mean.iter().map(|&m| (m - max).exp()).sum();
        loss_sum += z.ln() + max - mean[item.class - 1];
        if argmax_class(&out.scores) == item.class {
            correct += 1;
        }
    }
    Ok((loss_sum / idxs.len() as f64, correct as f64 / idxs.len() as f64))
}

/// Train a network on labelled spike tensors. Deterministic given the
/// hyperparameter seed: shuffling, init and batch order all derive from it.
pub fn train(plan: &Plan, items: &[TrainItem], hp: &Hyperparams) -> Result<TrainOutcome> {
    hp.surrogate.validate()?;
    if items.is_empty() {
        return Err(SnnError::InvalidArgument("empty training set".into()));
    }
    let classes = plan.classes();
    for item in items {
        if item.class == 0 || item.class > classes {
            return Err(SnnError::InvalidArgument(format!(
                "label {} outside 1..={classes}",
                item.class
            )));
        }
    }
    if hp.batch_size == 0 {
        return Err(SnnError::InvalidArgument("zero batch size".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(hp.seed);
    let params0 = Parameters::init(plan, hp.seed);
    let mut master: Vec<Vec<f64>> =
        params0.tensors.iter().map(|t| t.data.iter().map(|&v| f64::from(v)).collect()).collect();
    let mut adam = Adam::new(&params0);

    let (train_idx, val_idx) = split_indices(items, classes, hp.val_fraction, &mut rng);
    if train_idx.is_empty() {
        return Err(SnnError::InvalidArgument("empty train split".into()));
    }

    let mut log = Vec::new();
    let mut best = snapshot(&params0, &master);
    let mut best_epoch = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    let mut diverged = false;

    let mut order = train_idx.clone();
    'epochs: for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        let current = snapshot(&params0, &master);
        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0usize;
        let mut epoch_n = 0usize;
        let mut n_batches = 0usize;

        let mut current = current;
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<(&[SpikeTensor], usize)> =
                chunk.iter().map(|&i| (items[i].channels.as_slice(), items[i].class)).collect();
            let (loss, grads, preds) =
                loss_grads_preds(plan, &current, &hp.surrogate, &batch, false)?;
            if !loss.is_finite() {
                diverged = true;
                break 'epochs;
            }
            epoch_loss += loss;
            n_batches += 1;
            for (&i, pred) in chunk.iter().zip(preds) {
                if pred == items[i].class {
                    epoch_correct += 1;
                }
                epoch_n += 1;
            }
            adam.step(&mut master, &grads, hp);
            current = snapshot(&params0, &master);
        }

        log.push(EpochLog {
            epoch,
            split: Split::Train,
            loss: epoch_loss / n_batches.max(1) as f64,
            accuracy: epoch_correct as f64 / epoch_n.max(1) as f64,
        });

        let (val_loss, val_acc) = evaluate_split(plan, &current, items, &val_idx)?;
        log.push(EpochLog { epoch, split: Split::Val, loss: val_loss, accuracy: val_acc });

        let score = if val_idx.is_empty() { -log[log.len() - 2].loss } else { val_acc };
        if score > best_val {
            best_val = score;
            best = current.clone();
            best_epoch = epoch;
        }
    }

    Ok(TrainOutcome { params: best, log, best_epoch, diverged })
}
