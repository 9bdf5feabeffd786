//! Backpropagation through time with a surrogate spike derivative.
//!
//! The loss is cross-entropy on the time-averaged readout. The backward
//! pass walks steps in reverse and, inside each step, blocks in reverse.
//! Membrane adjoints are dense per unit; cross-layer spike adjoints are
//! gathered only at units where the surrogate derivative is nonzero,
//! which keeps the cost proportional to near-threshold activity rather
//! than to the full layer size.

use super::config::{ConvStage, IfConfig, LinearStage, Plan, PoolKind, PoolStage, ResetMode, Stage};
use super::forward::{
    for_each_tap, run_forward, EngineConfig, ForwardOptions, ForwardOutput, SpikeMode, Tape,
};
use super::params::Parameters;
use super::surrogate::SurrogateSpec;
use super::{Result, SnnError};
use crate::aer::SpikeTensor;

/// Parameter gradients, aligned with `Parameters::tensors`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &Parameters) -> Self {
        Gradients { tensors: params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect() }
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * scale;
            }
        }
    }
}

#[derive(Clone)]
struct PoolInfo {
    window: usize,
    scale: f64,
    channels: usize,
    in_w: usize,
    out_w: usize,
}

impl PoolInfo {
    fn of(p: &PoolStage) -> Self {
        PoolInfo {
            window: p.window,
            scale: match p.kind {
                PoolKind::Sum => 1.0,
                PoolKind::Avg => 1.0 / (p.window * p.window) as f64,
            },
            channels: p.channels,
            in_w: p.in_w,
            out_w: p.out_w,
        }
    }

    /// Route a source unit index through the pool, returning the pooled
    /// index (channels-last on both sides).
    fn route(&self, idx: usize) -> usize {
        let c = idx % self.channels;
        let pos = idx / self.channels;
        let (y, x) = (pos / self.in_w, pos % self.in_w);
        ((y / self.window) * self.out_w + x / self.window) * self.channels + c
    }
}

#[derive(Clone)]
enum SinkKind {
    Conv(ConvStage),
    Linear(LinearStage),
}

/// One weighted stage with its optional preceding pool and following IF.
struct Block {
    pre_pool: Option<PoolInfo>,
    sink: SinkKind,
    iff: Option<(usize, IfConfig)>, // (if_idx, cfg); None for the readout
    out_size: usize,
    /// Size of the sink's (pooled) direct input.
    in_size: usize,
}

fn parse_blocks(plan: &Plan) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut pending_pool: Option<PoolInfo> = None;
    for stage in &plan.stages {
        match stage {
            Stage::Pool(p) => pending_pool = Some(PoolInfo::of(p)),
            Stage::Conv(c) => {
                blocks.push(Block {
                    pre_pool: pending_pool.take(),
                    out_size: c.out_c * c.out_h * c.out_w,
                    in_size: c.in_c * c.in_h * c.in_w,
                    sink: SinkKind::Conv(c.clone()),
                    iff: None,
                });
            }
            Stage::Linear(l) => {
                blocks.push(Block {
                    pre_pool: pending_pool.take(),
                    out_size: l.out_features,
                    in_size: l.in_features,
                    sink: SinkKind::Linear(l.clone()),
                    iff: None,
                });
            }
            Stage::If(f) => {
                let last = blocks.last_mut().expect("IF follows a weighted stage");
                last.iff = Some((f.if_idx, f.cfg));
            }
        }
    }
    blocks
}



/// Four-lane dot product of an f32 weight row with an f64 adjoint row.
/// Splitting the accumulator breaks the serial FP dependency so the loop
/// vectorizes; the summation order is still fixed and deterministic.
#[inline]
fn dot_row(w: &[f32], d: &[f64]) -> f64 {
    let n = w.len().min(d.len());
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for i in 0..chunks {
        let b = i * 4;
        acc[0] += f64::from(w[b]) * d[b];
        acc[1] += f64::from(w[b + 1]) * d[b + 1];
        acc[2] += f64::from(w[b + 2]) * d[b + 2];
        acc[3] += f64::from(w[b + 3]) * d[b + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += f64::from(w[i]) * d[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Transposed weight application of a sink at one (pooled) input position:
/// the dot product of that input unit's weights with the sink's output
/// adjoint.
fn weight_transpose_at(sink: &SinkKind, params: &Parameters, d_out: &[f64], p: usize) -> f64 {
    match sink {
        SinkKind::Linear(l) => {
            let w = params.tensor(l.weight);
            dot_row(&w[p * l.out_features..][..l.out_features], d_out)
        }
        SinkKind::Conv(c) => {
            let w = params.tensor(c.weight);
            let ch = p % c.in_c;
            let pos = p / c.in_c;
            let (y, x) = (pos / c.in_w, pos % c.in_w);
            let mut acc = 0.0;
            for_each_tap(y, c.padding, c.kernel, c.stride, c.out_h, |ky, oy| {
                for_each_tap(x, c.padding, c.kernel, c.stride, c.out_w, |kx, ox| {
                    let wrow =
                        &w[((ch * c.kernel + ky) * c.kernel + kx) * c.out_c..][..c.out_c];
                    let drow = &d_out[(oy * c.out_w + ox) * c.out_c..][..c.out_c];
                    acc += dot_row(wrow, drow);
                });
            });
            acc
        }
    }
}

/// Accumulate the weight and bias gradients of a sink for one input
/// emission `(pooled index, value)` against the output adjoint.
fn accumulate_weight_grad(
    sink: &SinkKind,
    grads: &mut Gradients,
    d_out: &[f64],
    p: usize,
    val: f64,
) {
    match sink {
        SinkKind::Linear(l) => {
            let gw = &mut grads.tensors[l.weight];
            let row = &mut gw[p * l.out_features..][..l.out_features];
            for (g, &d) in row.iter_mut().zip(d_out) {
                *g += val * d;
            }
        }
        SinkKind::Conv(c) => {
            let ch = p % c.in_c;
            let pos = p / c.in_c;
            let (y, x) = (pos / c.in_w, pos % c.in_w);
            let gw = &mut grads.tensors[c.weight];
            for_each_tap(y, c.padding, c.kernel, c.stride, c.out_h, |ky, oy| {
                for_each_tap(x, c.padding, c.kernel, c.stride, c.out_w, |kx, ox| {
                    let grow =
                        &mut gw[((ch * c.kernel + ky) * c.kernel + kx) * c.out_c..][..c.out_c];
                    let drow = &d_out[(oy * c.out_w + ox) * c.out_c..][..c.out_c];
                    for (g, &d) in grow.iter_mut().zip(drow) {
                        *g += val * d;
                    }
                });
            });
        }
    }
}

fn bias_index(sink: &SinkKind) -> (usize, usize) {
    match sink {
        SinkKind::Linear(l) => (l.weight + 1, l.out_features),
        SinkKind::Conv(c) => (c.weight + 1, c.out_c),
    }
}

struct SampleScratch {
    /// Membrane adjoint carried across steps, per IF.
    dv: Vec<Vec<f64>>,
    /// Output adjoint per block within the current step.
    d_out: Vec<Vec<f64>>,
    /// Spike value per unit of each IF (scratch for the current step).
    s_val: Vec<Vec<f64>>,
    /// Lazy transposed-weight adjoints per block over the sink's direct
    /// (pooled) input positions, with a stamp marking current-step entries.
    wt_cache: Vec<Vec<f64>>,
    wt_stamp: Vec<Vec<u64>>,
    stamp: u64,
}

impl SampleScratch {
    fn new(plan: &Plan, blocks: &[Block]) -> Self {
        let mut dv = Vec::new();
        let mut s_val = Vec::new();
        for stage in &plan.stages {
            if let Stage::If(f) = stage {
                dv.push(vec![0.0; f.size]);
                s_val.push(vec![0.0; f.size]);
            }
        }
        SampleScratch {
            dv,
            d_out: blocks.iter().map(|b| vec![0.0; b.out_size]).collect(),
            s_val,
            wt_cache: blocks.iter().map(|b| vec![0.0; b.in_size]).collect(),
            wt_stamp: blocks.iter().map(|b| vec![0; b.in_size]).collect(),
            stamp: 0,
        }
    }
}

/// Loss and parameter gradients of a batch under the surrogate-gradient
/// relaxation. `relaxed` replaces the hard spike forward with the smooth
/// surrogate primitive (used by gradient verification); training uses the
/// hard forward.
pub fn loss_and_grads(
    plan: &Plan,
    params: &Parameters,
    surrogate: &SurrogateSpec,
    batch: &[(&[SpikeTensor], usize)],
    relaxed: bool,
) -> Result<(f64, Gradients)> {
    let (loss, grads, _) = loss_grads_preds(plan, params, surrogate, batch, relaxed)?;
    Ok((loss, grads))
}

/// As [`loss_and_grads`], also returning the per-sample predicted classes
/// from the same forward passes.
pub(crate) fn loss_grads_preds(
    plan: &Plan,
    params: &Parameters,
    surrogate: &SurrogateSpec,
    batch: &[(&[SpikeTensor], usize)],
    relaxed: bool,
) -> Result<(f64, Gradients, Vec<usize>)> {
    surrogate.validate()?;
    if batch.is_empty() {
        return Err(SnnError::InvalidArgument("empty batch".into()));
    }
    let classes = plan.classes();
    for (_, label) in batch {
        if *label == 0 || *label > classes {
            return Err(SnnError::InvalidArgument(format!(
                "label {label} outside 1..={classes}"
            )));
        }
    }
    let mode =
        if relaxed { SpikeMode::Relaxed(*surrogate) } else { SpikeMode::Hard };

    let blocks = parse_blocks(plan);
    let mut grads = Gradients::zeros_like(params);
    let mut scratch = SampleScratch::new(plan, &blocks);
    let inv_batch = 1.0 / batch.len() as f64;
    let mut total_loss = 0.0;
    let mut preds = Vec::with_capacity(batch.len());

    for &(input, label) in batch {
        let mut tape = Tape::default();
        let out = run_forward(
            plan,
            params,
            input,
            EngineConfig { mode, opts: ForwardOptions::default(), tape: Some(&mut tape) },
        )?;
        let t_steps = out.per_step_readout.len();
        if t_steps == 0 {
            return Err(SnnError::InvalidArgument("empty input sequence".into()));
        }

        let (loss, d_mean) = cross_entropy(&out, label)?;
        total_loss += loss * inv_batch;
        preds.push(super::forward::argmax_class(&out.scores));

        // d(loss)/d(readout at step t) is constant: d_mean / T, scaled by
        // the batch average.
        let mut dr = d_mean;
        for d in dr.iter_mut() {
            *d *= inv_batch / t_steps as f64;
        }

        backward_sample(plan, params, &blocks, &tape, input, &dr, t_steps, &mut grads, &mut scratch, surrogate)?;
    }

    if !total_loss.is_finite() {
        return Err(SnnError::NonFinite("batch loss".into()));
    }
    Ok((total_loss, grads, preds))
}

/// Softmax cross-entropy on the time-averaged readout. Returns the loss and
/// the gradient w.r.t. the mean logits.
fn cross_entropy(out: &ForwardOutput, label: usize) -> Result<(f64, Vec<f64>)> {
    let t = out.per_step_readout.len() as f64;
    let mean: Vec<f64> = out.scores.iter().map(|&s| s / t).collect();
    let max = mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = mean.iter().map(|&m| (m - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let logz = z.ln() + max;
    let loss = logz - mean[label - 1];
    if !loss.is_finite() {
        return Err(SnnError::NonFinite("cross-entropy loss".into()));
    }
    let mut d: Vec<f64> = exps.iter().map(|&e| e / z).collect();
    d[label - 1] -= 1.0;
    Ok((loss, d))
}

#[allow(clippy::too_many_arguments)]
fn backward_sample(
    plan: &Plan,
    params: &Parameters,
    blocks: &[Block],
    tape: &Tape,
    input: &[SpikeTensor],
    dr: &[f64],
    t_steps: usize,
    grads: &mut Gradients,
    scratch: &mut SampleScratch,
    surrogate: &SurrogateSpec,
) -> Result<()> {
    let channels = plan.input().channels;
    for v in scratch.dv.iter_mut() {
        v.fill(0.0);
    }

    for t in (0..t_steps).rev() {
        for (k, block) in blocks.iter().enumerate().rev() {
            // 1. Output adjoint of this block's weighted stage.
            if let Some((if_idx, cfg)) = block.iff {
                // Spike adjoint from the downstream block: dense transposed
                // weights over its (pooled) input, then routed per unit.
                let down = &blocks[k + 1];
                let u_pre = tape.u(if_idx, t);

                // Mark spike values of this step.
                for &(idx, s) in &tape.emissions[if_idx][t] {
                    scratch.s_val[if_idx][idx as usize] = f64::from(s);
                }

                let th = cfg.threshold;
                let floor = cfg.lower_bound;
                // Split borrows: the downstream adjoint is read-only here.
                let (d_here, d_down) = {
                    let (a, b) = scratch.d_out.split_at_mut(k + 1);
                    (&mut a[k], &b[0])
                };
                let cache = &mut scratch.wt_cache[k + 1];
                let stamps = &mut scratch.wt_stamp[k + 1];
                scratch.stamp += 1;
                let stamp = scratch.stamp;
                let dv = &mut scratch.dv[if_idx];
                let s_val = &scratch.s_val[if_idx];
                let route_pool = down.pre_pool.as_ref();
                let pool_scale = route_pool.map_or(1.0, |p| p.scale);

                for i in 0..u_pre.len() {
                    let u = u_pre[i];
                    let g = surrogate.grad(u - th);
                    let s = s_val[i];
                    let w_pre_floor = match cfg.reset {
                        ResetMode::SubtractThreshold => u - th * s,
                        ResetMode::ToZero => u * (1.0 - s),
                    };
                    let gate = match floor {
                        Some(fl) => w_pre_floor > fl,
                        None => true,
                    };
                    let dw = if gate { dv[i] } else { 0.0 };
                    let du = if g != 0.0 {
                        let p = match route_pool {
                            Some(pool) => pool.route(i),
                            None => i,
                        };
                        let dsp = if stamps[p] == stamp {
                            cache[p]
                        } else {
                            let v = weight_transpose_at(&down.sink, params, d_down, p);
                            cache[p] = v;
                            stamps[p] = stamp;
                            v
                        };
                        let ds = dsp * pool_scale;
                        match cfg.reset {
                            ResetMode::SubtractThreshold => dw + g * (ds - th * dw),
                            ResetMode::ToZero => dw * (1.0 - s) + g * (ds - u * dw),
                        }
                    } else {
                        match cfg.reset {
                            ResetMode::SubtractThreshold => dw,
                            ResetMode::ToZero => dw * (1.0 - s),
                        }
                    };
                    dv[i] = du;
                    d_here[i] = du;
                }

                // Unmark spike values.
                for &(idx, _) in &tape.emissions[if_idx][t] {
                    scratch.s_val[if_idx][idx as usize] = 0.0;
                }
            } else {
                // Readout block: constant adjoint.
                scratch.d_out[k].copy_from_slice(dr);
            }

            // 2. Bias gradient.
            let (bias_idx, bias_len) = bias_index(&block.sink);
            {
                let gb = &mut grads.tensors[bias_idx];
                let d = &scratch.d_out[k];
                for row in d.chunks_exact(bias_len) {
                    for (g, &dv) in gb.iter_mut().zip(row) {
                        *g += dv;
                    }
                }
            }

            // 3. Weight gradient from this block's input emissions.
            let d = std::mem::take(&mut scratch.d_out[k]);
            if k == 0 {
                for (c, tensor) in input.iter().enumerate() {
                    let step = tensor.step(t);
                    for (pos, &count) in step.iter().enumerate() {
                        if count == 0 {
                            continue;
                        }
                        let idx = pos * channels + c;
                        let (p, scale) = match &block.pre_pool {
                            Some(pool) => (pool.route(idx), pool.scale),
                            None => (idx, 1.0),
                        };
                        accumulate_weight_grad(
                            &block.sink,
                            grads,
                            &d,
                            p,
                            f64::from(count) * scale,
                        );
                    }
                }
            } else {
                let (up_if, _) = blocks[k - 1].iff.expect("hidden block has an IF");
                for &(idx, s) in &tape.emissions[up_if][t] {
                    let idx = idx as usize;
                    let (p, scale) = match &block.pre_pool {
                        Some(pool) => (pool.route(idx), pool.scale),
                        None => (idx, 1.0),
                    };
                    accumulate_weight_grad(&block.sink, grads, &d, p, f64::from(s) * scale);
                }
            }
            scratch.d_out[k] = d;
        }
    }
    Ok(())
}
