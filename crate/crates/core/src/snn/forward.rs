//! Event-driven time-stepped execution.
//!
//! Spatial activations are flattened channels-last: unit `(c, y, x)` of a
//! `(C, H, W)` map lives at index `(y*W + x)*C + c`. Only nonzero inputs
//! and emitted spikes are propagated into the weighted stages; membrane
//! updates are dense. Membranes and accumulators are f64 while weights stay
//! f32, so products are exact and summation order is the only rounding
//! source — and that order is fixed.

use super::config::{IfConfig, Plan, PoolKind, ResetMode, Stage};
use super::params::Parameters;
use super::surrogate::SurrogateSpec;
use super::{Result, SnnError};
use crate::aer::SpikeTensor;

/// How IF nonlinearities are executed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpikeMode {
    /// Binary threshold spikes.
    Hard,
    /// Smooth relaxation: spike values are the surrogate primitive of the
    /// membrane overshoot. Used to verify gradients.
    Relaxed(SurrogateSpec),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions {
    /// Record per-step spike unit indices for every source (tests/debug).
    pub record_positions: bool,
    /// Record per-step membrane snapshots of every IF stage (tests/debug).
    pub record_membranes: bool,
}

/// Activity record of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Spike source names: "input", then one per IF stage.
    pub source_names: Vec<String>,
    /// Spikes emitted per source per time step.
    pub spike_counts: Vec<Vec<u32>>,
    /// Names of the weighted (conv/linear) stages.
    pub weighted_names: Vec<String>,
    /// Synaptic operations accumulated per weighted stage.
    pub synops: Vec<u64>,
    /// Per-source per-step spiking unit indices (input units repeat per
    /// count), when requested.
    pub spike_positions: Option<Vec<Vec<Vec<u32>>>>,
    /// Per-IF per-step membrane snapshots, when requested.
    pub membranes: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Readout activation accumulated over all executed steps.
    pub scores: Vec<f64>,
    /// Readout activation of each step; `scores` is its running total.
    pub per_step_readout: Vec<Vec<f64>>,
    pub trace: ForwardTrace,
}

/// Per-layer and total synaptic operation counts of a forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynopsReport {
    pub per_layer: Vec<(String, u64)>,
    pub total: u64,
}

pub fn count_synops(trace: &ForwardTrace) -> SynopsReport {
    let per_layer: Vec<(String, u64)> = trace
        .weighted_names
        .iter()
        .cloned()
        .zip(trace.synops.iter().copied())
        .collect();
    let total = trace.synops.iter().sum();
    SynopsReport { per_layer, total }
}

/// One integrate-and-fire step over a dense layer.
///
/// Integrates `current` into `v`, emits a binary spike wherever the
/// membrane reaches the threshold (>= comparison), applies the configured
/// reset and optional floor, and appends spiking unit indices to `spikes`.
pub fn if_step(
    v: &mut [f64],
    current: &[f64],
    cfg: &IfConfig,
    spikes: &mut Vec<u32>,
) -> Result<()> {
    if v.len() != current.len() {
        return Err(SnnError::ShapeMismatch(format!(
            "membrane {} vs current {}",
            v.len(),
            current.len()
        )));
    }
    cfg.validate()?;
    if current.iter().any(|x| !x.is_finite()) {
        return Err(SnnError::NonFinite("input current".into()));
    }
    for i in 0..v.len() {
        let u = v[i] + current[i];
        let spiked = u >= cfg.threshold;
        let mut w = if spiked {
            match cfg.reset {
                ResetMode::SubtractThreshold => u - cfg.threshold,
                ResetMode::ToZero => 0.0,
            }
        } else {
            u
        };
        if let Some(floor) = cfg.lower_bound {
            if w < floor {
                w = floor;
            }
        }
        v[i] = w;
        if spiked {
            spikes.push(i as u32);
        }
    }
    Ok(())
}

/// Training tape: everything the backward pass needs, recorded per IF stage
/// and per step during a forward run. Flat preallocated storage so repeated
/// samples reuse the same buffers.
#[derive(Debug, Default)]
pub(crate) struct Tape {
    pub t_steps: usize,
    /// Units per IF stage.
    pub sizes: Vec<usize>,
    /// Pre-reset membrane values `u = v + I`: per IF, flat `[t*size]`.
    pub u_pre: Vec<Vec<f64>>,
    /// Emitted spike values per IF per step: (unit, value). Binary mode
    /// emits value 1; relaxed mode emits the fractional relaxation.
    pub emissions: Vec<Vec<Vec<(u32, f32)>>>,
}

impl Tape {
    fn prepare(&mut self, sizes: &[usize], t_steps: usize) {
        if self.sizes != sizes || self.t_steps != t_steps {
            self.sizes = sizes.to_vec();
            self.t_steps = t_steps;
            self.u_pre = sizes.iter().map(|&n| vec![0.0; n * t_steps]).collect();
            self.emissions = sizes.iter().map(|_| vec![Vec::new(); t_steps]).collect();
        } else {
            for layer in &mut self.emissions {
                for step in layer.iter_mut() {
                    step.clear();
                }
            }
        }
    }

    #[inline]
    pub fn u(&self, if_idx: usize, t: usize) -> &[f64] {
        let n = self.sizes[if_idx];
        &self.u_pre[if_idx][t * n..(t + 1) * n]
    }
}

pub(crate) struct EngineConfig<'a> {
    pub mode: SpikeMode,
    pub opts: ForwardOptions,
    pub tape: Option<&'a mut Tape>,
}

/// Validate the input tensors against the plan and return `(t_steps, plane)`.
fn check_input(plan: &Plan, input: &[SpikeTensor]) -> Result<usize> {
    let shape = plan.input();
    if input.len() != shape.channels {
        return Err(SnnError::ShapeMismatch(format!(
            "{} input channels, spec wants {}",
            input.len(),
            shape.channels
        )));
    }
    let t = input.first().map_or(0, |c| c.t_steps());
    for c in input {
        if c.h() != shape.height || c.w() != shape.width {
            return Err(SnnError::ShapeMismatch(format!(
                "input {}x{}, spec wants {}x{}",
                c.h(),
                c.w(),
                shape.height,
                shape.width
            )));
        }
        if c.t_steps() != t {
            return Err(SnnError::ShapeMismatch("input channels differ in length".into()));
        }
    }
    if t > shape.t_steps {
        return Err(SnnError::ShapeMismatch(format!(
            "input has {t} steps, spec allows at most {}",
            shape.t_steps
        )));
    }
    Ok(t)
}

/// Enumerate valid (kernel offset, output position) pairs covering input
/// coordinate `pos` along one axis, avoiding per-tap division.
#[inline]
pub(crate) fn for_each_tap(
    pos: usize,
    pad: usize,
    kernel: usize,
    stride: usize,
    out: usize,
    mut f: impl FnMut(usize, usize),
) {
    let shifted = pos + pad;
    let (mut k, mut o) = if stride == 1 {
        (0, shifted)
    } else {
        let k = shifted % stride;
        (k, (shifted - k) / stride)
    };
    loop {
        if k >= kernel {
            break;
        }
        if o < out {
            f(k, o);
        }
        k += stride;
        if o == 0 {
            break;
        }
        o -= 1;
    }
}

fn stage_out_len(stage: &Stage) -> usize {
    match stage {
        Stage::Conv(c) => c.out_c * c.out_h * c.out_w,
        Stage::Pool(p) => p.channels * p.out_h * p.out_w,
        Stage::Linear(l) => l.out_features,
        Stage::If(_) => 0,
    }
}

pub(crate) fn run_forward(
    plan: &Plan,
    params: &Parameters,
    input: &[SpikeTensor],
    engine: EngineConfig<'_>,
) -> Result<ForwardOutput> {
    params.matches(plan)?;
    params.check_finite()?;
    let t_steps = check_input(plan, input)?;
    let channels = plan.input().channels;
    let plane = plan.input().height * plan.input().width;
    let classes = plan.classes();

    let mut dense: Vec<Vec<f64>> =
        plan.stages.iter().map(|s| vec![0.0; stage_out_len(s)]).collect();
    // Weighted-stage buffers start each step as their (expanded) bias.
    let bias_init: Vec<Option<Vec<f64>>> = plan
        .stages
        .iter()
        .map(|s| match s {
            Stage::Conv(c) => {
                let bias = params.tensor(c.weight + 1);
                let mut v = Vec::with_capacity(c.out_c * c.out_h * c.out_w);
                for _ in 0..c.out_h * c.out_w {
                    v.extend(bias.iter().map(|&b| f64::from(b)));
                }
                Some(v)
            }
            Stage::Linear(l) => {
                Some(params.tensor(l.weight + 1).iter().map(|&b| f64::from(b)).collect())
            }
            _ => None,
        })
        .collect();
    let mut membranes: Vec<Vec<f64>> = plan
        .stages
        .iter()
        .filter_map(|s| match s {
            Stage::If(f) => Some(vec![0.0; f.size]),
            _ => None,
        })
        .collect();

    let n_sources = plan.sources.len();
    let n_weighted = plan.weighted_names.len();
    let mut trace = ForwardTrace {
        source_names: plan.sources.iter().map(|s| s.name.clone()).collect(),
        spike_counts: vec![Vec::with_capacity(t_steps); n_sources],
        weighted_names: plan.weighted_names.clone(),
        synops: vec![0; n_weighted],
        spike_positions: engine
            .opts
            .record_positions
            .then(|| vec![Vec::with_capacity(t_steps); n_sources]),
        membranes: engine
            .opts
            .record_membranes
            .then(|| vec![Vec::with_capacity(t_steps); membranes.len()]),
    };

    let mut tape = engine.tape;
    if let Some(t) = tape.as_deref_mut() {
        let sizes: Vec<usize> = membranes.iter().map(Vec::len).collect();
        t.prepare(&sizes, t_steps);
    }

    let mut scores = vec![0.0f64; classes];
    let mut per_step_readout = Vec::with_capacity(t_steps);
    let mut cur: Vec<(u32, f64)> = Vec::with_capacity(1024);
    let mut next: Vec<(u32, f64)> = Vec::with_capacity(1024);

    for t in 0..t_steps {
        // Input spikes of this step.
        cur.clear();
        let mut in_count = 0u32;
        {
            let source = &plan.sources[0];
            let sink = source.sink_widx;
            for (c, tensor) in input.iter().enumerate() {
                let step = tensor.step(t);
                for (pos, &count) in step.iter().enumerate() {
                    if count == 0 {
                        continue;
                    }
                    let idx = (pos * channels + c) as u32;
                    cur.push((idx, f64::from(count)));
                    in_count += count;
                    trace.synops[sink] += u64::from(count) * source.fanout[idx as usize];
                }
            }
            debug_assert!(plane * channels >= cur.len());
            trace.spike_counts[0].push(in_count);
            if let Some(pos) = trace.spike_positions.as_mut() {
                let mut units = Vec::new();
                for &(idx, val) in cur.iter() {
                    for _ in 0..val as u32 {
                        units.push(idx);
                    }
                }
                pos[0].push(units);
            }
        }

        for (si, stage) in plan.stages.iter().enumerate() {
            match stage {
                Stage::Conv(cstage) => {
                    let buf = &mut dense[si];
                    buf.copy_from_slice(bias_init[si].as_ref().expect("conv bias"));
                    let w = params.tensor(cstage.weight);
                    let k = cstage.kernel;
                    let (out_c, out_h, out_w) = (cstage.out_c, cstage.out_h, cstage.out_w);
                    for &(idx, val) in cur.iter() {
                        let idx = idx as usize;
                        let c = idx % cstage.in_c;
                        let pos = idx / cstage.in_c;
                        let (iy, ix) = (pos / cstage.in_w, pos % cstage.in_w);
                        for_each_tap(iy, cstage.padding, k, cstage.stride, out_h, |ky, oy| {
                            for_each_tap(ix, cstage.padding, k, cstage.stride, out_w, |kx, ox| {
                                let wrow = &w[((c * k + ky) * k + kx) * out_c..][..out_c];
                                let orow = &mut buf[(oy * out_w + ox) * out_c..][..out_c];
                                for (o, wv) in orow.iter_mut().zip(wrow) {
                                    *o += f64::from(*wv) * val;
                                }
                            });
                        });
                    }
                }
                Stage::Linear(lstage) => {
                    let buf = &mut dense[si];
                    buf.copy_from_slice(bias_init[si].as_ref().expect("linear bias"));
                    let w = params.tensor(lstage.weight);
                    let nf = lstage.out_features;
                    for &(idx, val) in cur.iter() {
                        let wrow = &w[idx as usize * nf..][..nf];
                        for (o, wv) in buf.iter_mut().zip(wrow) {
                            *o += f64::from(*wv) * val;
                        }
                    }
                }
                Stage::Pool(pstage) => {
                    let buf = &mut dense[si];
                    buf.fill(0.0);
                    let scale = match pstage.kind {
                        PoolKind::Sum => 1.0,
                        PoolKind::Avg => 1.0 / (pstage.window * pstage.window) as f64,
                    };
                    let ch = pstage.channels;
                    for &(idx, val) in cur.iter() {
                        let idx = idx as usize;
                        let c = idx % ch;
                        let pos = idx / ch;
                        let (y, x) = (pos / pstage.in_w, pos % pstage.in_w);
                        let o = ((y / pstage.window) * pstage.out_w + x / pstage.window) * ch + c;
                        buf[o] += val * scale;
                    }
                    next.clear();
                    for (i, &v) in buf.iter().enumerate() {
                        if v != 0.0 {
                            next.push((i as u32, v));
                        }
                    }
                    std::mem::swap(&mut cur, &mut next);
                }
                Stage::If(fstage) => {
                    let v = &mut membranes[fstage.if_idx];
                    let pre = &dense[si - 1];
                    debug_assert_eq!(v.len(), pre.len());
                    let cfg = &fstage.cfg;
                    let th = cfg.threshold;
                    next.clear();

                    if let Some(tp) = tape.as_deref_mut() {
                        let n = v.len();
                        let dst = &mut tp.u_pre[fstage.if_idx][t * n..(t + 1) * n];
                        for ((d, &a), &b) in dst.iter_mut().zip(v.iter()).zip(pre) {
                            *d = a + b;
                        }
                    }
                    let floor = cfg.lower_bound.unwrap_or(f64::NEG_INFINITY);

                    match engine.mode {
                        SpikeMode::Hard => {
                            for i in 0..v.len() {
                                let u = v[i] + pre[i];
                                let spiked = u >= th;
                                let w = if spiked {
                                    match cfg.reset {
                                        ResetMode::SubtractThreshold => u - th,
                                        ResetMode::ToZero => 0.0,
                                    }
                                } else {
                                    u
                                };
                                v[i] = if w < floor { floor } else { w };
                                if spiked {
                                    next.push((i as u32, 1.0));
                                }
                            }
                        }
                        SpikeMode::Relaxed(surrogate) => {
                            for i in 0..v.len() {
                                let u = v[i] + pre[i];
                                let s = surrogate.primitive(u - th);
                                let w = match cfg.reset {
                                    ResetMode::SubtractThreshold => u - th * s,
                                    ResetMode::ToZero => u * (1.0 - s),
                                };
                                v[i] = if w < floor { floor } else { w };
                                if s != 0.0 {
                                    next.push((i as u32, s));
                                }
                            }
                        }
                    }

                    let source_idx = fstage.if_idx + 1;
                    let source = &plan.sources[source_idx];
                    if matches!(engine.mode, SpikeMode::Hard) {
                        let sink = source.sink_widx;
                        for &(idx, _) in next.iter() {
                            trace.synops[sink] += source.fanout[idx as usize];
                        }
                    }
                    trace.spike_counts[source_idx].push(next.len() as u32);
                    if let Some(pos) = trace.spike_positions.as_mut() {
                        pos[source_idx].push(next.iter().map(|&(i, _)| i).collect());
                    }
                    if let Some(mem) = trace.membranes.as_mut() {
                        mem[fstage.if_idx].push(v.clone());
                    }
                    if let Some(tp) = tape.as_deref_mut() {
                        tp.emissions[fstage.if_idx][t]
                            .extend(next.iter().map(|&(i, s)| (i, s as f32)));
                    }
                    std::mem::swap(&mut cur, &mut next);
                }
            }
        }

        // The last stage is the linear readout; its buffer is this step's
        // readout activation.
        let readout = dense.last().expect("nonempty stage list");
        for (s, r) in scores.iter_mut().zip(readout) {
            *s += *r;
        }
        per_step_readout.push(readout.clone());
    }

    Ok(ForwardOutput { scores, per_step_readout, trace })
}

/// Run the network over a (possibly clipped) spike tensor stack, with fresh
/// membranes. Deterministic: two runs on the same input are bit-identical.
pub fn forward(plan: &Plan, params: &Parameters, input: &[SpikeTensor]) -> Result<ForwardOutput> {
    forward_with(plan, params, input, ForwardOptions::default())
}

pub fn forward_with(
    plan: &Plan,
    params: &Parameters,
    input: &[SpikeTensor],
    opts: ForwardOptions,
) -> Result<ForwardOutput> {
    run_forward(plan, params, input, EngineConfig { mode: SpikeMode::Hard, opts, tape: None })
}

/// Argmax class over the time-summed readout, 1-based. Ties resolve to the
/// lowest class id.
pub fn predict(plan: &Plan, params: &Parameters, input: &[SpikeTensor]) -> Result<usize> {
    let out = forward(plan, params, input)?;
    Ok(argmax_class(&out.scores))
}

/// 1-based argmax with lowest-id tie breaking.
pub fn argmax_class(scores: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{compile, NetworkSpec, Parameters};

    #[test]
    fn if_step_hand_stepped_sequence() {
        // Constant 0.4 drive, threshold 1.0, subtract reset: spikes on
        // steps 3, 5, 8, 10 (1-based).
        let cfg = IfConfig::default();
        let mut v = vec![0.0];
        let current = vec![0.4];
        let mut fired = Vec::new();
        for step in 1..=10 {
            let mut spikes = Vec::new();
            if_step(&mut v, &current, &cfg, &mut spikes).unwrap();
            if !spikes.is_empty() {
                fired.push(step);
            }
        }
        assert_eq!(fired, vec![3, 5, 8, 10]);
    }

    #[test]
    fn if_step_threshold_boundary_spikes() {
        let cfg = IfConfig::default();
        let mut v = vec![0.0];
        let mut spikes = Vec::new();
        if_step(&mut v, &[1.0], &cfg, &mut spikes).unwrap();
        assert_eq!(spikes, vec![0]);
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn if_step_zero_input_no_spike() {
        let cfg = IfConfig::default();
        let mut v = vec![0.0, 0.0];
        let mut spikes = Vec::new();
        if_step(&mut v, &[0.0, 0.0], &cfg, &mut spikes).unwrap();
        assert!(spikes.is_empty());
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn if_step_reset_modes_and_floor() {
        let cfg = IfConfig { reset: ResetMode::SubtractThreshold, ..Default::default() };
        let mut v = vec![0.0];
        let mut spikes = Vec::new();
        if_step(&mut v, &[2.3], &cfg, &mut spikes).unwrap();
        assert!((v[0] - 1.3).abs() < 1e-12);

        let cfg = IfConfig { reset: ResetMode::ToZero, ..Default::default() };
        let mut v = vec![0.0];
        spikes.clear();
        if_step(&mut v, &[2.3], &cfg, &mut spikes).unwrap();
        assert_eq!(v[0], 0.0);

        // Floor clamps negative drift.
        let cfg = IfConfig::default();
        let mut v = vec![0.0];
        spikes.clear();
        if_step(&mut v, &[-0.7], &cfg, &mut spikes).unwrap();
        assert_eq!(v[0], 0.0);
        let cfg = IfConfig { lower_bound: None, ..Default::default() };
        let mut v = vec![0.0];
        spikes.clear();
        if_step(&mut v, &[-0.7], &cfg, &mut spikes).unwrap();
        assert_eq!(v[0], -0.7);
    }

    #[test]
    fn if_step_rejects_bad_input() {
        let cfg = IfConfig::default();
        let mut v = vec![0.0];
        let mut spikes = Vec::new();
        assert!(if_step(&mut v, &[0.0, 1.0], &cfg, &mut spikes).is_err());
        assert!(if_step(&mut v, &[f64::NAN], &cfg, &mut spikes).is_err());
    }

    fn tiny_plan() -> (crate::snn::Plan, Parameters) {
        let spec = NetworkSpec::default_arch(50, 1, 10);
        let plan = compile(&spec).unwrap();
        let params = Parameters::init(&plan, 3);
        (plan, params)
    }

    fn random_tensor(seed: u64, t: usize) -> SpikeTensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let mut tensor = SpikeTensor::zeros(t, 20, 20, 1000);
        for _ in 0..(t * 10) {
            let ti = rng.random_range(0..t);
            let y = rng.random_range(0..20);
            let x = rng.random_range(0..20);
            *tensor.at_mut(ti, y, x) += 1;
        }
        tensor
    }

    #[test]
    fn all_zero_input_zero_biases_means_zero_scores() {
        let (plan, params) = tiny_plan();
        let input = SpikeTensor::zeros(50, 20, 20, 1000);
        let out = forward(&plan, &params, std::slice::from_ref(&input)).unwrap();
        assert!(out.scores.iter().all(|&s| s == 0.0));
        assert_eq!(count_synops(&out.trace).total, 0);
    }

    #[test]
    fn forward_is_deterministic() {
        let (plan, params) = tiny_plan();
        let input = random_tensor(11, 50);
        let a = forward(&plan, &params, std::slice::from_ref(&input)).unwrap();
        let b = forward(&plan, &params, std::slice::from_ref(&input)).unwrap();
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.trace.synops, b.trace.synops);
        assert_eq!(a.per_step_readout, b.per_step_readout);
    }

    #[test]
    fn single_spike_tiny_weights_counts_first_layer_synops() {
        let (plan, mut params) = tiny_plan();
        for t in &mut params.tensors {
            for v in &mut t.data {
                *v = if t.name.ends_with(".weight") { 1e-4 } else { 0.0 };
            }
        }
        let mut input = SpikeTensor::zeros(50, 20, 20, 1000);
        *input.at_mut(0, 10, 10) = 1;
        let out = forward(&plan, &params, std::slice::from_ref(&input)).unwrap();
        // No unit can reach threshold 1.0, so everything past conv1 is silent
        // and the readout stays at its zero bias.
        assert!(out.scores.iter().all(|&s| s == 0.0));
        let report = count_synops(&out.trace);
        assert_eq!(report.per_layer[0].1, 3 * 3 * 16);
        assert_eq!(report.total, 3 * 3 * 16);
    }

    #[test]
    fn predict_tie_breaks_low() {
        assert_eq!(argmax_class(&[5.0, 0.0, 0.0]), 1);
        assert_eq!(argmax_class(&[1.0, 1.0, 1.0]), 1);
        assert_eq!(argmax_class(&[0.0, 2.0, 2.0]), 2);
    }

    #[test]
    fn causality_clip_prefix_matches() {
        let (plan, params) = tiny_plan();
        let input = random_tensor(5, 50);
        let full = forward(&plan, &params, std::slice::from_ref(&input)).unwrap();
        for steps in [1usize, 7, 25, 49] {
            let clipped = crate::aer::clip(&input, steps as u32).unwrap();
            let part = forward(&plan, &params, std::slice::from_ref(&clipped)).unwrap();
            assert_eq!(part.per_step_readout.as_slice(), &full.per_step_readout[..steps]);
        }
    }
}
