//! Naive reference implementation used for validation.
//!
//! A dense per-neuron, per-step interpreter of the same plan and parameter
//! layout, written with straightforward nested loops and no sparse
//! propagation. Validation suites compare its spike trains and readout
//! against the event-driven engine, and its brute-force fanout enumeration
//! against the engine's synop accounting.

use super::config::{Plan, PoolKind, ResetMode, Stage};
use super::forward::ForwardTrace;
use super::params::Parameters;
use super::{Result, SnnError};
use crate::aer::SpikeTensor;

#[derive(Debug, Clone)]
pub struct DenseOutput {
    /// Spiking unit indices per source (input first) per step.
    pub spikes: Vec<Vec<Vec<u32>>>,
    pub per_step_readout: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

/// Dense per-neuron forward pass.
pub fn dense_forward(
    plan: &Plan,
    params: &Parameters,
    input: &[SpikeTensor],
) -> Result<DenseOutput> {
    params.matches(plan)?;
    let shape = plan.input();
    if input.len() != shape.channels {
        return Err(SnnError::ShapeMismatch("channel count".into()));
    }
    let t_steps = input.first().map_or(0, |c| c.t_steps());
    let channels = shape.channels;

    let n_if = plan.if_count();
    let mut membranes: Vec<Vec<f64>> = Vec::with_capacity(n_if);
    for stage in &plan.stages {
        if let Stage::If(f) = stage {
            membranes.push(vec![0.0; f.size]);
        }
    }

    let mut spikes: Vec<Vec<Vec<u32>>> = vec![Vec::with_capacity(t_steps); n_if + 1];
    let mut per_step_readout = Vec::with_capacity(t_steps);
    let mut scores = vec![0.0f64; plan.classes()];

    for t in 0..t_steps {
        // Dense input activation, channels-last.
        let mut act: Vec<f64> =
            vec![0.0; shape.channels * shape.height * shape.width];
        let mut in_units = Vec::new();
        for (c, tensor) in input.iter().enumerate() {
            let step = tensor.step(t);
            for (pos, &count) in step.iter().enumerate() {
                act[pos * channels + c] = f64::from(count);
                for _ in 0..count {
                    in_units.push((pos * channels + c) as u32);
                }
            }
        }
        spikes[0].push(in_units);

        let mut if_i = 0usize;
        for stage in &plan.stages {
            match stage {
                Stage::Conv(c) => {
                    let w = params.tensor(c.weight);
                    let bias = params.tensor(c.weight + 1);
                    let mut out = vec![0.0f64; c.out_c * c.out_h * c.out_w];
                    for oy in 0..c.out_h {
                        for ox in 0..c.out_w {
                            for oc in 0..c.out_c {
                                let mut acc = f64::from(bias[oc]);
                                for ic in 0..c.in_c {
                                    for ky in 0..c.kernel {
                                        for kx in 0..c.kernel {
                                            let iy = oy * c.stride + ky;
                                            let ix = ox * c.stride + kx;
                                            if iy < c.padding || ix < c.padding {
                                                continue;
                                            }
                                            let (iy, ix) = (iy - c.padding, ix - c.padding);
                                            if iy >= c.in_h || ix >= c.in_w {
                                                continue;
                                            }
                                            let wv = w[((ic * c.kernel + ky) * c.kernel + kx)
                                                * c.out_c
                                                + oc];
                                            acc += f64::from(wv)
                                                * act[(iy * c.in_w + ix) * c.in_c + ic];
                                        }
                                    }
                                }
                                out[(oy * c.out_w + ox) * c.out_c + oc] = acc;
                            }
                        }
                    }
                    act = out;
                }
                Stage::Pool(p) => {
                    let mut out = vec![0.0f64; p.channels * p.out_h * p.out_w];
                    for oy in 0..p.out_h {
                        for ox in 0..p.out_w {
                            for ch in 0..p.channels {
                                let mut acc = 0.0;
                                for wy in 0..p.window {
                                    for wx in 0..p.window {
                                        let iy = oy * p.window + wy;
                                        let ix = ox * p.window + wx;
                                        acc += act[(iy * p.in_w + ix) * p.channels + ch];
                                    }
                                }
                                if p.kind == PoolKind::Avg {
                                    acc /= (p.window * p.window) as f64;
                                }
                                out[(oy * p.out_w + ox) * p.channels + ch] = acc;
                            }
                        }
                    }
                    act = out;
                }
                Stage::Linear(l) => {
                    let w = params.tensor(l.weight);
                    let bias = params.tensor(l.weight + 1);
                    let mut out = vec![0.0f64; l.out_features];
                    for (o, slot) in out.iter_mut().enumerate() {
                        let mut acc = f64::from(bias[o]);
                        for (i, &a) in act.iter().enumerate() {
                            acc += f64::from(w[i * l.out_features + o]) * a;
                        }
                        *slot = acc;
                    }
                    act = out;
                }
                Stage::If(f) => {
                    let v = &mut membranes[if_i];
                    let mut fired = Vec::new();
                    let mut out = vec![0.0f64; f.size];
                    for i in 0..f.size {
                        let u = v[i] + act[i];
                        let spiked = u >= f.cfg.threshold;
                        let mut w = if spiked {
                            match f.cfg.reset {
                                ResetMode::SubtractThreshold => u - f.cfg.threshold,
                                ResetMode::ToZero => 0.0,
                            }
                        } else {
                            u
                        };
                        if let Some(floor) = f.cfg.lower_bound {
                            if w < floor {
                                w = floor;
                            }
                        }
                        v[i] = w;
                        if spiked {
                            fired.push(i as u32);
                            out[i] = 1.0;
                        }
                    }
                    spikes[if_i + 1].push(fired);
                    if_i += 1;
                    act = out;
                }
            }
        }

        for (s, r) in scores.iter_mut().zip(&act) {
            *s += *r;
        }
        per_step_readout.push(act);
    }

    Ok(DenseOutput { spikes, per_step_readout, scores })
}

/// Brute-force synop recount from recorded spike positions: for every spike
/// of every source, enumerate the weight applications it triggers in its
/// sink stage by scanning all output positions.
pub fn brute_force_synops(plan: &Plan, trace: &ForwardTrace) -> Result<Vec<u64>> {
    let positions = trace
        .spike_positions
        .as_ref()
        .ok_or_else(|| SnnError::InvalidArgument("trace lacks spike positions".into()))?;
    let mut synops = vec![0u64; plan.weighted_names.len()];
    for (source, steps) in plan.sources.iter().zip(positions) {
        // Walk to the sink stage, collecting pool windows.
        let mut pools = Vec::new();
        let mut sink = None;
        let start = plan
            .stages
            .iter()
            .position(|s| matches!(s, Stage::If(f) if format!("if{}", f.if_idx + 1) == source.name))
            .map(|i| i + 1)
            .unwrap_or(0);
        for stage in &plan.stages[start..] {
            match stage {
                Stage::Pool(p) => pools.push(p.window),
                s @ (Stage::Conv(_) | Stage::Linear(_)) => {
                    sink = Some(s.clone());
                    break;
                }
                Stage::If(_) => break,
            }
        }
        let Some(sink) = sink else { continue };
        // Shape of the source map (needed for conv sinks).
        let shape = source_shape(plan, &source.name);
        for step in steps {
            for &unit in step {
                let n = match &sink {
                    Stage::Linear(l) => l.out_features as u64,
                    Stage::Conv(c) => {
                        let (sc, _sh, sw) = shape.expect("conv sink needs a spatial source");
                        let pos = unit as usize / sc;
                        let (mut y, mut x) = (pos / sw, pos % sw);
                        for w in &pools {
                            y /= w;
                            x /= w;
                        }
                        let mut count = 0u64;
                        for oy in 0..c.out_h {
                            for ox in 0..c.out_w {
                                for ky in 0..c.kernel {
                                    for kx in 0..c.kernel {
                                        let iy = oy * c.stride + ky;
                                        let ix = ox * c.stride + kx;
                                        if iy < c.padding || ix < c.padding {
                                            continue;
                                        }
                                        if iy - c.padding == y && ix - c.padding == x {
                                            count += c.out_c as u64;
                                        }
                                    }
                                }
                            }
                        }
                        count
                    }
                    _ => 0,
                };
                synops[source.sink_widx] += n;
            }
        }
    }
    Ok(synops)
}

fn source_shape(plan: &Plan, name: &str) -> Option<(usize, usize, usize)> {
    if name == "input" {
        let s = plan.input();
        return Some((s.channels, s.height, s.width));
    }
    let mut shape = Some((plan.input().channels, plan.input().height, plan.input().width));
    for stage in &plan.stages {
        match stage {
            Stage::Conv(c) => shape = Some((c.out_c, c.out_h, c.out_w)),
            Stage::Pool(p) => shape = Some((p.channels, p.out_h, p.out_w)),
            Stage::Linear(_) => shape = None,
            Stage::If(f) => {
                if format!("if{}", f.if_idx + 1) == name {
                    return shape;
                }
            }
        }
    }
    shape
}
