//! Network specification and compilation into an executable plan.

use serde::{Deserialize, Serialize};

use super::{Result, SnnError};
use crate::hash::config_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// Subtract the threshold from the membrane on a spike (keeps overshoot).
    SubtractThreshold,
    /// Reset the membrane to zero on a spike.
    ToZero,
}

/// Integrate-and-fire neuron configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IfConfig {
    pub threshold: f64,
    pub reset: ResetMode,
    /// Optional membrane floor applied after integration and reset.
    pub lower_bound: Option<f64>,
}

impl Default for IfConfig {
    fn default() -> Self {
        Self { threshold: 1.0, reset: ResetMode::SubtractThreshold, lower_bound: Some(0.0) }
    }
}

impl IfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(SnnError::InvalidSpec(format!(
                "threshold {} must be positive",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Sum,
    Avg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d { out_channels: usize, kernel: usize, stride: usize, padding: usize },
    Pool { kind: PoolKind, window: usize },
    Linear { out_features: usize },
    If(IfConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub t_steps: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

/// Architecture description: input shape, class count and the layer stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// The default classifier: two conv/IF/pool blocks, two linear/IF
    /// blocks and a linear readout over `classes` outputs.
    pub fn default_arch(t_steps: usize, channels: usize, classes: usize) -> Self {
        let ifd = IfConfig::default();
        NetworkSpec {
            input: InputShape { t_steps, channels, height: 20, width: 20 },
            classes,
            layers: vec![
                LayerSpec::Conv2d { out_channels: 16, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::If(ifd),
                LayerSpec::Pool { kind: PoolKind::Avg, window: 2 },
                LayerSpec::Conv2d { out_channels: 32, kernel: 3, stride: 1, padding: 0 },
                LayerSpec::If(ifd),
                LayerSpec::Pool { kind: PoolKind::Avg, window: 2 },
                LayerSpec::Linear { out_features: 256 },
                LayerSpec::If(ifd),
                LayerSpec::Linear { out_features: 64 },
                LayerSpec::If(ifd),
                LayerSpec::Linear { out_features: classes },
            ],
        }
    }

    /// Stable fingerprint of the architecture, stored in parameter files.
    pub fn spec_hash(&self) -> u64 {
        config_hash(self)
    }
}

/// Resolved stage list with concrete shapes.
#[derive(Debug, Clone)]
pub enum Stage {
    Conv(ConvStage),
    Pool(PoolStage),
    Linear(LinearStage),
    If(IfStage),
}

#[derive(Debug, Clone)]
pub struct ConvStage {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// Index of the weight tensor in `Parameters`; bias is `weight + 1`.
    pub weight: usize,
    /// Position among weighted stages (for synop attribution).
    pub widx: usize,
}

#[derive(Debug, Clone)]
pub struct PoolStage {
    pub kind: PoolKind,
    pub window: usize,
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

#[derive(Debug, Clone)]
pub struct LinearStage {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: usize,
    pub widx: usize,
}

#[derive(Debug, Clone)]
pub struct IfStage {
    pub size: usize,
    pub cfg: IfConfig,
    /// Position among IF stages.
    pub if_idx: usize,
}

/// Definition of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDef {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamDef {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

/// A spike source: the input tensor or an IF stage output. `fanout[idx]` is
/// the number of weight applications one spike of unit `idx` triggers in
/// the next weighted stage (routing through any pooling in between).
#[derive(Debug, Clone)]
pub struct SourceInfo {
    pub name: String,
    pub size: usize,
    /// Weighted-stage index the spikes feed.
    pub sink_widx: usize,
    pub fanout: Vec<u64>,
}

/// Compiled network: validated stage sequence, parameter layout, and
/// per-source fanout tables.
#[derive(Debug, Clone)]
pub struct Plan {
    pub spec: NetworkSpec,
    pub spec_hash: u64,
    pub stages: Vec<Stage>,
    pub param_defs: Vec<ParamDef>,
    pub sources: Vec<SourceInfo>,
    pub weighted_names: Vec<String>,
}

impl Plan {
    pub fn input(&self) -> &InputShape {
        &self.spec.input
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    pub fn if_count(&self) -> usize {
        self.stages.iter().filter(|s| matches!(s, Stage::If(_))).count()
    }
}

/// What a stage hands to the next one while validating the layer pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Carry {
    /// Spatial spike/current map of `(c, h, w)`.
    Map { c: usize, h: usize, w: usize, from_if: bool },
    /// Flat feature vector.
    Vector { len: usize, from_if: bool },
}

/// Validate a spec and resolve every shape.
pub fn compile(spec: &NetworkSpec) -> Result<Plan> {
    if spec.classes == 0 {
        return Err(SnnError::InvalidSpec("zero classes".into()));
    }
    if spec.input.channels == 0 || spec.input.height == 0 || spec.input.width == 0 {
        return Err(SnnError::InvalidSpec("empty input shape".into()));
    }
    let mut stages = Vec::with_capacity(spec.layers.len());
    let mut param_defs = Vec::new();
    let mut carry = Carry::Map {
        c: spec.input.channels,
        h: spec.input.height,
        w: spec.input.width,
        from_if: false,
    };
    let mut conv_n = 0usize;
    let mut fc_n = 0usize;
    let mut widx = 0usize;
    let mut if_idx = 0usize;
    let mut prev_weighted = false; // previous stage was conv/linear awaiting an IF
    let mut seen_linear = false;

    for (i, layer) in spec.layers.iter().enumerate() {
        match layer {
            LayerSpec::Conv2d { out_channels, kernel, stride, padding } => {
                if prev_weighted {
                    return Err(SnnError::InvalidSpec(format!(
                        "layer {i}: conv must follow an IF activation of the previous layer"
                    )));
                }
                if seen_linear {
                    return Err(SnnError::InvalidSpec(format!(
                        "layer {i}: conv after linear stage is not supported"
                    )));
                }
                let (c, h, w) = match carry {
                    Carry::Map { c, h, w, .. } => (c, h, w),
                    Carry::Vector { .. } => {
                        return Err(SnnError::InvalidSpec(format!(
                            "layer {i}: conv needs a spatial input"
                        )))
                    }
                };
                if *out_channels == 0 || *kernel == 0 || *stride == 0 {
                    return Err(SnnError::InvalidSpec(format!("layer {i}: zero conv size")));
                }
                let padded_h = h + 2 * padding;
                let padded_w = w + 2 * padding;
                if padded_h < *kernel || padded_w < *kernel {
                    return Err(SnnError::InvalidSpec(format!(
                        "layer {i}: kernel {kernel} larger than padded input {padded_h}x{padded_w}"
                    )));
                }
                let out_h = (padded_h - kernel) / stride + 1;
                let out_w = (padded_w - kernel) / stride + 1;
                conv_n += 1;
                let weight = param_defs.len();
                param_defs.push(ParamDef {
                    name: format!("conv{conv_n}.weight"),
                    shape: vec![c, *kernel, *kernel, *out_channels],
                });
                param_defs.push(ParamDef {
                    name: format!("conv{conv_n}.bias"),
                    shape: vec![*out_channels],
                });
                stages.push(Stage::Conv(ConvStage {
                    in_c: c,
                    in_h: h,
                    in_w: w,
                    out_c: *out_channels,
                    out_h,
                    out_w,
                    kernel: *kernel,
                    stride: *stride,
                    padding: *padding,
                    weight,
                    widx,
                }));
                widx += 1;
                carry = Carry::Map { c: *out_channels, h: out_h, w: out_w, from_if: false };
                prev_weighted = true;
            }
            LayerSpec::Pool { kind, window } => {
                if prev_weighted {
                    return Err(SnnError::InvalidSpec(format!(
                        "layer {i}: pool must follow an IF activation"
                    )));
                }
                let (c, h, w, from_if) = match carry {
                    Carry::Map { c, h, w, from_if } => (c, h, w, from_if),
                    Carry::Vector { .. } => {
                        return Err(SnnError::InvalidSpec(format!(
                            "layer {i}: pool needs a spatial input"
                        )))
                    }
                };
                if !from_if {
                    return Err(SnnError::InvalidSpec(format!(
                        "layer {i}: pool must consume spikes, not raw input"
                    )));
                }
                if *window == 0 || h % window != 0 || w % window != 0 {
                    return Err(SnnError::InvalidSpec(format!(
                        "layer {i}: pool window {window} does not divide {h}x{w}"
                    )));
                }
                stages.push(Stage::Pool(PoolStage {
                    kind: *kind,
                    window: *window,
                    channels: c,
                    in_h: h,
                    in_w: w,
                    out_h: h / window,
                    out_w: w / window,
                }));
                carry = Carry::Map { c, h: h / window, w: w / window, from_if: true };
            }
            LayerSpec::Linear { out_features } => {
                if prev_weighted {
                    return Err(SnnError::InvalidSpec(format!(
                        "layer {i}: linear must follow an IF activation of the previous layer"
                    )));
                }
                if *out_features == 0 {
                    return Err(SnnError::InvalidSpec(format!("layer {i}: zero linear size")));
                }
                let in_features = match carry {
                    Carry::Map { c, h, w, .. } => c * h * w,
                    Carry::Vector { len, .. } => len,
                };
                fc_n += 1;
                let weight = param_defs.len();
                param_defs.push(ParamDef {
                    name: format!("fc{fc_n}.weight"),
                    shape: vec![in_features, *out_features],
                });
                param_defs
                    .push(ParamDef { name: format!("fc{fc_n}.bias"), shape: vec![*out_features] });
                stages.push(Stage::Linear(LinearStage {
                    in_features,
                    out_features: *out_features,
                    weight,
                    widx,
                }));
                widx += 1;
                carry = Carry::Vector { len: *out_features, from_if: false };
                prev_weighted = true;
                seen_linear = true;
            }
            LayerSpec::If(cfg) => {
                cfg.validate()?;
                if !prev_weighted {
                    return Err(SnnError::InvalidSpec(format!(
                        "layer {i}: IF must directly follow a conv or linear layer"
                    )));
                }
                let size = match carry {
                    Carry::Map { c, h, w, .. } => c * h * w,
                    Carry::Vector { len, .. } => len,
                };
                stages.push(Stage::If(IfStage { size, cfg: *cfg, if_idx }));
                if_idx += 1;
                carry = match carry {
                    Carry::Map { c, h, w, .. } => Carry::Map { c, h, w, from_if: true },
                    Carry::Vector { len, .. } => Carry::Vector { len, from_if: true },
                };
                prev_weighted = false;
            }
        }
    }

    // The readout must be a linear layer without an IF on top.
    match stages.last() {
        Some(Stage::Linear(l)) if l.out_features == spec.classes => {}
        Some(Stage::Linear(l)) => {
            return Err(SnnError::InvalidSpec(format!(
                "readout has {} outputs, expected {} classes",
                l.out_features, spec.classes
            )));
        }
        _ => {
            return Err(SnnError::InvalidSpec(
                "network must end in a linear readout layer".into(),
            ))
        }
    }

    let weighted_names: Vec<String> = param_defs
        .iter()
        .filter(|d| d.name.ends_with(".weight"))
        .map(|d| d.name.trim_end_matches(".weight").to_string())
        .collect();

    let sources = build_sources(&stages, &spec.input, &weighted_names)?;

    Ok(Plan {
        spec: spec.clone(),
        spec_hash: spec.spec_hash(),
        stages,
        param_defs,
        sources,
        weighted_names,
    })
}

/// Valid kernel placements covering input coordinate `y` along one axis.
fn placements(y: usize, pad: usize, kernel: usize, stride: usize, out: usize) -> u64 {
    let mut n = 0u64;
    for ky in 0..kernel {
        let shifted = y + pad;
        if shifted < ky {
            continue;
        }
        let num = shifted - ky;
        if num % stride == 0 && num / stride < out {
            n += 1;
        }
    }
    n
}

/// Fanout tables: for every spike source, route positions through pooling
/// to the next weighted stage and count the weight applications per unit.
fn build_sources(
    stages: &[Stage],
    input: &InputShape,
    weighted_names: &[String],
) -> Result<Vec<SourceInfo>> {
    let mut sources = Vec::new();
    // Source start points: index into `stages` right after the source.
    let mut starts: Vec<(String, usize, usize, Option<(usize, usize, usize)>)> = Vec::new();
    starts.push((
        "input".into(),
        input.channels * input.height * input.width,
        0,
        Some((input.channels, input.height, input.width)),
    ));
    let mut shape: Option<(usize, usize, usize)> = Some((input.channels, input.height, input.width));
    for (i, stage) in stages.iter().enumerate() {
        match stage {
            Stage::Conv(c) => shape = Some((c.out_c, c.out_h, c.out_w)),
            Stage::Pool(p) => shape = Some((p.channels, p.out_h, p.out_w)),
            Stage::Linear(l) => shape = Some((l.out_features, 1, 1)),
            Stage::If(f) => {
                starts.push((format!("if{}", f.if_idx + 1), f.size, i + 1, shape));
            }
        }
    }

    for (name, size, start, shape) in starts {
        // Walk forward to the next weighted stage, composing pool routing.
        let mut scale_pools: Vec<usize> = Vec::new();
        let mut sink = None;
        for stage in &stages[start..] {
            match stage {
                Stage::Pool(p) => scale_pools.push(p.window),
                Stage::Conv(c) => {
                    sink = Some((Stage::Conv(c.clone()), c.widx));
                    break;
                }
                Stage::Linear(l) => {
                    sink = Some((Stage::Linear(l.clone()), l.widx));
                    break;
                }
                Stage::If(_) => {
                    return Err(SnnError::InvalidSpec(
                        "IF directly after a spike source".into(),
                    ))
                }
            }
        }
        let Some((sink_stage, sink_widx)) = sink else {
            // Readout is always weighted; every source has a sink.
            return Err(SnnError::InvalidSpec(format!("source {name} feeds nothing")));
        };
        let mut fanout = vec![0u64; size];
        match sink_stage {
            Stage::Linear(l) => {
                for f in fanout.iter_mut() {
                    *f = l.out_features as u64;
                }
            }
            Stage::Conv(c) => {
                let (sc, sh, sw) = shape.ok_or_else(|| {
                    SnnError::InvalidSpec(format!("source {name} lacks a spatial shape"))
                })?;
                debug_assert_eq!(sc * sh * sw, size);
                // Spatial maps are flattened channels-last: (y*w + x)*c + ch.
                for idx in 0..size {
                    let pos = idx / sc;
                    let (mut y, mut x) = (pos / sw, pos % sw);
                    for w in &scale_pools {
                        y /= w;
                        x /= w;
                    }
                    let ny = placements(y, c.padding, c.kernel, c.stride, c.out_h);
                    let nx = placements(x, c.padding, c.kernel, c.stride, c.out_w);
                    fanout[idx] = ny * nx * c.out_c as u64;
                }
            }
            _ => unreachable!(),
        }
        let _ = &weighted_names;
        sources.push(SourceInfo { name, size, sink_widx, fanout });
    }
    Ok(sources)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_arch_compiles() {
        let spec = NetworkSpec::default_arch(1000, 1, 10);
        let plan = compile(&spec).unwrap();
        assert_eq!(plan.if_count(), 4);
        assert_eq!(plan.weighted_names, vec!["conv1", "conv2", "fc1", "fc2", "fc3"]);
        // 20x20 -> conv(16,3,p1) 20x20 -> pool 10x10 -> conv(32,3,p0) 8x8 -> pool 4x4
        let Stage::Linear(fc1) = &plan.stages[6] else { panic!("expected fc1") };
        assert_eq!(fc1.in_features, 32 * 4 * 4);
        assert_eq!(plan.sources.len(), 5);
        assert_eq!(plan.sources[0].name, "input");
        // Interior input pixel fans into 3*3*16 applications of conv1.
        let interior = 10 * 20 + 10;
        assert_eq!(plan.sources[0].fanout[interior], 144);
        // Corner pixel: only 2x2 placements with padding 1.
        assert_eq!(plan.sources[0].fanout[0], 4 * 16);
        // Last IF fans into the 10-way readout.
        assert!(plan.sources[4].fanout.iter().all(|&f| f == 10));
    }

    #[test]
    fn rejects_bad_patterns() {
        let ifd = IfConfig::default();
        // Missing IF after conv.
        let spec = NetworkSpec {
            input: InputShape { t_steps: 10, channels: 1, height: 8, width: 8 },
            classes: 2,
            layers: vec![
                LayerSpec::Conv2d { out_channels: 2, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::Linear { out_features: 2 },
            ],
        };
        assert!(compile(&spec).is_err());
        // Pool directly on raw input.
        let spec = NetworkSpec {
            input: InputShape { t_steps: 10, channels: 1, height: 8, width: 8 },
            classes: 2,
            layers: vec![
                LayerSpec::Pool { kind: PoolKind::Avg, window: 2 },
                LayerSpec::Linear { out_features: 2 },
            ],
        };
        assert!(compile(&spec).is_err());
        // Readout size mismatch.
        let spec = NetworkSpec {
            input: InputShape { t_steps: 10, channels: 1, height: 8, width: 8 },
            classes: 3,
            layers: vec![
                LayerSpec::Linear { out_features: 4 },
                LayerSpec::If(ifd),
                LayerSpec::Linear { out_features: 2 },
            ],
        };
        assert!(compile(&spec).is_err());
        // Zero threshold.
        let spec = NetworkSpec {
            input: InputShape { t_steps: 10, channels: 1, height: 8, width: 8 },
            classes: 2,
            layers: vec![
                LayerSpec::Linear { out_features: 4 },
                LayerSpec::If(IfConfig { threshold: 0.0, ..ifd }),
                LayerSpec::Linear { out_features: 2 },
            ],
        };
        assert!(compile(&spec).is_err());
    }

    #[test]
    fn spec_hash_changes_with_arch() {
        let a = NetworkSpec::default_arch(1000, 1, 10);
        let mut b = a.clone();
        b.layers[0] = LayerSpec::Conv2d { out_channels: 8, kernel: 3, stride: 1, padding: 1 };
        assert_ne!(a.spec_hash(), b.spec_hash());
    }
}
