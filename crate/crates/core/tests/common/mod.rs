//! Shared helpers for validation suites: random small networks and inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use tacspike::aer::SpikeTensor;
use tacspike::snn::{
    compile, IfConfig, InputShape, LayerSpec, NetworkSpec, Parameters, Plan, ResetMode,
};

pub struct RandomCase {
    pub plan: Plan,
    pub params: Parameters,
    pub input: Vec<SpikeTensor>,
}

/// A random small network with random weights and a random sparse input.
/// Shapes cycle through linear-only, single-conv and double-conv stacks;
/// both reset modes and floor settings appear.
pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let t_steps = rng.random_range(3..=10);
    let channels = rng.random_range(1..=2);
    let side = rng.random_range(4..=8usize);
    let classes = rng.random_range(2..=5);
    let reset = if rng.random_bool(0.5) { ResetMode::SubtractThreshold } else { ResetMode::ToZero };
    let lower_bound = if rng.random_bool(0.7) { Some(0.0) } else { None };
    let ifc = IfConfig { threshold: 1.0, reset, lower_bound };

    let variant = rng.random_range(0..3);
    let layers = match variant {
        0 => vec![
            LayerSpec::Linear { out_features: rng.random_range(3..=10) },
            LayerSpec::If(ifc),
            LayerSpec::Linear { out_features: classes },
        ],
        1 => {
            let k = rng.random_range(2..=3);
            let pad = rng.random_range(0..=1);
            let mut layers = vec![
                LayerSpec::Conv2d {
                    out_channels: rng.random_range(2..=4),
                    kernel: k,
                    stride: 1,
                    padding: pad,
                },
                LayerSpec::If(ifc),
            ];
            // Pool only when the conv output divides evenly.
            let out = side + 2 * pad - k + 1;
            if out % 2 == 0 {
                layers.push(LayerSpec::Pool {
                    kind: tacspike::snn::PoolKind::Avg,
                    window: 2,
                });
            }
            layers.push(LayerSpec::Linear { out_features: classes });
            layers
        }
        _ => {
            // Fixed 8x8 double-conv stack.
            vec![
                LayerSpec::Conv2d { out_channels: 3, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::If(ifc),
                LayerSpec::Pool { kind: tacspike::snn::PoolKind::Avg, window: 2 },
                LayerSpec::Conv2d { out_channels: 4, kernel: 2, stride: 1, padding: 0 },
                LayerSpec::If(ifc),
                LayerSpec::Linear { out_features: rng.random_range(4..=8) },
                LayerSpec::If(ifc),
                LayerSpec::Linear { out_features: classes },
            ]
        }
    };
    let side = if variant == 2 { 8 } else { side };
    let spec = NetworkSpec {
        input: InputShape { t_steps, channels, height: side, width: side },
        classes,
        layers,
    };
    let plan = compile(&spec).expect("random spec compiles");
    let mut params = Parameters::init(&plan, seed ^ 0xabcd);
    // Rescale weights and add small biases so spikes actually happen.
    for t in &mut params.tensors {
        if t.name.ends_with(".weight") {
            for v in &mut t.data {
                *v *= 2.5;
            }
        } else {
            for v in &mut t.data {
                *v = (rng.random::<f32>() - 0.4) * 0.2;
            }
        }
    }

    let density = rng.random_range(0.05..0.4);
    let input = (0..channels)
        .map(|_| {
            let mut tensor = SpikeTensor::zeros(t_steps, side, side, 1000);
            for t in 0..t_steps {
                for y in 0..side {
                    for x in 0..side {
                        if rng.random_bool(density) {
                            *tensor.at_mut(t, y, x) = rng.random_range(1..=3);
                        }
                    }
                }
            }
            tensor
        })
        .collect();

    RandomCase { plan, params, input }
}
