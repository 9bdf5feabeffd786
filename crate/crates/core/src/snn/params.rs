//! Parameter tensors and initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::config::{ParamDef, Plan};
use super::{Result, SnnError};

/// One named parameter tensor. Convolution weights are stored as
/// `[in_c, k, k, out_c]` and linear weights as `[in_features,
/// out_features]`; biases are flat `[out]` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// All learned tensors of a network, tied to its spec hash.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub spec_hash: u64,
    pub tensors: Vec<ParamTensor>,
}

/// Standard normal via Box-Muller; deterministic for a given generator.
fn normal(rng: &mut ChaCha12Rng) -> f64 {
    use rand::Rng;
    loop {
        let u1: f64 = rng.random();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.random();
        return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    }
}

impl Parameters {
    /// Kaiming-style fan-in initialization of weights; biases start at zero.
    pub fn init(plan: &Plan, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let tensors = plan
            .param_defs
            .iter()
            .map(|def| {
                let data = if def.name.ends_with(".bias") {
                    vec![0f32; def.len()]
                } else {
                    let fan_in: usize =
                        def.shape[..def.shape.len() - 1].iter().product::<usize>().max(1);
                    let std = (2.0 / fan_in as f64).sqrt();
                    (0..def.len()).map(|_| (normal(&mut rng) * std) as f32).collect()
                };
                ParamTensor { name: def.name.clone(), shape: def.shape.clone(), data }
            })
            .collect();
        Parameters { spec_hash: plan.spec_hash, tensors }
    }

    pub fn matches(&self, plan: &Plan) -> Result<()> {
        if self.spec_hash != plan.spec_hash {
            return Err(SnnError::IncompatibleModel {
                found: self.spec_hash,
                expected: plan.spec_hash,
            });
        }
        if self.tensors.len() != plan.param_defs.len() {
            return Err(SnnError::ShapeMismatch(format!(
                "{} tensors, plan expects {}",
                self.tensors.len(),
                plan.param_defs.len()
            )));
        }
        for (t, def) in self.tensors.iter().zip(&plan.param_defs) {
            if t.name != def.name || t.shape != def.shape || t.data.len() != def.len() {
                return Err(SnnError::ShapeMismatch(format!(
                    "tensor {} {:?} vs plan {} {:?}",
                    t.name, t.shape, def.name, def.shape
                )));
            }
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        for t in &self.tensors {
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(SnnError::NonFinite(format!("parameter tensor {}", t.name)));
            }
        }
        Ok(())
    }

    pub fn tensor(&self, idx: usize) -> &[f32] {
        &self.tensors[idx].data
    }

    fn find(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Convenience accessor for tests.
    pub fn get(&self, name: &str) -> Result<&ParamTensor> {
        self.find(name)
            .ok_or_else(|| SnnError::InvalidArgument(format!("no tensor named {name}")))
    }

    pub fn defs(&self) -> Vec<ParamDef> {
        self.tensors
            .iter()
            .map(|t| ParamDef { name: t.name.clone(), shape: t.shape.clone() })
            .collect()
    }
}
