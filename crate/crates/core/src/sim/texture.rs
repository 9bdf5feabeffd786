//! Procedural texture height fields.
//!
//! Each class is a deterministic height function over a 100 mm panel:
//! a sum of oriented sinusoidal gratings plus band-limited noise built
//! from a fixed number of seeded sinusoidal components. Both parts are
//! smooth with analytic gradients, which the sensor model relies on.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::hash::mix_seed;

pub const TEXTURE_COUNT: u8 = 10;

/// Bump when any standard spectrum below changes; datasets record it so
/// classes stay reproducible across tool versions.
pub const TEXTURE_TABLE_VERSION: u32 = 1;

const TEXTURE_LABELS: [&str; TEXTURE_COUNT as usize] = [
    "Acrylic",
    "Fashion Fabric",
    "Cotton",
    "Nylon",
    "Fur",
    "Wood",
    "Mesh",
    "Felt",
    "Wool",
    "Canvas",
];

/// One oriented sinusoidal grating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingComponent {
    pub freq_cycles_per_mm: f64,
    pub amplitude_mm: f64,
    pub orientation_rad: f64,
}

/// Band-limited noise: `components` sinusoids with log-uniform frequencies
/// in `[freq_lo, freq_hi]` and seeded random orientations/phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub amplitude_mm: f64,
    pub freq_lo_cycles_per_mm: f64,
    pub freq_hi_cycles_per_mm: f64,
    pub components: usize,
}

impl NoiseSpec {
    pub const fn none() -> Self {
        Self { amplitude_mm: 0.0, freq_lo_cycles_per_mm: 0.1, freq_hi_cycles_per_mm: 1.0, components: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
struct NoiseComponent {
    wave_x: f64, // 2*pi*f*cos(theta)
    wave_y: f64,
    phase: f64,
    amplitude: f64,
}

/// A deterministic texture height field over the square panel.
#[derive(Debug, Clone)]
pub struct TextureField {
    pub texture_id: u8,
    pub label: String,
    pub spectrum: Vec<GratingComponent>,
    pub noise: NoiseSpec,
    pub noise_seed: u64,
    pub extent_mm: f64,
    noise_components: Vec<NoiseComponent>,
}

impl TextureField {
    pub fn new(
        texture_id: u8,
        label: impl Into<String>,
        spectrum: Vec<GratingComponent>,
        noise: NoiseSpec,
        noise_seed: u64,
        extent_mm: f64,
    ) -> Result<Self> {
        if spectrum.iter().any(|g| g.amplitude_mm < 0.0) || noise.amplitude_mm < 0.0 {
            return Err(SimError::InvalidManifest("negative texture amplitude".into()));
        }
        let noise_components = Self::make_noise(&noise, noise_seed);
        Ok(Self {
            texture_id,
            label: label.into(),
            spectrum,
            noise,
            noise_seed,
            extent_mm,
            noise_components,
        })
    }

    fn make_noise(spec: &NoiseSpec, seed: u64) -> Vec<NoiseComponent> {
        if spec.components == 0 || spec.amplitude_mm == 0.0 {
            return Vec::new();
        }
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, 0x7e78));
        let per_amp = spec.amplitude_mm / (spec.components as f64).sqrt();
        let (lo, hi) = (spec.freq_lo_cycles_per_mm, spec.freq_hi_cycles_per_mm);
        (0..spec.components)
            .map(|_| {
                let f = lo * (hi / lo).powf(rng.random::<f64>());
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                let phase = rng.random::<f64>() * std::f64::consts::TAU;
                let w = std::f64::consts::TAU * f;
                NoiseComponent {
                    wave_x: w * theta.cos(),
                    wave_y: w * theta.sin(),
                    phase,
                    amplitude: per_amp,
                }
            })
            .collect()
    }

    /// The standard ten-class table.
    pub fn standard(texture_id: u8) -> Result<Self> {
        if texture_id == 0 || texture_id > TEXTURE_COUNT {
            return Err(SimError::UnknownTexture(texture_id));
        }
        let label = TEXTURE_LABELS[usize::from(texture_id) - 1];
        let g = |f: f64, a: f64, o: f64| GratingComponent {
            freq_cycles_per_mm: f,
            amplitude_mm: a,
            orientation_rad: o,
        };
        let deg = |d: f64| d.to_radians();
        let (spectrum, noise) = match texture_id {
            // Smooth sheet: barely any relief.
            1 => (vec![], NoiseSpec {
                amplitude_mm: 0.002,
                freq_lo_cycles_per_mm: 0.05,
                freq_hi_cycles_per_mm: 0.3,
                components: 8,
            }),
            // Medium two-way weave.
            2 => (
                vec![g(0.9, 0.018, 0.0), g(0.9, 0.018, deg(90.0))],
                NoiseSpec { amplitude_mm: 0.003, freq_lo_cycles_per_mm: 0.5, freq_hi_cycles_per_mm: 2.0, components: 8 },
            ),
            // Fine weave.
            3 => (
                vec![g(1.6, 0.010, 0.0), g(1.6, 0.010, deg(90.0))],
                NoiseSpec { amplitude_mm: 0.004, freq_lo_cycles_per_mm: 1.0, freq_hi_cycles_per_mm: 3.0, components: 8 },
            ),
            // Very fine, near-isotropic.
            4 => (
                vec![g(3.0, 0.005, 0.0), g(3.0, 0.005, deg(90.0))],
                NoiseSpec { amplitude_mm: 0.002, freq_lo_cycles_per_mm: 2.0, freq_hi_cycles_per_mm: 5.0, components: 8 },
            ),
            // Long soft pile: broadband low-frequency noise only.
            5 => (vec![], NoiseSpec {
                amplitude_mm: 0.030,
                freq_lo_cycles_per_mm: 0.15,
                freq_hi_cycles_per_mm: 0.9,
                components: 16,
            }),
            // Oriented grain plus harmonic.
            6 => (
                vec![g(0.45, 0.022, deg(12.0)), g(0.9, 0.008, deg(12.0))],
                NoiseSpec { amplitude_mm: 0.004, freq_lo_cycles_per_mm: 0.2, freq_hi_cycles_per_mm: 1.0, components: 8 },
            ),
            // Coarse open grid.
            7 => (
                vec![g(0.4, 0.040, 0.0), g(0.4, 0.040, deg(90.0))],
                NoiseSpec { amplitude_mm: 0.002, freq_lo_cycles_per_mm: 0.3, freq_hi_cycles_per_mm: 1.0, components: 8 },
            ),
            // Matted fibers: mid-band noise with a faint grating.
            8 => (
                vec![g(1.2, 0.004, deg(45.0))],
                NoiseSpec { amplitude_mm: 0.012, freq_lo_cycles_per_mm: 0.6, freq_hi_cycles_per_mm: 2.0, components: 16 },
            ),
            // Coarse fibers at an angle.
            9 => (
                vec![g(0.6, 0.018, deg(45.0))],
                NoiseSpec { amplitude_mm: 0.020, freq_lo_cycles_per_mm: 0.25, freq_hi_cycles_per_mm: 0.8, components: 16 },
            ),
            // Strong square weave.
            10 => (
                vec![g(0.75, 0.028, 0.0), g(0.75, 0.028, deg(90.0))],
                NoiseSpec { amplitude_mm: 0.005, freq_lo_cycles_per_mm: 0.5, freq_hi_cycles_per_mm: 1.5, components: 8 },
            ),
            _ => unreachable!(),
        };
        // Per-class noise seed keeps classes distinct even for identical specs.
        Self::new(
            texture_id,
            label,
            spectrum,
            noise,
            mix_seed(0x7ab1e, u64::from(texture_id)),
            super::PANEL_SIDE_MM,
        )
    }

    pub fn label_of(texture_id: u8) -> Result<&'static str> {
        if texture_id == 0 || texture_id > TEXTURE_COUNT {
            return Err(SimError::UnknownTexture(texture_id));
        }
        Ok(TEXTURE_LABELS[usize::from(texture_id) - 1])
    }

    fn check_extent(&self, u_mm: f64, v_mm: f64) -> Result<()> {
        if u_mm < 0.0 || v_mm < 0.0 || u_mm > self.extent_mm || v_mm > self.extent_mm {
            return Err(SimError::OutOfExtent { u_mm, v_mm, side: self.extent_mm });
        }
        Ok(())
    }

    /// Height in mm at panel position `(u, v)` mm.
    pub fn height(&self, u_mm: f64, v_mm: f64) -> Result<f64> {
        self.check_extent(u_mm, v_mm)?;
        Ok(self.sample(u_mm, v_mm).0)
    }

    /// Height and analytic gradient `(dh/du, dh/dv)` at `(u, v)` mm.
    pub fn height_and_gradient(&self, u_mm: f64, v_mm: f64) -> Result<(f64, f64, f64)> {
        self.check_extent(u_mm, v_mm)?;
        Ok(self.sample(u_mm, v_mm))
    }

    fn sample(&self, u: f64, v: f64) -> (f64, f64, f64) {
        let mut h = 0.0;
        let mut gu = 0.0;
        let mut gv = 0.0;
        for g in &self.spectrum {
            let w = std::f64::consts::TAU * g.freq_cycles_per_mm;
            let (s, c) = (w * (u * g.orientation_rad.cos() + v * g.orientation_rad.sin())).sin_cos();
            h += g.amplitude_mm * s;
            let d = g.amplitude_mm * w * c;
            gu += d * g.orientation_rad.cos();
            gv += d * g.orientation_rad.sin();
        }
        for n in &self.noise_components {
            let (s, c) = (n.wave_x * u + n.wave_y * v + n.phase).sin_cos();
            h += n.amplitude * s;
            gu += n.amplitude * n.wave_x * c;
            gv += n.amplitude * n.wave_y * c;
        }
        (h, gu, gv)
    }
}
