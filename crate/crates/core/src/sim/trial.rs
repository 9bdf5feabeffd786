//! Trial simulation: inhomogeneous Poisson event generation.
//!
//! The trial is integrated in 1 ms steps. Rates are evaluated at step
//! midpoints; per step and marker the event count is Poisson with mean
//! `rate * dt`, each event placed at a uniform pixel inside the marker's
//! fixed pixel disk with a uniform sub-step timestamp. Polarity is the sign
//! of the marker intensity change over the step (ties are on).
//!
//! Randomness is counter-based per (trial seed, marker), so trials are
//! reproducible regardless of execution order or parallelism.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::sensor::MARKER_COUNT;
use super::{event_rate_field, marker_intensities, MotionProfile, SensorModel, TextureField};
use super::{Result, SimError};
use crate::aer::{Event, EventStream, Polarity, SENSOR_HEIGHT, SENSOR_WIDTH};
use crate::hash::mix_seed;

/// Integration step, ms. Matches the downstream binning resolution.
const STEP_MS: f64 = 1.0;

/// One trial to simulate: texture, motion and the trial's random seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub texture_id: u8,
    pub motion: MotionProfile,
    pub seed: u64,
}

/// Draw from Poisson(mean) by Knuth's product method. Means here are well
/// below 1 per step, so the loop terminates after a couple of iterations.
fn poisson(rng: &mut ChaCha12Rng, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let limit = (-mean).exp();
    let mut k = 0u32;
    let mut p = 1.0;
    loop {
        p *= rng.random::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

struct MarkerFrame {
    center_px: (f64, f64),
}

fn marker_frames(sensor: &SensorModel) -> Vec<MarkerFrame> {
    let cx = f64::from(SENSOR_WIDTH) / 2.0;
    let cy = f64::from(SENSOR_HEIGHT) / 2.0;
    sensor
        .marker_offsets_mm()
        .iter()
        .map(|&(mx, my)| MarkerFrame {
            center_px: (cx + sensor.pixels_per_mm * mx, cy + sensor.pixels_per_mm * my),
        })
        .collect()
}

/// Simulate one trial into the native camera frame.
pub fn simulate_trial(
    field: &TextureField,
    sensor: &SensorModel,
    spec: &TrialSpec,
) -> Result<EventStream> {
    sensor.validate()?;
    spec.motion.validate(sensor.footprint_radius_mm())?;
    if field.texture_id != spec.texture_id {
        return Err(SimError::UnknownTexture(spec.texture_id));
    }
    let steps = spec.motion.duration_ms as usize;
    let duration_us = spec.motion.duration_ms * 1000;

    // Per-step rate and intensity tables, marker-major: [step][marker].
    let mut rates = Vec::with_capacity(steps);
    let mut intensities = Vec::with_capacity(steps + 1);
    intensities.push(marker_intensities(field, sensor, &spec.motion.pose(0.0)?)?);
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * STEP_MS;
        let pose = spec.motion.pose(t_mid)?;
        let vel = spec.motion.velocity(t_mid)?;
        rates.push(event_rate_field(field, sensor, &pose, &vel)?);
        let t_edge = (k as f64 + 1.0) * STEP_MS;
        intensities.push(marker_intensities(field, sensor, &spec.motion.pose(t_edge)?)?);
    }

    let frames = marker_frames(sensor);
    let radius = i32::from(sensor.marker_pixel_radius);
    let dt_s = STEP_MS / 1000.0;

    let mut events: Vec<Event> = Vec::new();
    for m in 0..MARKER_COUNT {
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(spec.seed, m as u64));
        let (cx, cy) = frames[m].center_px;
        for (k, step_rates) in rates.iter().enumerate() {
            let mean = step_rates[m] * dt_s;
            if mean <= 0.0 {
                continue;
            }
            let n = poisson(&mut rng, mean);
            if n == 0 {
                continue;
            }
            let delta = intensities[k + 1][m] - intensities[k][m];
            let polarity = if delta < 0.0 { Polarity::Off } else { Polarity::On };
            for _ in 0..n {
                let jitter: u32 = rng.random_range(0..1000);
                // Uniform pixel offset inside the marker disk.
                let (dx, dy) = loop {
                    let dx = rng.random_range(-radius..=radius);
                    let dy = rng.random_range(-radius..=radius);
                    if dx * dx + dy * dy <= radius * radius {
                        break (dx, dy);
                    }
                };
                let x = (cx.round() as i32 + dx) as u16;
                let y = (cy.round() as i32 + dy) as u16;
                events.push(Event { t_us: k as u32 * 1000 + jitter, x, y, polarity });
            }
        }
    }
    events.sort_by_key(|e| e.t_us);
    Ok(EventStream::new(SENSOR_WIDTH, SENSOR_HEIGHT, duration_us, events)?)
}

/// Analytic expectation of the total event count for a motion over a
/// texture: the integral of the rate field over the trial at the same
/// midpoint discretization the sampler uses.
pub fn expected_event_count(
    field: &TextureField,
    sensor: &SensorModel,
    motion: &MotionProfile,
) -> Result<f64> {
    sensor.validate()?;
    motion.validate(sensor.footprint_radius_mm())?;
    let steps = motion.duration_ms as usize;
    let dt_s = STEP_MS / 1000.0;
    let mut total = 0.0;
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * STEP_MS;
        let pose = motion.pose(t_mid)?;
        let vel = motion.velocity(t_mid)?;
        total += event_rate_field(field, sensor, &pose, &vel)?.iter().sum::<f64>() * dt_s;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::MotionKind;

    fn spec(kind: MotionKind, texture_id: u8, seed: u64) -> TrialSpec {
        TrialSpec { texture_id, motion: MotionProfile::fixed_condition(kind), seed }
    }

    #[test]
    fn zero_depth_tap_is_empty() {
        let field = TextureField::standard(3).unwrap();
        let sensor = SensorModel::default();
        let mut s = spec(MotionKind::Tap, 3, 1);
        s.motion.depth_mm = 0.0;
        let stream = simulate_trial(&field, &sensor, &s).unwrap();
        assert!(stream.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let field = TextureField::standard(7).unwrap();
        let sensor = SensorModel::default();
        let s = spec(MotionKind::SlideRotate, 7, 42);
        let a = simulate_trial(&field, &sensor, &s).unwrap();
        let b = simulate_trial(&field, &sensor, &s).unwrap();
        assert_eq!(a, b);
        let c = simulate_trial(&field, &sensor, &spec(MotionKind::SlideRotate, 7, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn slide_produces_events_in_marker_region() {
        let field = TextureField::standard(10).unwrap();
        let sensor = SensorModel::default();
        let stream = simulate_trial(&field, &sensor, &spec(MotionKind::Slide, 10, 5)).unwrap();
        assert!(stream.len() > 100, "slide trial too quiet: {}", stream.len());
        // All events inside the imaged membrane disk (plus blob radius).
        let max_r_px = sensor.pixels_per_mm * sensor.marker_pitch_mm * 5.0
            + f64::from(sensor.marker_pixel_radius)
            + 1.0;
        for ev in stream.events() {
            let dx = f64::from(ev.x) - 320.0;
            let dy = f64::from(ev.y) - 240.0;
            assert!((dx * dx + dy * dy).sqrt() <= max_r_px);
        }
    }

    #[test]
    fn monte_carlo_mean_matches_analytic_expectation() {
        let field = TextureField::standard(6).unwrap();
        let sensor = SensorModel::default();
        let motion = MotionProfile::fixed_condition(MotionKind::Slide);
        let expect = expected_event_count(&field, &sensor, &motion).unwrap();
        assert!(expect > 0.0);
        let runs = 100;
        let mut sum = 0.0;
        for seed in 0..runs {
            let s = TrialSpec { texture_id: 6, motion, seed };
            sum += simulate_trial(&field, &sensor, &s).unwrap().len() as f64;
        }
        let mean = sum / runs as f64;
        // Total count is Poisson(expect); the mean of `runs` draws has
        // sigma = sqrt(expect / runs).
        let sigma = (expect / runs as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * sigma,
            "MC mean {mean} vs analytic {expect} (3 sigma = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn analytic_expectation_strictly_increases_with_depth() {
        let field = TextureField::standard(2).unwrap();
        let sensor = SensorModel::default();
        for kind in [MotionKind::Slide, MotionKind::SlideRotate] {
            let mut prev = -1.0;
            for depth in [0.5, 1.0, 1.5, 2.0, 2.5] {
                let mut motion = MotionProfile::fixed_condition(kind);
                motion.depth_mm = depth;
                let e = expected_event_count(&field, &sensor, &motion).unwrap();
                assert!(e > prev, "expected count not increasing at depth {depth}");
                prev = e;
            }
        }
    }

    #[test]
    fn static_hold_after_motion_emits_nothing() {
        // A rotate profile with zero angular speed never moves: the pose is
        // constant (z = -depth) and the rate must be exactly zero.
        let field = TextureField::standard(9).unwrap();
        let sensor = SensorModel::default();
        let motion = MotionProfile {
            kind: MotionKind::Rotate,
            angular_speed_deg_s: 0.0,
            rotation_deg: 0.0,
            ..MotionProfile::fixed_condition(MotionKind::Rotate)
        };
        let stream =
            simulate_trial(&field, &sensor, &TrialSpec { texture_id: 9, motion, seed: 3 }).unwrap();
        assert!(stream.is_empty());
    }
}
