//! Rapidly-adapting marker sensor model.
//!
//! The sensor is a 20 mm membrane with 91 markers on a hexagonal lattice,
//! imaged by a camera that rotates with the sensor shell: marker pixel
//! positions are fixed in the frame while their panel positions follow the
//! pose. Marker responses are driven purely by change:
//!
//! ```text
//! rate_m = sat( contact(|z|) * [ gain * |grad_h(p_m) . v_tan,m|
//!                              + onset_gain * vsat(|v_z|) * (1 + beta * h_norm(p_m)) ] )
//! ```
//!
//! `contact` is zero out of contact and increases linearly with depth, so a
//! static pose produces exactly zero events. The `(1 + beta * h_norm)` term
//! couples normal-velocity transients to the local relief, so tapping
//! carries texture information through the spatial rate pattern. `vsat` and
//! `sat` are smooth, strictly increasing saturations of the transient drive
//! and the per-marker rate, keeping responses physical at high speeds.

use serde::{Deserialize, Serialize};

use super::{Pose, PoseVelocity, Result, SimError, TextureField};

/// Hexagonal lattice rings around the center marker: 1+6+12+18+24+30 = 91.
pub const MARKER_RINGS: usize = 5;
pub const MARKER_COUNT: usize = 91;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    /// Membrane aperture diameter in mm.
    pub aperture_mm: f64,
    /// Hexagonal lattice pitch in mm.
    pub marker_pitch_mm: f64,
    /// Imaging scale: pixels per mm of membrane.
    pub pixels_per_mm: f64,
    /// Radius of the pixel disk a marker's events land in.
    pub marker_pixel_radius: u16,
    /// Events per mm of texture height swept tangentially under a marker.
    pub gain_events_per_mm: f64,
    /// Events per mm of normal travel during contact transients.
    pub onset_gain_events_per_mm: f64,
    /// Normal-velocity saturation of the onset response, mm/s: the transient
    /// drive is `v_sat * tanh(|v_z| / v_sat)`.
    pub onset_v_sat_mm_s: f64,
    /// Strength of the texture coupling of the normal term, in [0, 1).
    pub texture_coupling: f64,
    /// Height normalization for the texture coupling, mm.
    pub height_ref_mm: f64,
    /// Soft per-marker rate cap, events/s.
    pub rate_cap_events_s: f64,
    /// Window of the finite-difference intensity change, ms. The rapid
    /// adaptation of the response: only changes inside this window count.
    pub adaptation_tau_ms: f64,
    /// Depth at which the contact factor saturates at 1.
    pub depth_cap_mm: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            aperture_mm: 20.0,
            marker_pitch_mm: 1.8,
            pixels_per_mm: 13.0,
            marker_pixel_radius: 6,
            gain_events_per_mm: 40.0,
            onset_gain_events_per_mm: 41.0,
            onset_v_sat_mm_s: 2.0,
            texture_coupling: 0.6,
            height_ref_mm: 0.05,
            rate_cap_events_s: 120.0,
            adaptation_tau_ms: 1.0,
            depth_cap_mm: super::MAX_DEPTH_MM,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if self.gain_events_per_mm <= 0.0
            || self.onset_gain_events_per_mm < 0.0
            || self.onset_v_sat_mm_s <= 0.0
            || self.rate_cap_events_s <= 0.0
            || self.adaptation_tau_ms <= 0.0
            || self.depth_cap_mm <= 0.0
            || self.height_ref_mm <= 0.0
        {
            return Err(SimError::InvalidSensor("non-positive gain or time constant".into()));
        }
        if !(0.0..1.0).contains(&self.texture_coupling) {
            return Err(SimError::InvalidSensor("texture coupling outside [0, 1)".into()));
        }
        let max_r = self.marker_pitch_mm * MARKER_RINGS as f64;
        if max_r >= self.aperture_mm / 2.0 {
            return Err(SimError::InvalidSensor(format!(
                "marker lattice radius {max_r} mm exceeds the {} mm aperture",
                self.aperture_mm
            )));
        }
        Ok(())
    }

    /// Marker offsets from the sensor center in the sensor frame, mm.
    /// Hexagonal lattice of `MARKER_RINGS` rings: exactly [`MARKER_COUNT`]
    /// markers, all strictly inside the aperture.
    pub fn marker_offsets_mm(&self) -> Vec<(f64, f64)> {
        let n = MARKER_RINGS as i32;
        let s = self.marker_pitch_mm;
        let mut out = Vec::with_capacity(MARKER_COUNT);
        for q in -n..=n {
            for r in (-n).max(-q - n)..=n.min(-q + n) {
                let x = s * (f64::from(q) + f64::from(r) / 2.0);
                let y = s * f64::from(r) * 3f64.sqrt() / 2.0;
                out.push((x, y));
            }
        }
        debug_assert_eq!(out.len(), MARKER_COUNT);
        out
    }

    /// Sensor radius used for footprint containment checks.
    pub fn footprint_radius_mm(&self) -> f64 {
        self.aperture_mm / 2.0
    }

    /// Contact area factor: 0 at zero depth, strictly increasing, 1 at the
    /// depth cap.
    pub fn contact_factor(&self, depth_mm: f64) -> f64 {
        (depth_mm / self.depth_cap_mm).clamp(0.0, 1.0)
    }

    fn saturate(&self, raw: f64) -> f64 {
        self.rate_cap_events_s * (raw / self.rate_cap_events_s).tanh()
    }
}

/// Panel position of each marker at a pose.
fn marker_panel_positions(sensor: &SensorModel, pose: &Pose) -> Vec<(f64, f64)> {
    let th = pose.theta_deg.to_radians();
    let (sin, cos) = th.sin_cos();
    sensor
        .marker_offsets_mm()
        .iter()
        .map(|&(mx, my)| {
            (pose.x_mm + mx * cos - my * sin, pose.y_mm + mx * sin + my * cos)
        })
        .collect()
}

/// Per-marker event rates (events/s) at a pose with a pose velocity.
pub fn event_rate_field(
    field: &TextureField,
    sensor: &SensorModel,
    pose: &Pose,
    vel: &PoseVelocity,
) -> Result<Vec<f64>> {
    if pose.z_mm >= 0.0 {
        return Ok(vec![0.0; MARKER_COUNT]);
    }
    let contact = sensor.contact_factor(-pose.z_mm);
    let omega = vel.omega_deg_s.to_radians();
    let th = pose.theta_deg.to_radians();
    let (sin, cos) = th.sin_cos();
    let mut rates = Vec::with_capacity(MARKER_COUNT);
    for &(mx, my) in &sensor.marker_offsets_mm() {
        let rx = mx * cos - my * sin;
        let ry = mx * sin + my * cos;
        let px = pose.x_mm + rx;
        let py = pose.y_mm + ry;
        let (h, gu, gv) = field.height_and_gradient(px, py)?;
        // Marker velocity over the panel: translation plus rotation sweep.
        let vx = vel.vx_mm_s - omega * ry;
        let vy = vel.vy_mm_s + omega * rx;
        let swept = (gu * vx + gv * vy).abs();
        let h_norm = (h / sensor.height_ref_mm).clamp(-1.0, 1.0);
        let v_eff = sensor.onset_v_sat_mm_s * (vel.vz_mm_s.abs() / sensor.onset_v_sat_mm_s).tanh();
        let onset = v_eff * (1.0 + sensor.texture_coupling * h_norm);
        let raw = contact
            * (sensor.gain_events_per_mm * swept + sensor.onset_gain_events_per_mm * onset);
        rates.push(sensor.saturate(raw));
    }
    Ok(rates)
}

/// Per-marker blob intensity proxy at a pose; the finite difference of this
/// over a step determines event polarity.
pub fn marker_intensities(
    field: &TextureField,
    sensor: &SensorModel,
    pose: &Pose,
) -> Result<Vec<f64>> {
    if pose.z_mm >= 0.0 {
        return Ok(vec![0.0; MARKER_COUNT]);
    }
    let contact = sensor.contact_factor(-pose.z_mm);
    let positions = marker_panel_positions(sensor, pose);
    let mut out = Vec::with_capacity(MARKER_COUNT);
    for (px, py) in positions {
        let h = field.height(px, py)?;
        let h_norm = (h / sensor.height_ref_mm).clamp(-1.0, 1.0);
        out.push(contact * (1.0 + sensor.texture_coupling * h_norm));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{MotionKind, MotionProfile};

    fn still_pose(z: f64) -> Pose {
        Pose { x_mm: 50.0, y_mm: 50.0, theta_deg: 0.0, z_mm: z }
    }

    const STILL: PoseVelocity =
        PoseVelocity { vx_mm_s: 0.0, vy_mm_s: 0.0, omega_deg_s: 0.0, vz_mm_s: 0.0 };

    #[test]
    fn marker_layout_has_91_inside_aperture() {
        let s = SensorModel::default();
        let offs = s.marker_offsets_mm();
        assert_eq!(offs.len(), MARKER_COUNT);
        for (x, y) in offs {
            assert!((x * x + y * y).sqrt() < s.aperture_mm / 2.0);
        }
        s.validate().unwrap();
    }

    #[test]
    fn zero_velocity_means_zero_rate() {
        let f = TextureField::standard(10).unwrap();
        let s = SensorModel::default();
        let rates = event_rate_field(&f, &s, &still_pose(-1.5), &STILL).unwrap();
        assert!(rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn no_contact_means_zero_rate() {
        let f = TextureField::standard(10).unwrap();
        let s = SensorModel::default();
        let fast = PoseVelocity { vx_mm_s: 30.0, vy_mm_s: 0.0, omega_deg_s: 30.0, vz_mm_s: -30.0 };
        let rates = event_rate_field(&f, &s, &still_pose(0.0), &fast).unwrap();
        assert!(rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn doubling_depth_increases_every_marker_rate() {
        let f = TextureField::standard(10).unwrap();
        let s = SensorModel::default();
        let vel = PoseVelocity { vx_mm_s: 30.0, vy_mm_s: 0.0, omega_deg_s: 0.0, vz_mm_s: -5.0 };
        let shallow = event_rate_field(&f, &s, &still_pose(-0.5), &vel).unwrap();
        let deep = event_rate_field(&f, &s, &still_pose(-1.0), &vel).unwrap();
        for (a, b) in shallow.iter().zip(&deep) {
            assert!(b > a, "expected strict increase, got {a} -> {b}");
        }
    }

    #[test]
    fn pure_rotation_leaves_center_marker_silent() {
        let f = TextureField::standard(10).unwrap();
        let s = SensorModel::default();
        let vel = PoseVelocity { vx_mm_s: 0.0, vy_mm_s: 0.0, omega_deg_s: 30.0, vz_mm_s: 0.0 };
        let rates = event_rate_field(&f, &s, &still_pose(-1.5), &vel).unwrap();
        // The center marker does not move under pure rotation.
        let offs = s.marker_offsets_mm();
        let center = offs.iter().position(|&(x, y)| x == 0.0 && y == 0.0).unwrap();
        assert_eq!(rates[center], 0.0);
        assert!(rates.iter().any(|&r| r > 0.0));
    }

    #[test]
    fn fixed_profiles_fit_on_panel() {
        let s = SensorModel::default();
        for kind in MotionKind::ALL {
            MotionProfile::fixed_condition(kind).validate(s.footprint_radius_mm()).unwrap();
        }
    }
}
