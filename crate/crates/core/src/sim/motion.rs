//! Exploratory motion kinematics.
//!
//! Six motion kinds: three elementary (slide, tap, rotate) and three
//! compounds whose components run simultaneously. Poses are analytic in
//! time, with matching analytic velocities.

use serde::{Deserialize, Serialize};

use super::{Result, SimError};

/// Hard cap on contact depth; deeper contact risks sensor damage.
pub const MAX_DEPTH_MM: f64 = 3.0;
/// Side of the square texture panel.
pub const PANEL_SIDE_MM: f64 = 100.0;

// Fixed-condition protocol parameters.
pub const FIXED_DEPTH_MM: f64 = 1.5;
pub const FIXED_SLIDE_SPEED_MM_S: f64 = 30.0;
pub const FIXED_SLIDE_DISTANCE_MM: f64 = 30.0;
pub const FIXED_ANGULAR_SPEED_DEG_S: f64 = 30.0;
pub const FIXED_ROTATION_DEG: f64 = 30.0;
/// A pure tap descends slowly for the whole trial.
pub const PURE_TAP_SPEED_MM_S: f64 = 1.5;
/// Tap components inside compounds oscillate at the common motion speed.
pub const COMPOUND_TAP_SPEED_MM_S: f64 = 30.0;
pub const DEFAULT_DURATION_MS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Slide,
    Tap,
    Rotate,
    TapSlide,
    TapRotate,
    SlideRotate,
}

impl MotionKind {
    pub const ALL: [MotionKind; 6] = [
        MotionKind::Slide,
        MotionKind::Tap,
        MotionKind::Rotate,
        MotionKind::TapSlide,
        MotionKind::TapRotate,
        MotionKind::SlideRotate,
    ];

    pub fn has_slide(self) -> bool {
        matches!(self, MotionKind::Slide | MotionKind::TapSlide | MotionKind::SlideRotate)
    }

    pub fn has_tap(self) -> bool {
        matches!(self, MotionKind::Tap | MotionKind::TapSlide | MotionKind::TapRotate)
    }

    pub fn has_rotate(self) -> bool {
        matches!(self, MotionKind::Rotate | MotionKind::TapRotate | MotionKind::SlideRotate)
    }

    /// True for motions containing a tap component (used for convergence
    /// comparisons between motion families).
    pub fn is_tap_family(self) -> bool {
        self.has_tap()
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionKind::Slide => "slide",
            MotionKind::Tap => "tap",
            MotionKind::Rotate => "rotate",
            MotionKind::TapSlide => "tap_slide",
            MotionKind::TapRotate => "tap_rotate",
            MotionKind::SlideRotate => "slide_rotate",
        }
    }
}

/// Sensor pose over the panel: position of the sensor center in panel
/// coordinates, rotation about the sensor axis, and height of the nominal
/// contact plane (negative = indented into the texture).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x_mm: f64,
    pub y_mm: f64,
    pub theta_deg: f64,
    pub z_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseVelocity {
    pub vx_mm_s: f64,
    pub vy_mm_s: f64,
    pub omega_deg_s: f64,
    pub vz_mm_s: f64,
}

/// Kinematic description of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub kind: MotionKind,
    pub depth_mm: f64,
    pub slide_speed_mm_s: f64,
    pub slide_distance_mm: f64,
    pub angular_speed_deg_s: f64,
    pub rotation_deg: f64,
    pub tap_speed_mm_s: f64,
    pub duration_ms: u32,
    pub start_x_mm: f64,
    pub start_y_mm: f64,
}

impl MotionProfile {
    /// Fixed-condition protocol profile for a motion kind, starting at the
    /// panel position that keeps the whole motion centered.
    pub fn fixed_condition(kind: MotionKind) -> Self {
        let slide_dist = if kind.has_slide() { FIXED_SLIDE_DISTANCE_MM } else { 0.0 };
        Self {
            kind,
            depth_mm: FIXED_DEPTH_MM,
            slide_speed_mm_s: if kind.has_slide() { FIXED_SLIDE_SPEED_MM_S } else { 0.0 },
            slide_distance_mm: slide_dist,
            angular_speed_deg_s: if kind.has_rotate() { FIXED_ANGULAR_SPEED_DEG_S } else { 0.0 },
            rotation_deg: if kind.has_rotate() { FIXED_ROTATION_DEG } else { 0.0 },
            tap_speed_mm_s: if kind.has_tap() {
                if kind == MotionKind::Tap { PURE_TAP_SPEED_MM_S } else { COMPOUND_TAP_SPEED_MM_S }
            } else {
                0.0
            },
            duration_ms: DEFAULT_DURATION_MS,
            start_x_mm: (PANEL_SIDE_MM - slide_dist) / 2.0,
            start_y_mm: PANEL_SIDE_MM / 2.0,
        }
    }

    /// Check the profile invariants, including that the sensor footprint of
    /// radius `sensor_radius_mm` stays on the panel for the whole motion.
    pub fn validate(&self, sensor_radius_mm: f64) -> Result<()> {
        if !(0.0..=MAX_DEPTH_MM).contains(&self.depth_mm) {
            return Err(SimError::InvalidProfile(format!(
                "depth {} mm outside [0, {MAX_DEPTH_MM}]",
                self.depth_mm
            )));
        }
        if self.duration_ms == 0 {
            return Err(SimError::InvalidProfile("zero duration".into()));
        }
        if self.slide_speed_mm_s < 0.0 || self.angular_speed_deg_s < 0.0 || self.tap_speed_mm_s < 0.0
        {
            return Err(SimError::InvalidProfile("negative speed".into()));
        }
        if self.kind.has_tap() && self.depth_mm > 0.0 && self.tap_speed_mm_s <= 0.0 {
            return Err(SimError::InvalidProfile("tap motion needs a positive tap speed".into()));
        }
        let dur_s = f64::from(self.duration_ms) / 1000.0;
        if self.kind.has_slide() {
            let travelled = self.slide_speed_mm_s * dur_s;
            if (travelled - self.slide_distance_mm).abs() > 1e-6 {
                return Err(SimError::InvalidProfile(format!(
                    "slide distance {} mm inconsistent with speed*duration = {travelled} mm",
                    self.slide_distance_mm
                )));
            }
        }
        if self.kind.has_rotate() {
            let swept = self.angular_speed_deg_s * dur_s;
            if (swept - self.rotation_deg).abs() > 1e-6 {
                return Err(SimError::InvalidProfile(format!(
                    "rotation {} deg inconsistent with speed*duration = {swept} deg",
                    self.rotation_deg
                )));
            }
        }
        let x_max = self.start_x_mm + if self.kind.has_slide() { self.slide_distance_mm } else { 0.0 };
        let lo = sensor_radius_mm;
        let hi = PANEL_SIDE_MM - sensor_radius_mm;
        if self.start_x_mm < lo || x_max > hi || self.start_y_mm < lo || self.start_y_mm > hi {
            return Err(SimError::InvalidProfile(format!(
                "footprint leaves the panel: x [{}, {}], y {}, radius {}",
                self.start_x_mm, x_max, self.start_y_mm, sensor_radius_mm
            )));
        }
        Ok(())
    }

    fn check_time(&self, t_ms: f64) -> Result<()> {
        if !(0.0..=f64::from(self.duration_ms)).contains(&t_ms) {
            return Err(SimError::TimeOutOfRange { t_ms, duration_ms: self.duration_ms });
        }
        Ok(())
    }

    /// Tap-component height and vertical velocity at `t` seconds.
    fn tap_z(&self, t_s: f64) -> (f64, f64) {
        if self.depth_mm == 0.0 {
            return (0.0, 0.0);
        }
        if self.kind == MotionKind::Tap {
            // Single slow descent, clamped at the target depth.
            let z = self.tap_speed_mm_s * t_s;
            if z < self.depth_mm {
                (-z, -self.tap_speed_mm_s)
            } else {
                (-self.depth_mm, 0.0)
            }
        } else {
            // Compound taps oscillate between the surface and the target
            // depth at the tap speed.
            let p = (self.tap_speed_mm_s * t_s).rem_euclid(2.0 * self.depth_mm);
            if p < self.depth_mm {
                (-p, -self.tap_speed_mm_s)
            } else {
                (-(2.0 * self.depth_mm - p), self.tap_speed_mm_s)
            }
        }
    }

    /// Pose at `t_ms`. Compound motions superpose their component laws.
    pub fn pose(&self, t_ms: f64) -> Result<Pose> {
        self.check_time(t_ms)?;
        let t_s = t_ms / 1000.0;
        let x = if self.kind.has_slide() {
            self.start_x_mm + self.slide_speed_mm_s * t_s
        } else {
            self.start_x_mm
        };
        let theta = if self.kind.has_rotate() { self.angular_speed_deg_s * t_s } else { 0.0 };
        let z = if self.kind.has_tap() { self.tap_z(t_s).0 } else { -self.depth_mm };
        Ok(Pose { x_mm: x, y_mm: self.start_y_mm, theta_deg: theta, z_mm: z })
    }

    /// Velocity at `t_ms`, analytic counterpart of [`pose`].
    pub fn velocity(&self, t_ms: f64) -> Result<PoseVelocity> {
        self.check_time(t_ms)?;
        let t_s = t_ms / 1000.0;
        let vx = if self.kind.has_slide() { self.slide_speed_mm_s } else { 0.0 };
        let omega = if self.kind.has_rotate() { self.angular_speed_deg_s } else { 0.0 };
        let vz = if self.kind.has_tap() { self.tap_z(t_s).1 } else { 0.0 };
        Ok(PoseVelocity { vx_mm_s: vx, vy_mm_s: 0.0, omega_deg_s: omega, vz_mm_s: vz })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slide_position_at_half_second() {
        let p = MotionProfile::fixed_condition(MotionKind::Slide);
        let pose = p.pose(500.0).unwrap();
        assert_relative_eq!(pose.x_mm, p.start_x_mm + 15.0);
        assert_relative_eq!(pose.z_mm, -1.5);
        assert_eq!(pose.theta_deg, 0.0);
    }

    #[test]
    fn rotate_angle_at_full_second() {
        let p = MotionProfile::fixed_condition(MotionKind::Rotate);
        let pose = p.pose(1000.0).unwrap();
        assert_relative_eq!(pose.theta_deg, 30.0);
        assert_relative_eq!(pose.x_mm, p.start_x_mm);
    }

    #[test]
    fn compound_superposes_components() {
        let sr = MotionProfile::fixed_condition(MotionKind::SlideRotate);
        let s = MotionProfile::fixed_condition(MotionKind::Slide);
        let r = MotionProfile::fixed_condition(MotionKind::Rotate);
        for t in [0.0, 137.0, 500.0, 999.0, 1000.0] {
            let c = sr.pose(t).unwrap();
            // Same slide distance from the respective starts, same angle.
            assert_relative_eq!(c.x_mm - sr.start_x_mm, s.pose(t).unwrap().x_mm - s.start_x_mm);
            assert_relative_eq!(c.theta_deg, r.pose(t).unwrap().theta_deg);
            assert_relative_eq!(c.z_mm, -1.5);
        }
    }

    #[test]
    fn pure_tap_reaches_depth_at_end() {
        let p = MotionProfile::fixed_condition(MotionKind::Tap);
        assert_relative_eq!(p.pose(0.0).unwrap().z_mm, 0.0);
        assert_relative_eq!(p.pose(500.0).unwrap().z_mm, -0.75);
        assert_relative_eq!(p.pose(1000.0).unwrap().z_mm, -1.5);
    }

    #[test]
    fn compound_tap_oscillates() {
        let p = MotionProfile::fixed_condition(MotionKind::TapSlide);
        // 30 mm/s over depth 1.5 mm: down in 50 ms, up in 50 ms.
        assert_relative_eq!(p.pose(50.0).unwrap().z_mm, -1.5);
        assert_relative_eq!(p.pose(100.0).unwrap().z_mm, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.pose(25.0).unwrap().z_mm, -0.75);
        assert!(p.velocity(25.0).unwrap().vz_mm_s < 0.0);
        assert!(p.velocity(75.0).unwrap().vz_mm_s > 0.0);
    }

    #[test]
    fn time_out_of_range_rejected() {
        let p = MotionProfile::fixed_condition(MotionKind::Slide);
        assert!(p.pose(-1.0).is_err());
        assert!(p.pose(1000.1).is_err());
    }

    #[test]
    fn validation_catches_bad_profiles() {
        let mut p = MotionProfile::fixed_condition(MotionKind::Slide);
        p.depth_mm = 3.5;
        assert!(p.validate(10.0).is_err());

        let mut p = MotionProfile::fixed_condition(MotionKind::Slide);
        p.start_x_mm = 80.0; // 80 + 30 + 10 > 100
        assert!(p.validate(10.0).is_err());

        let mut p = MotionProfile::fixed_condition(MotionKind::Slide);
        p.slide_distance_mm = 10.0;
        assert!(p.validate(10.0).is_err());

        assert!(MotionProfile::fixed_condition(MotionKind::TapRotate).validate(10.0).is_ok());
    }
}
