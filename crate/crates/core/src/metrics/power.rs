//! Event-rate power model.
//!
//! Power is affine in the synaptic-operation rate and the input event rate:
//!
//! ```text
//! P_mw = idle_mw + e_synop_nj * synop_rate * 1e-6 + e_event_nj * event_rate * 1e-6
//! ```
//!
//! (1 nJ per operation at 1 op/s is 1e-6 mW.) The idle term is fixed from
//! the reference hardware table; the two energy coefficients are fitted by
//! nonnegative least squares against measured powers.

use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};
use crate::sim::MotionKind;

/// Idle power of the reference neuromorphic processor, mW.
pub const PAPER_IDLE_MW: f64 = 2.42;

/// Measured average inference power per exploratory motion on the reference
/// processor, mW.
pub const PAPER_MOTION_POWERS_MW: [(MotionKind, f64); 6] = [
    (MotionKind::TapRotate, 8.47),
    (MotionKind::TapSlide, 8.13),
    (MotionKind::SlideRotate, 8.04),
    (MotionKind::Slide, 7.01),
    (MotionKind::Tap, 4.47),
    (MotionKind::Rotate, 3.06),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub idle_mw: f64,
    pub energy_per_synop_nj: f64,
    pub energy_per_input_event_nj: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self { idle_mw: PAPER_IDLE_MW, energy_per_synop_nj: 0.0, energy_per_input_event_nj: 0.0 }
    }
}

impl PowerModel {
    /// Estimated power in mW at the given activity rates (per second).
    pub fn estimate_mw(&self, synop_rate: f64, event_rate: f64) -> Result<f64> {
        if synop_rate < 0.0 || event_rate < 0.0 {
            return Err(MetricsError::InvalidArgument(format!(
                "negative rate: synops {synop_rate}, events {event_rate}"
            )));
        }
        Ok(self.idle_mw
            + self.energy_per_synop_nj * synop_rate * 1e-6
            + self.energy_per_input_event_nj * event_rate * 1e-6)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerObservation {
    pub synop_rate: f64,
    pub event_rate: f64,
    pub measured_mw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub model: PowerModel,
    pub residuals_mw: Vec<f64>,
    pub rms_residual_mw: f64,
}

/// Fit the two energy coefficients by nonnegative least squares with the
/// idle power fixed. A single observation fits one coefficient (the synop
/// term when its rate is nonzero, otherwise the event term) and forces the
/// other to zero.
pub fn calibrate_power(observations: &[PowerObservation], idle_mw: f64) -> Result<CalibrationOutcome> {
    if observations.is_empty() {
        return Err(MetricsError::Calibration("no observations".into()));
    }
    for o in observations {
        if o.synop_rate < 0.0 || o.event_rate < 0.0 {
            return Err(MetricsError::Calibration("negative rate in observation".into()));
        }
    }
    // Design columns in mW per nJ: x1 = synop_rate * 1e-6, x2 = event_rate * 1e-6.
    let x1: Vec<f64> = observations.iter().map(|o| o.synop_rate * 1e-6).collect();
    let x2: Vec<f64> = observations.iter().map(|o| o.event_rate * 1e-6).collect();
    let y: Vec<f64> = observations.iter().map(|o| o.measured_mw - idle_mw).collect();

    let fit_single = |x: &[f64]| -> Option<f64> {
        let xx: f64 = x.iter().map(|v| v * v).sum();
        if xx == 0.0 {
            return None;
        }
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        Some((xy / xx).max(0.0))
    };

    let (a, b) = if observations.len() == 1 {
        if x1[0] > 0.0 {
            (fit_single(&x1).unwrap_or(0.0), 0.0)
        } else if x2[0] > 0.0 {
            (0.0, fit_single(&x2).unwrap_or(0.0))
        } else {
            return Err(MetricsError::Calibration("single observation with zero rates".into()));
        }
    } else {
        // Normal equations for the 2x2 system.
        let s11: f64 = x1.iter().map(|v| v * v).sum();
        let s22: f64 = x2.iter().map(|v| v * v).sum();
        let s12: f64 = x1.iter().zip(&x2).map(|(a, b)| a * b).sum();
        let r1: f64 = x1.iter().zip(&y).map(|(a, b)| a * b).sum();
        let r2: f64 = x2.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = s11 * s22 - s12 * s12;
        let scale = (s11 * s22).max(1e-300);
        if det.abs() <= 1e-9 * scale {
            // Rank-deficient: collinear or zero columns.
            if s11 == 0.0 && s22 == 0.0 {
                return Err(MetricsError::Calibration("all rates are zero".into()));
            }
            return Err(MetricsError::Calibration(
                "degenerate design matrix: synop and event rates are collinear".into(),
            ));
        }
        let a = (r1 * s22 - r2 * s12) / det;
        let b = (r2 * s11 - r1 * s12) / det;
        // Active-set projection for nonnegativity.
        if a >= 0.0 && b >= 0.0 {
            (a, b)
        } else if a < 0.0 {
            (0.0, fit_single(&x2).unwrap_or(0.0))
        } else {
            (fit_single(&x1).unwrap_or(0.0), 0.0)
        }
    };

    let model =
        PowerModel { idle_mw, energy_per_synop_nj: a, energy_per_input_event_nj: b };
    let residuals_mw: Vec<f64> = observations
        .iter()
        .map(|o| o.measured_mw - model.estimate_mw(o.synop_rate, o.event_rate).unwrap())
        .collect();
    let rms = (residuals_mw.iter().map(|r| r * r).sum::<f64>() / residuals_mw.len() as f64).sqrt();
    Ok(CalibrationOutcome { model, residuals_mw, rms_residual_mw: rms })
}
