//! Evaluation harness: accuracy-vs-sample-length curves, convergence
//! reports, generalization sweeps over depth/speed, confusion matrices and
//! the calibrated event-rate power model.

mod confusion;
mod curve;
mod eval;
mod power;
pub mod stats;
mod sweep;

pub use confusion::ConfusionMatrix;
pub use curve::{
    accuracy_vs_length, mean_curve, time_to_band, AccuracyCurve, ConvergenceReport, CurvePoint,
};
pub use eval::{evaluate, load_eval_set, EvalItem, EvalResult, EvalSet, PreprocessConfig};
pub use power::{
    calibrate_power, CalibrationOutcome, PowerModel, PowerObservation, PAPER_IDLE_MW,
    PAPER_MOTION_POWERS_MW,
};
pub use sweep::{generalization_sweep, SweepCell, SweepGrid, SweepResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Snn(#[from] crate::snn::SnnError),
    #[error(transparent)]
    Aer(#[from] crate::aer::AerError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

pub type Result<T> = std::result::Result<T, MetricsError>;
