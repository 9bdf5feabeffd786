//! Synthetic tactile data generation.
//!
//! A trial presses a marker-studded sensor against a procedural texture
//! panel and moves it along an exploratory motion. Marker responses follow
//! a rapidly-adapting model: event rates are driven purely by change
//! (texture gradient swept under the markers, or normal-velocity contact
//! transients), never by static pressure. Events are drawn from
//! inhomogeneous Poisson processes and rendered into the native camera
//! frame as marker-blob events.

mod dataset;
mod motion;
mod sensor;
mod texture;
mod trial;

pub use dataset::{
    build_dataset, expand_manifest, load_index, load_manifest_config, DatasetIndex,
    DatasetManifest, IndexEntry, ManifestConfig, Protocol, SamplingRanges, SplitFile,
};
pub use motion::{
    MotionKind, MotionProfile, Pose, PoseVelocity, MAX_DEPTH_MM, PANEL_SIDE_MM,
};
pub use sensor::{event_rate_field, marker_intensities, SensorModel};
pub use texture::{GratingComponent, NoiseSpec, TextureField, TEXTURE_COUNT, TEXTURE_TABLE_VERSION};
pub use trial::{expected_event_count, simulate_trial, TrialSpec};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid motion profile: {0}")]
    InvalidProfile(String),
    #[error("time {t_ms} ms outside trial duration {duration_ms} ms")]
    TimeOutOfRange { t_ms: f64, duration_ms: u32 },
    #[error("query ({u_mm:.3}, {v_mm:.3}) mm outside the {side} mm texture panel")]
    OutOfExtent { u_mm: f64, v_mm: f64, side: f64 },
    #[error("unknown texture id {0} (valid: 1..={TEXTURE_COUNT})")]
    UnknownTexture(u8),
    #[error("invalid sensor model: {0}")]
    InvalidSensor(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Aer(#[from] crate::aer::AerError),
}

pub type Result<T> = std::result::Result<T, SimError>;
