//! Address-event data model, file formats and preprocessing transforms.
//!
//! Events are `(t, x, y, polarity)` records ordered by timestamp. The
//! preprocessing chain mirrors the front end of the classifier: crop the
//! native frame to a square window, pool pixels onto a coarse grid, bin
//! event times into fixed-width steps and optionally clip the time axis.

mod event;
mod io;
mod preprocess;
mod tensor;

pub use event::{Event, EventStream, Polarity};
pub use io::{
    read_events, read_events_csv, read_tensor, write_events, write_events_csv, write_tensor,
    ReadOutcome, EVENT_FILE_MAGIC, EVENT_HEADER_LEN, EVENT_RECORD_LEN, TENSOR_FILE_MAGIC,
};
pub use preprocess::{bin, bin_with, clip, crop, pool, BinOptions, Binned, CropSpec, PolaritySelect, PoolGrid};
pub use tensor::SpikeTensor;

use std::path::PathBuf;
use thiserror::Error;

/// Native sensor frame width in pixels.
pub const SENSOR_WIDTH: u16 = 640;
/// Native sensor frame height in pixels.
pub const SENSOR_HEIGHT: u16 = 480;
/// Side of the square crop window applied to the native frame.
pub const DEFAULT_CROP_SIDE: u16 = 260;
/// Pooling grid cells per axis.
pub const DEFAULT_GRID_CELLS: u16 = 20;
/// Pixels per pooling cell side.
pub const DEFAULT_CELL_SIDE: u16 = 13;
/// Time steps of the binned tensor.
pub const DEFAULT_T_STEPS: usize = 1000;
/// Bin width in microseconds.
pub const DEFAULT_DT_US: u32 = 1000;

#[derive(Debug, Error)]
pub enum AerError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad file format: {0}")]
    Format(String),
    #[error("truncated record at byte offset {offset}")]
    Truncated { offset: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("event out of bounds: ({x},{y}) t={t_us}us in {width}x{height} frame of {duration_us}us")]
    EventOutOfBounds {
        x: u16,
        y: u16,
        t_us: u32,
        width: u16,
        height: u16,
        duration_us: u32,
    },
    #[error("bin count {count} at (t={t},y={y},x={x}) exceeds the u16 file range")]
    CountOverflow { t: usize, y: usize, x: usize, count: u32 },
}

pub type Result<T> = std::result::Result<T, AerError>;
