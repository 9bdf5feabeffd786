//! Spatial and temporal preprocessing of event streams.

use serde::{Deserialize, Serialize};

use super::{AerError, Event, EventStream, Polarity, Result, SpikeTensor};
use super::{DEFAULT_CELL_SIDE, DEFAULT_CROP_SIDE, DEFAULT_GRID_CELLS, SENSOR_HEIGHT, SENSOR_WIDTH};

/// Square crop window inside a source frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub origin_x: u16,
    pub origin_y: u16,
    pub side: u16,
}

impl CropSpec {
    /// Crop of `side` pixels centered in a `width x height` frame.
    pub fn centered(width: u16, height: u16, side: u16) -> Result<Self> {
        if side == 0 || side > width || side > height {
            return Err(AerError::InvalidArgument(format!(
                "crop side {side} does not fit in {width}x{height}"
            )));
        }
        Ok(Self { origin_x: (width - side) / 2, origin_y: (height - side) / 2, side })
    }

    pub fn validate_against(&self, width: u16, height: u16) -> Result<()> {
        let x_end = u32::from(self.origin_x) + u32::from(self.side);
        let y_end = u32::from(self.origin_y) + u32::from(self.side);
        if self.side == 0 || x_end > u32::from(width) || y_end > u32::from(height) {
            return Err(AerError::InvalidArgument(format!(
                "crop {}+{} x {}+{} outside {width}x{height}",
                self.origin_x, self.side, self.origin_y, self.side
            )));
        }
        Ok(())
    }
}

impl Default for CropSpec {
    /// Centered default window in the native frame.
    fn default() -> Self {
        CropSpec::centered(SENSOR_WIDTH, SENSOR_HEIGHT, DEFAULT_CROP_SIDE).unwrap()
    }
}

/// Grid of square pooling cells covering a cropped frame exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolGrid {
    pub cells_x: u16,
    pub cells_y: u16,
    pub cell_side: u16,
}

impl PoolGrid {
    pub fn validate_against(&self, width: u16, height: u16) -> Result<()> {
        if self.cells_x == 0 || self.cells_y == 0 || self.cell_side == 0 {
            return Err(AerError::InvalidArgument("zero-sized pooling grid".into()));
        }
        let need_w = u32::from(self.cells_x) * u32::from(self.cell_side);
        let need_h = u32::from(self.cells_y) * u32::from(self.cell_side);
        if need_w != u32::from(width) || need_h != u32::from(height) {
            return Err(AerError::InvalidArgument(format!(
                "grid {}x{} cells of {} px covers {}x{}, stream is {width}x{height}",
                self.cells_x, self.cells_y, self.cell_side, need_w, need_h
            )));
        }
        Ok(())
    }
}

impl Default for PoolGrid {
    fn default() -> Self {
        Self { cells_x: DEFAULT_GRID_CELLS, cells_y: DEFAULT_GRID_CELLS, cell_side: DEFAULT_CELL_SIDE }
    }
}

/// Keep only events inside the window and rebase coordinates to its origin.
/// Order is preserved; the output frame is `side x side`.
pub fn crop(stream: &EventStream, spec: &CropSpec) -> Result<EventStream> {
    spec.validate_against(stream.width(), stream.height())?;
    let x0 = spec.origin_x;
    let y0 = spec.origin_y;
    let x1 = x0 + spec.side;
    let y1 = y0 + spec.side;
    let events = stream
        .events()
        .iter()
        .filter(|e| e.x >= x0 && e.x < x1 && e.y >= y0 && e.y < y1)
        .map(|e| Event { t_us: e.t_us, x: e.x - x0, y: e.y - y0, polarity: e.polarity })
        .collect();
    EventStream::new(spec.side, spec.side, stream.duration_us(), events)
}

/// Remap every event to its pooling cell. Timestamps, order and event count
/// are unchanged; output dimensions are `cells_x x cells_y`.
pub fn pool(stream: &EventStream, grid: &PoolGrid) -> Result<EventStream> {
    grid.validate_against(stream.width(), stream.height())?;
    let cs = grid.cell_side;
    let events = stream
        .events()
        .iter()
        .map(|e| Event { t_us: e.t_us, x: e.x / cs, y: e.y / cs, polarity: e.polarity })
        .collect();
    EventStream::new(grid.cells_x, grid.cells_y, stream.duration_us(), events)
}

/// Which polarities contribute to a binned tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolaritySelect {
    /// Merge on and off events into one channel.
    #[default]
    Both,
    On,
    Off,
}

impl PolaritySelect {
    fn accepts(self, p: Polarity) -> bool {
        match self {
            PolaritySelect::Both => true,
            PolaritySelect::On => p == Polarity::On,
            PolaritySelect::Off => p == Polarity::Off,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct BinOptions {
    #[serde(default)]
    pub polarity: PolaritySelect,
    /// Clamp each bin to {0, 1} instead of counting.
    #[serde(default)]
    pub binarize: bool,
}

/// A binned tensor plus the number of events that fell at or beyond the end
/// of the covered window (and were therefore dropped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binned {
    pub tensor: SpikeTensor,
    pub dropped: u64,
}

/// Count events into `t_steps` bins of `dt_us` each; polarities merged.
pub fn bin(stream: &EventStream, dt_us: u32, t_steps: usize) -> Result<Binned> {
    bin_with(stream, dt_us, t_steps, BinOptions::default())
}

pub fn bin_with(
    stream: &EventStream,
    dt_us: u32,
    t_steps: usize,
    opts: BinOptions,
) -> Result<Binned> {
    if dt_us == 0 || t_steps == 0 {
        return Err(AerError::InvalidArgument("empty binning window".into()));
    }
    let h = usize::from(stream.height());
    let w = usize::from(stream.width());
    let mut tensor = SpikeTensor::zeros(t_steps, h, w, dt_us);
    let horizon = u64::from(dt_us) * t_steps as u64;
    let mut dropped = 0u64;
    for ev in stream.events() {
        if !opts.polarity.accepts(ev.polarity) {
            continue;
        }
        let t = u64::from(ev.t_us);
        if t >= horizon {
            dropped += 1;
            continue;
        }
        let k = (t / u64::from(dt_us)) as usize;
        let slot = tensor.at_mut(k, usize::from(ev.y), usize::from(ev.x));
        if opts.binarize {
            *slot = 1;
        } else {
            *slot += 1;
        }
    }
    Ok(Binned { tensor, dropped })
}

/// Prefix of the time axis covering `length_ms`; spatial dims unchanged.
pub fn clip(tensor: &SpikeTensor, length_ms: u32) -> Result<SpikeTensor> {
    let total_us = u64::from(tensor.dt_us()) * tensor.t_steps() as u64;
    let want_us = u64::from(length_ms) * 1000;
    if length_ms == 0 || want_us > total_us {
        return Err(AerError::InvalidArgument(format!(
            "clip length {length_ms} ms outside (0, {} ms]",
            total_us / 1000
        )));
    }
    // Smallest number of whole bins covering the requested length.
    let steps = want_us.div_ceil(u64::from(tensor.dt_us())) as usize;
    let plane = tensor.h() * tensor.w();
    let counts = tensor.counts()[..steps * plane].to_vec();
    SpikeTensor::from_counts(steps, tensor.h(), tensor.w(), tensor.dt_us(), counts)
}
