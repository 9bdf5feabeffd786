use serde::{Deserialize, Serialize};

use super::{AerError, Result};

/// Binned spike counts on a `(t_steps, h, w)` grid, row-major in (t, y, x).
///
/// Counts are nonnegative and the tensor sum equals the number of events
/// that fell inside the binned window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeTensor {
    t_steps: usize,
    h: usize,
    w: usize,
    dt_us: u32,
    counts: Vec<u32>,
}

impl SpikeTensor {
    pub fn zeros(t_steps: usize, h: usize, w: usize, dt_us: u32) -> Self {
        Self { t_steps, h, w, dt_us, counts: vec![0; t_steps * h * w] }
    }

    pub fn from_counts(
        t_steps: usize,
        h: usize,
        w: usize,
        dt_us: u32,
        counts: Vec<u32>,
    ) -> Result<Self> {
        if counts.len() != t_steps * h * w {
            return Err(AerError::InvalidArgument(format!(
                "count vector length {} does not match {}x{}x{}",
                counts.len(),
                t_steps,
                h,
                w
            )));
        }
        if dt_us == 0 {
            return Err(AerError::InvalidArgument("zero bin width".into()));
        }
        Ok(Self { t_steps, h, w, dt_us, counts })
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn dt_us(&self) -> u32 {
        self.dt_us
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    #[inline]
    pub fn index(&self, t: usize, y: usize, x: usize) -> usize {
        (t * self.h + y) * self.w + x
    }

    /// Inverse of [`index`]: flat offset back to `(t, y, x)`.
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.w;
        let y = (idx / self.w) % self.h;
        let t = idx / (self.w * self.h);
        (t, y, x)
    }

    #[inline]
    pub fn at(&self, t: usize, y: usize, x: usize) -> u32 {
        self.counts[self.index(t, y, x)]
    }

    #[inline]
    pub fn at_mut(&mut self, t: usize, y: usize, x: usize) -> &mut u32 {
        let i = self.index(t, y, x);
        &mut self.counts[i]
    }

    /// One time slice as a contiguous `h * w` view.
    pub fn step(&self, t: usize) -> &[u32] {
        let start = t * self.h * self.w;
        &self.counts[start..start + self.h * self.w]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}
