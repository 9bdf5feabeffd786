use serde::{Deserialize, Serialize};

use super::{AerError, Result};

/// Contrast change direction of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Off = 0,
    On = 1,
}

impl Polarity {
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Polarity::Off),
            1 => Ok(Polarity::On),
            other => Err(AerError::Format(format!("invalid polarity byte {other}"))),
        }
    }

    pub fn as_byte(self) -> u8 {
        self as u8
    }
}

/// A single address event: timestamp in microseconds since trial start plus
/// the pixel address and polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub t_us: u32,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

/// An ordered event record for one trial.
///
/// Invariants established at construction and preserved by every transform:
/// all events lie inside the `width x height` frame and the trial duration,
/// and timestamps are nondecreasing (stable order for equal timestamps).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    duration_us: u32,
    events: Vec<Event>,
}

impl EventStream {
    /// Build a stream from already-sorted events, validating all invariants.
    pub fn new(width: u16, height: u16, duration_us: u32, events: Vec<Event>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(AerError::InvalidArgument(format!(
                "zero-sized frame {width}x{height}"
            )));
        }
        if duration_us == 0 {
            return Err(AerError::InvalidArgument("zero duration".into()));
        }
        let mut prev_t = 0u32;
        for ev in &events {
            if ev.x >= width || ev.y >= height || ev.t_us >= duration_us {
                return Err(AerError::EventOutOfBounds {
                    x: ev.x,
                    y: ev.y,
                    t_us: ev.t_us,
                    width,
                    height,
                    duration_us,
                });
            }
            if ev.t_us < prev_t {
                return Err(AerError::InvalidArgument(
                    "events not sorted by timestamp".into(),
                ));
            }
            prev_t = ev.t_us;
        }
        Ok(Self { width, height, duration_us, events })
    }

    /// Build a stream from events in arbitrary order; sorts stably by `t`.
    pub fn from_unsorted(
        width: u16,
        height: u16,
        duration_us: u32,
        mut events: Vec<Event>,
    ) -> Result<Self> {
        events.sort_by_key(|e| e.t_us);
        Self::new(width, height, duration_us, events)
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn duration_us(&self) -> u32 {
        self.duration_us
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t_us: u32, x: u16, y: u16) -> Event {
        Event { t_us, x, y, polarity: Polarity::On }
    }

    #[test]
    fn rejects_out_of_bounds() {
        assert!(EventStream::new(4, 4, 10, vec![ev(0, 4, 0)]).is_err());
        assert!(EventStream::new(4, 4, 10, vec![ev(0, 0, 4)]).is_err());
        assert!(EventStream::new(4, 4, 10, vec![ev(10, 0, 0)]).is_err());
    }

    #[test]
    fn rejects_unsorted() {
        assert!(EventStream::new(4, 4, 10, vec![ev(5, 0, 0), ev(1, 0, 0)]).is_err());
    }

    #[test]
    fn from_unsorted_is_stable_on_ties() {
        let a = Event { t_us: 3, x: 1, y: 0, polarity: Polarity::On };
        let b = Event { t_us: 3, x: 2, y: 0, polarity: Polarity::Off };
        let s = EventStream::from_unsorted(4, 4, 10, vec![ev(7, 0, 0), a, b]).unwrap();
        assert_eq!(s.events(), &[a, b, ev(7, 0, 0)]);
    }
}
