//! Binary and CSV serialization of event streams and spike tensors.
//!
//! Event file layout (little-endian):
//!   magic "AERT" | width u16 | height u16 | duration_us u32 | event_count u32
//! followed by `event_count` records of 9 bytes:
//!   t u32 | x u16 | y u16 | polarity u8 (0 = off, 1 = on)
//!
//! Spike tensor layout (little-endian):
//!   magic "SPKT" | t_steps u32 | h u16 | w u16 | dt_us u32
//! followed by `t_steps * h * w` counts as u16, row-major in (t, y, x).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{AerError, Event, EventStream, Polarity, Result, SpikeTensor};

pub const EVENT_FILE_MAGIC: &[u8; 4] = b"AERT";
pub const TENSOR_FILE_MAGIC: &[u8; 4] = b"SPKT";
pub const EVENT_HEADER_LEN: u64 = 16;
pub const EVENT_RECORD_LEN: u64 = 9;

/// Result of reading an event file: the stream plus a flag telling whether
/// the records had to be re-sorted because the file violated time order.
#[derive(Debug)]
pub struct ReadOutcome {
    pub stream: EventStream,
    pub resorted: bool,
}

fn io_err(path: &Path, source: std::io::Error) -> AerError {
    AerError::Io { path: path.to_path_buf(), source }
}

pub fn write_events(stream: &EventStream, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| {
        w.write_all(EVENT_FILE_MAGIC)?;
        w.write_u16::<LittleEndian>(stream.width())?;
        w.write_u16::<LittleEndian>(stream.height())?;
        w.write_u32::<LittleEndian>(stream.duration_us())?;
        w.write_u32::<LittleEndian>(stream.len() as u32)?;
        for ev in stream.events() {
            w.write_u32::<LittleEndian>(ev.t_us)?;
            w.write_u16::<LittleEndian>(ev.x)?;
            w.write_u16::<LittleEndian>(ev.y)?;
            w.write_u8(ev.polarity.as_byte())?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

pub fn read_events(path: &Path) -> Result<ReadOutcome> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| AerError::Format("file shorter than header magic".into()))?;
    if &magic != EVENT_FILE_MAGIC {
        return Err(AerError::Format(format!(
            "bad magic {:02x?}, expected {:02x?}",
            magic, EVENT_FILE_MAGIC
        )));
    }
    let header = (|| -> std::io::Result<(u16, u16, u32, u32)> {
        let width = r.read_u16::<LittleEndian>()?;
        let height = r.read_u16::<LittleEndian>()?;
        let duration_us = r.read_u32::<LittleEndian>()?;
        let count = r.read_u32::<LittleEndian>()?;
        Ok((width, height, duration_us, count))
    })()
    .map_err(|_| AerError::Format("file shorter than 16-byte header".into()))?;
    let (width, height, duration_us, count) = header;

    let mut events = Vec::with_capacity(count as usize);
    let mut sorted = true;
    let mut prev_t = 0u32;
    for i in 0..count {
        let offset = EVENT_HEADER_LEN + u64::from(i) * EVENT_RECORD_LEN;
        let mut rec = [0u8; EVENT_RECORD_LEN as usize];
        r.read_exact(&mut rec).map_err(|_| AerError::Truncated { offset })?;
        let t_us = u32::from_le_bytes([rec[0], rec[1], rec[2], rec[3]]);
        let x = u16::from_le_bytes([rec[4], rec[5]]);
        let y = u16::from_le_bytes([rec[6], rec[7]]);
        let polarity = Polarity::from_byte(rec[8])?;
        if t_us < prev_t {
            sorted = false;
        }
        prev_t = t_us;
        events.push(Event { t_us, x, y, polarity });
    }

    let stream = if sorted {
        EventStream::new(width, height, duration_us, events)?
    } else {
        EventStream::from_unsorted(width, height, duration_us, events)?
    };
    Ok(ReadOutcome { stream, resorted: !sorted })
}

/// Debug CSV with header line `t_us,x,y,p`.
pub fn write_events_csv(stream: &EventStream, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| {
        writeln!(w, "t_us,x,y,p")?;
        for ev in stream.events() {
            writeln!(w, "{},{},{},{}", ev.t_us, ev.x, ev.y, ev.polarity.as_byte())?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

/// Read the CSV debug format. Frame bounds are not stored in the CSV, so the
/// caller supplies them.
pub fn read_events_csv(
    path: &Path,
    width: u16,
    height: u16,
    duration_us: u32,
) -> Result<ReadOutcome> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("t_us,x,y,p") => {}
        other => {
            return Err(AerError::Format(format!(
                "bad csv header {:?}, expected t_us,x,y,p",
                other
            )))
        }
    }
    let mut events = Vec::new();
    let mut sorted = true;
    let mut prev_t = 0u32;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let mut next = |name: &str| {
            cols.next()
                .ok_or_else(|| AerError::Format(format!("line {}: missing {name}", lineno + 2)))
        };
        let t_us: u32 = next("t_us")?
            .parse()
            .map_err(|e| AerError::Format(format!("line {}: {e}", lineno + 2)))?;
        let x: u16 = next("x")?
            .parse()
            .map_err(|e| AerError::Format(format!("line {}: {e}", lineno + 2)))?;
        let y: u16 = next("y")?
            .parse()
            .map_err(|e| AerError::Format(format!("line {}: {e}", lineno + 2)))?;
        let p: u8 = next("p")?
            .parse()
            .map_err(|e| AerError::Format(format!("line {}: {e}", lineno + 2)))?;
        if t_us < prev_t {
            sorted = false;
        }
        prev_t = t_us;
        events.push(Event { t_us, x, y, polarity: Polarity::from_byte(p)? });
    }
    let stream = if sorted {
        EventStream::new(width, height, duration_us, events)?
    } else {
        EventStream::from_unsorted(width, height, duration_us, events)?
    };
    Ok(ReadOutcome { stream, resorted: !sorted })
}

pub fn write_tensor(tensor: &SpikeTensor, path: &Path) -> Result<()> {
    for (idx, &c) in tensor.counts().iter().enumerate() {
        if c > u32::from(u16::MAX) {
            let (t, y, x) = tensor.unravel(idx);
            return Err(AerError::CountOverflow { t, y, x, count: c });
        }
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| {
        w.write_all(TENSOR_FILE_MAGIC)?;
        w.write_u32::<LittleEndian>(tensor.t_steps() as u32)?;
        w.write_u16::<LittleEndian>(tensor.h() as u16)?;
        w.write_u16::<LittleEndian>(tensor.w() as u16)?;
        w.write_u32::<LittleEndian>(tensor.dt_us())?;
        for &c in tensor.counts() {
            w.write_u16::<LittleEndian>(c as u16)?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

pub fn read_tensor(path: &Path) -> Result<SpikeTensor> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| AerError::Format("file shorter than header magic".into()))?;
    if &magic != TENSOR_FILE_MAGIC {
        return Err(AerError::Format(format!(
            "bad magic {:02x?}, expected {:02x?}",
            magic, TENSOR_FILE_MAGIC
        )));
    }
    let (t_steps, h, w, dt_us) = (|| -> std::io::Result<(u32, u16, u16, u32)> {
        Ok((
            r.read_u32::<LittleEndian>()?,
            r.read_u16::<LittleEndian>()?,
            r.read_u16::<LittleEndian>()?,
            r.read_u32::<LittleEndian>()?,
        ))
    })()
    .map_err(|_| AerError::Format("file shorter than 16-byte header".into()))?;

    let n = t_steps as usize * h as usize * w as usize;
    let mut counts = Vec::with_capacity(n);
    for i in 0..n {
        let offset = 16 + 2 * i as u64;
        let c = r
            .read_u16::<LittleEndian>()
            .map_err(|_| AerError::Truncated { offset })?;
        counts.push(u32::from(c));
    }
    SpikeTensor::from_counts(t_steps as usize, h as usize, w as usize, dt_us, counts)
}
