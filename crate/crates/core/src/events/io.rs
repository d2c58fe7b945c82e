use std::io::Write;

use super::{Event, EventList, Resolution};
use crate::error::{Error, Result};

const BIN_MAGIC: &[u8; 4] = b"AEGN";
const BIN_VERSION: u16 = 1;
pub const BIN_HEADER_LEN: usize = 16;
pub const BIN_RECORD_LEN: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Bin,
}

impl EventFormat {
    /// Guesses the format from a file extension; anything but `.csv` is binary.
    pub fn from_path(path: &std::path::Path) -> EventFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EventFormat::Csv,
            _ => EventFormat::Bin,
        }
    }
}

/// Parses an event stream.
///
/// CSV carries no resolution; pass one to validate against, or `None` to use
/// the bounding size of the coordinates. Binary files embed their resolution
/// and ignore the argument.
pub fn parse_events(input: &[u8], format: EventFormat, resolution: Option<Resolution>) -> Result<EventList> {
    match format {
        EventFormat::Csv => parse_csv(input, resolution),
        EventFormat::Bin => parse_bin(input),
    }
}

fn polarity(raw: i64) -> Option<i8> {
    match raw {
        1 => Some(1),
        0 | -1 => Some(-1),
        _ => None,
    }
}

fn parse_csv(input: &[u8], resolution: Option<Resolution>) -> Result<EventList> {
    let text = std::str::from_utf8(input).map_err(|e| Error::parse("csv", format!("not UTF-8: {e}")))?;
    let mut events = Vec::new();
    let mut seen_data = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let loc = || format!("line {}", lineno + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !seen_data && fields[0].parse::<i64>().is_err() {
            // header line
            seen_data = true;
            continue;
        }
        seen_data = true;
        if fields.len() != 4 {
            return Err(Error::parse(loc(), format!("expected 4 fields, found {}", fields.len())));
        }
        let int = |s: &str, what: &str| s.parse::<i64>().map_err(|_| Error::parse(loc(), format!("bad {what} {s:?}")));
        let x = int(fields[0], "x")?;
        let y = int(fields[1], "y")?;
        let t = int(fields[2], "t")?;
        let p = int(fields[3], "p")?;
        let x = u16::try_from(x).map_err(|_| Error::Validation { index: events.len(), message: format!("x={x}") })?;
        let y = u16::try_from(y).map_err(|_| Error::Validation { index: events.len(), message: format!("y={y}") })?;
        let t = u64::try_from(t).map_err(|_| Error::parse(loc(), format!("negative timestamp {t}")))?;
        let p = polarity(p).ok_or_else(|| Error::parse(loc(), format!("polarity {p} not in {{-1, 0, 1}}")))?;
        events.push(Event { x, y, t, p });
    }
    let resolution = resolution.unwrap_or_else(|| {
        let w = events.iter().map(|e| e.x as u32 + 1).max().unwrap_or(0);
        let h = events.iter().map(|e| e.y as u32 + 1).max().unwrap_or(0);
        Resolution::new(w.min(u16::MAX as u32) as u16, h.min(u16::MAX as u32) as u16)
    });
    EventList::new(events, resolution)
}

fn parse_bin(input: &[u8]) -> Result<EventList> {
    if input.len() < BIN_HEADER_LEN {
        return Err(Error::parse("header", format!("file has {} bytes, header needs {BIN_HEADER_LEN}", input.len())));
    }
    if &input[0..4] != BIN_MAGIC {
        return Err(Error::parse("header", "bad magic, expected \"AEGN\""));
    }
    let u16_at = |o: usize| u16::from_le_bytes([input[o], input[o + 1]]);
    let version = u16_at(4);
    if version != BIN_VERSION {
        return Err(Error::parse("header", format!("unsupported version {version}")));
    }
    let resolution = Resolution::new(u16_at(6), u16_at(8));
    let count = u32::from_le_bytes(input[10..14].try_into().unwrap()) as usize;
    let body = &input[BIN_HEADER_LEN..];
    let complete = body.len() / BIN_RECORD_LEN;
    if complete < count {
        return Err(Error::parse(format!("record {complete}"), format!("truncated: header declares {count} records")));
    }
    if body.len() != count * BIN_RECORD_LEN {
        return Err(Error::parse(format!("record {count}"), "trailing bytes after last record"));
    }
    let mut events = Vec::with_capacity(count);
    for (index, rec) in body.chunks_exact(BIN_RECORD_LEN).enumerate() {
        let x = u16::from_le_bytes([rec[0], rec[1]]);
        let y = u16::from_le_bytes([rec[2], rec[3]]);
        let t = u64::from_le_bytes(rec[4..12].try_into().unwrap());
        let raw = rec[12] as i8;
        let p = polarity(raw as i64)
            .ok_or_else(|| Error::parse(format!("record {index}"), format!("polarity {raw} not in {{-1, 0, 1}}")))?;
        events.push(Event { x, y, t, p });
    }
    EventList::new(events, resolution)
}

/// Writes `x,y,t,p` lines with a header.
pub fn write_csv<W: Write>(ev: &EventList, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,y,t,p")?;
    for e in ev.events() {
        writeln!(out, "{},{},{},{}", e.x, e.y, e.t, e.p)?;
    }
    Ok(())
}

/// Writes the 16-byte header followed by packed 13-byte records.
pub fn write_bin<W: Write>(ev: &EventList, mut out: W) -> std::io::Result<()> {
    let count = u32::try_from(ev.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "too many events for u32 count"))?;
    let mut header = [0u8; BIN_HEADER_LEN];
    header[0..4].copy_from_slice(BIN_MAGIC);
    header[4..6].copy_from_slice(&BIN_VERSION.to_le_bytes());
    header[6..8].copy_from_slice(&ev.resolution().width.to_le_bytes());
    header[8..10].copy_from_slice(&ev.resolution().height.to_le_bytes());
    header[10..14].copy_from_slice(&count.to_le_bytes());
    out.write_all(&header)?;
    let mut rec = [0u8; BIN_RECORD_LEN];
    for e in ev.events() {
        rec[0..2].copy_from_slice(&e.x.to_le_bytes());
        rec[2..4].copy_from_slice(&e.y.to_le_bytes());
        rec[4..12].copy_from_slice(&e.t.to_le_bytes());
        rec[12] = e.p as u8;
        out.write_all(&rec)?;
    }
    Ok(())
}
