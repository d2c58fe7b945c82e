//! Event streams: types, file formats, subsampling, windowing and synthetic
//! generators.

mod io;
mod synth;

pub use io::{parse_events, write_bin, write_csv, EventFormat, BIN_HEADER_LEN, BIN_RECORD_LEN};
pub use synth::{generate_synthetic, Pattern, SynthParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One camera event. Polarity is always `-1` or `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    /// Timestamp in microseconds.
    pub t: u64,
    pub p: i8,
}

impl Event {
    pub fn new(x: u16, y: u16, t: u64, p: i8) -> Self {
        Event { x, y, t, p }
    }
}

/// Sensor size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: u16,
    pub height: u16,
}

impl Resolution {
    pub fn new(width: u16, height: u16) -> Self {
        Resolution { width, height }
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    pub fn larger_side(&self) -> u16 {
        self.width.max(self.height)
    }
}

impl std::str::FromStr for Resolution {
    type Err = Error;

    /// Parses `WIDTHxHEIGHT`, e.g. `64x48`.
    fn from_str(s: &str) -> Result<Self> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::InvalidParameter(format!("resolution {s:?} is not WxH")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<u16>()
                .map_err(|_| Error::InvalidParameter(format!("resolution {s:?} is not WxH")))
        };
        let res = Resolution::new(parse(w)?, parse(h)?);
        if res.width == 0 || res.height == 0 {
            return Err(Error::InvalidParameter(format!("resolution {s:?} has zero area")));
        }
        Ok(res)
    }
}

/// Time-ordered events from one sensor.
///
/// Construction validates coordinates and polarity and sorts stably by
/// timestamp, so every `EventList` is ordered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventList {
    events: Vec<Event>,
    resolution: Resolution,
}

impl EventList {
    pub fn new(mut events: Vec<Event>, resolution: Resolution) -> Result<Self> {
        for (index, e) in events.iter().enumerate() {
            if !resolution.contains(e.x, e.y) {
                return Err(Error::Validation {
                    index,
                    message: format!(
                        "coordinate ({}, {}) outside {}x{}",
                        e.x, e.y, resolution.width, resolution.height
                    ),
                });
            }
            if e.p != 1 && e.p != -1 {
                return Err(Error::Validation { index, message: format!("polarity {} not in {{-1, 1}}", e.p) });
            }
        }
        events.sort_by_key(|e| e.t);
        Ok(EventList { events, resolution })
    }

    pub fn empty(resolution: Resolution) -> Self {
        EventList { events: Vec::new(), resolution }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Sub-list `[start, end)`; order is preserved.
    pub fn slice(&self, start: usize, end: usize) -> EventList {
        EventList { events: self.events[start..end].to_vec(), resolution: self.resolution }
    }

    /// Keeps a subsequence selected by `keep(index)`; ordering is inherited.
    fn retain_indexed(&self, mut keep: impl FnMut(usize, &Event) -> bool) -> EventList {
        let events = self.events.iter().enumerate().filter(|(i, e)| keep(*i, e)).map(|(_, e)| *e).collect();
        EventList { events, resolution: self.resolution }
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}

/// Keeps every `k`-th event (zero-based index `i` with `i % k == 0`).
pub fn subsample_uniform(ev: &EventList, k: usize) -> Result<EventList> {
    if k == 0 {
        return Err(Error::InvalidParameter("subsample factor must be >= 1".into()));
    }
    Ok(ev.retain_indexed(|i, _| i % k == 0))
}

/// Random thinning: each event survives independently with probability `1/k`.
pub fn subsample_random(ev: &EventList, k: usize, seed: u64) -> Result<EventList> {
    if k == 0 {
        return Err(Error::InvalidParameter("subsample factor must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ev.retain_indexed(|_, _| rng.random_range(0..k) == 0))
}

/// Events with `t` in the half-open interval `(t_end - delta_t, t_end]`.
pub fn window(ev: &EventList, delta_t: u64, t_end: u64) -> Result<EventList> {
    if delta_t == 0 {
        return Err(Error::InvalidParameter("window length must be > 0".into()));
    }
    // widen to avoid underflow when t_end < delta_t
    let lo = t_end as i128 - delta_t as i128;
    Ok(ev.retain_indexed(|_, e| (e.t as i128) > lo && e.t <= t_end))
}
