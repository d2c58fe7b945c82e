//! Deterministic synthetic event streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{Event, EventList, Resolution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// A bright bar sweeping along +x; the leading edge fires `+1`, the
    /// trailing edge `-1`.
    MovingEdge,
    /// Uniform background activity.
    RandomNoise,
    /// Moving edge plus background activity at `noise_rate_hz`.
    Mixed,
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moving_edge" => Ok(Pattern::MovingEdge),
            "random_noise" => Ok(Pattern::RandomNoise),
            "mixed" => Ok(Pattern::Mixed),
            other => Err(Error::InvalidParameter(format!("unknown pattern {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub resolution: Resolution,
    pub duration_us: u64,
    /// Events per second of the primary process (edge, or noise for `RandomNoise`).
    pub rate_hz: f64,
    /// Background rate added by `Mixed`.
    pub noise_rate_hz: f64,
    /// When set, exactly this many events are drawn (arrival times are the
    /// order statistics of uniform samples) instead of a Poisson count.
    pub count: Option<usize>,
    pub seed: u64,
}

impl SynthParams {
    pub fn with_count(resolution: Resolution, duration_us: u64, count: usize, seed: u64) -> Self {
        SynthParams {
            resolution,
            duration_us,
            rate_hz: count as f64 / (duration_us as f64 * 1e-6),
            noise_rate_hz: 0.0,
            count: Some(count),
            seed,
        }
    }
}

// Independent streams per role keep `Mixed` with zero noise identical to `MovingEdge`.
const EDGE_STREAM: u64 = 0x6564_6765;
const NOISE_STREAM: u64 = 0x6e6f_6973;
const TIME_STREAM: u64 = 0x7469_6d65;
const SPLIT_STREAM: u64 = 0x7370_6c74;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct EdgeSource {
    rng: ChaCha8Rng,
    res: Resolution,
    bar: f64,
    speed: f64,
}

impl EdgeSource {
    fn new(params: &SynthParams) -> Self {
        let w = params.resolution.width as f64;
        EdgeSource {
            rng: rng_for(params.seed, EDGE_STREAM),
            res: params.resolution,
            bar: (w / 8.0).max(2.0),
            speed: w / params.duration_us as f64,
        }
    }

    fn emit(&mut self, t: u64) -> Event {
        let w = self.res.width as f64;
        let lead = (self.speed * t as f64).rem_euclid(w);
        let leading = self.rng.random_bool(0.5);
        let edge = if leading { lead } else { (lead - self.bar).rem_euclid(w) };
        let jitter: f64 = self.rng.random_range(-0.75..0.75);
        let x = (edge + jitter).rem_euclid(w).floor().min(w - 1.0) as u16;
        let y = self.rng.random_range(0..self.res.height);
        Event { x, y, t, p: if leading { 1 } else { -1 } }
    }
}

struct NoiseSource {
    rng: ChaCha8Rng,
    res: Resolution,
}

impl NoiseSource {
    fn new(params: &SynthParams) -> Self {
        NoiseSource { rng: rng_for(params.seed, NOISE_STREAM), res: params.resolution }
    }

    fn emit(&mut self, t: u64) -> Event {
        let x = self.rng.random_range(0..self.res.width);
        let y = self.rng.random_range(0..self.res.height);
        let p = if self.rng.random_bool(0.5) { 1 } else { -1 };
        Event { x, y, t, p }
    }
}

fn poisson_times(rate_hz: f64, duration_us: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut times = Vec::new();
    if rate_hz <= 0.0 {
        return times;
    }
    let gap = Exp::new(rate_hz * 1e-6).expect("positive rate");
    let mut t = 0.0f64;
    loop {
        t += gap.sample(rng);
        if t >= duration_us as f64 {
            return times;
        }
        times.push(t as u64);
    }
}

/// Generates a synthetic stream; a pure function of `pattern` and `params`.
pub fn generate_synthetic(pattern: Pattern, params: &SynthParams) -> Result<EventList> {
    let res = params.resolution;
    if res.width == 0 || res.height == 0 {
        return Err(Error::InvalidParameter("resolution has zero area".into()));
    }
    if params.duration_us == 0 {
        return Err(Error::InvalidParameter("duration must be > 0".into()));
    }
    if !(params.rate_hz > 0.0) || !(params.noise_rate_hz >= 0.0) {
        return Err(Error::InvalidParameter("rates must be positive".into()));
    }

    let (edge_rate, noise_rate) = match pattern {
        Pattern::MovingEdge => (params.rate_hz, 0.0),
        Pattern::RandomNoise => (0.0, params.rate_hz),
        Pattern::Mixed => (params.rate_hz, params.noise_rate_hz),
    };
    let mut edge = EdgeSource::new(params);
    let mut noise = NoiseSource::new(params);

    let events = match params.count {
        Some(n) => {
            let mut time_rng = rng_for(params.seed, TIME_STREAM);
            let mut split_rng = rng_for(params.seed, SPLIT_STREAM);
            let mut times: Vec<u64> = (0..n).map(|_| time_rng.random_range(0..params.duration_us)).collect();
            times.sort_unstable();
            let noise_share = noise_rate / (edge_rate + noise_rate);
            times
                .into_iter()
                .map(|t| if split_rng.random_bool(noise_share) { noise.emit(t) } else { edge.emit(t) })
                .collect()
        }
        None => {
            let mut time_rng = rng_for(params.seed, TIME_STREAM);
            let edge_times = poisson_times(edge_rate, params.duration_us, &mut time_rng);
            let mut noise_time_rng = rng_for(params.seed ^ NOISE_STREAM, TIME_STREAM);
            let noise_times = poisson_times(noise_rate, params.duration_us, &mut noise_time_rng);
            let mut all: Vec<Event> = edge_times.into_iter().map(|t| edge.emit(t)).collect();
            all.extend(noise_times.into_iter().map(|t| noise.emit(t)));
            all
        }
    };
    EventList::new(events, res)
}
