//! Grid-frequency model: synthetic ENF series and their cumulative phase.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the simulated power grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    /// Nominal mains frequency in Hz, 50 or 60.
    pub f_nominal: f64,
    /// Half-width of the band the instantaneous frequency stays in, Hz.
    pub deviation_bound: f64,
    /// Mean-reversion rate of the walk, 1/s.
    pub reversion_rate: f64,
    /// Diffusion coefficient of the walk, Hz/sqrt(s).
    pub volatility: f64,
    /// Rate of the ENF series, Hz.
    pub sample_rate_enf: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            f_nominal: 60.0,
            deviation_bound: 0.02,
            reversion_rate: 0.05,
            volatility: 0.005,
            sample_rate_enf: 1.0,
        }
    }
}

impl GridParams {
    pub fn with_nominal(f_nominal: f64) -> Self {
        Self {
            f_nominal,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.f_nominal != 50.0 && self.f_nominal != 60.0 {
            return Err(Error::invalid(format!(
                "nominal grid frequency must be 50 or 60 Hz, got {}",
                self.f_nominal
            )));
        }
        if !(self.deviation_bound > 0.0) {
            return Err(Error::invalid("deviation bound must be positive"));
        }
        if !(self.reversion_rate >= 0.0) || !(self.volatility >= 0.0) {
            return Err(Error::invalid(
                "reversion rate and volatility must be non-negative",
            ));
        }
        if !(self.sample_rate_enf > 0.0) {
            return Err(Error::invalid("ENF sample rate must be positive"));
        }
        Ok(())
    }
}

/// Uniformly sampled instantaneous grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct EnfSeries {
    pub start_time: f64,
    pub rate: f64,
    pub values: Vec<f64>,
}

impl EnfSeries {
    pub fn new(start_time: f64, rate: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("ENF series must be non-empty"));
        }
        if !(rate > 0.0) {
            return Err(Error::invalid("ENF series rate must be positive"));
        }
        Ok(Self {
            start_time,
            rate,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.rate
    }

    /// Time of the last sample.
    pub fn end_time(&self) -> f64 {
        self.time_at(self.values.len() - 1)
    }

    /// True when `[start, end]` lies inside the sampled span.
    pub fn covers(&self, start: f64, end: f64) -> bool {
        start >= self.start_time - TIME_EPS && end <= self.end_time() + TIME_EPS
    }

    /// Linearly interpolated frequency at `t`, `None` outside the span.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if !self.covers(t, t) {
            return None;
        }
        let pos = ((t - self.start_time) * self.rate).max(0.0);
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.values.last().copied();
        }
        let frac = pos - i as f64;
        Some(self.values[i] + frac * (self.values[i + 1] - self.values[i]))
    }

    /// Writes the `time_s,freq_hz` CSV form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_series_csv(out, self, None)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let (series, _) = read_series_csv(input)?;
        Ok(series)
    }
}

const TIME_EPS: f64 = 1e-9;

/// Shared writer for plain and confidence-annotated series.
pub(crate) fn write_series_csv<W: Write>(
    out: W,
    series: &EnfSeries,
    confidence: Option<&[f64]>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::format("<csv>", e.to_string());
    match confidence {
        Some(_) => w.write_record(["time_s", "freq_hz", "confidence"]),
        None => w.write_record(["time_s", "freq_hz"]),
    }
    .map_err(io)?;
    for (i, v) in series.values.iter().enumerate() {
        let t = format!("{:.6}", series.time_at(i));
        let f = format!("{v:.6}");
        match confidence {
            Some(c) => w.write_record([t, f, format!("{:.6}", c[i])]),
            None => w.write_record([t, f]),
        }
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads a series CSV; the third column, when present, is confidence.
pub(crate) fn read_series_csv<R: Read>(input: R) -> Result<(EnfSeries, Option<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |e: String| Error::format("<csv>", e);
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.get(0) != Some("time_s") || headers.get(1) != Some("freq_hz") {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let has_conf = headers.get(2) == Some("confidence");
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut conf = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| bad(format!("missing column {i}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(e.to_string()))
        };
        times.push(field(0)?);
        values.push(field(1)?);
        if has_conf {
            conf.push(field(2)?);
        }
    }
    if times.is_empty() {
        return Err(bad("empty series".into()));
    }
    let rate = if times.len() > 1 {
        (times.len() - 1) as f64 / (times[times.len() - 1] - times[0])
    } else {
        1.0
    };
    // Rates are written with 6 decimals of time; snap to the nearest 1e-6 Hz.
    let rate = (rate * 1e6).round() / 1e6;
    let series = EnfSeries::new(times[0], rate, values)?;
    Ok((series, has_conf.then_some(conf)))
}

/// Folds `x` back into `[-bound, bound]` by mirror reflection at both edges.
fn reflect(x: f64, bound: f64) -> f64 {
    if x.abs() <= bound {
        return x;
    }
    let period = 4.0 * bound;
    let mut y = (x + bound).rem_euclid(period);
    if y > 2.0 * bound {
        y = period - y;
    }
    y - bound
}

/// Mean-reverting random walk of the grid frequency, reflected at the band
/// edges. Same `(params, duration, seed)` gives a bit-identical series.
pub fn synth_enf(params: &GridParams, duration: f64, seed: u64) -> Result<EnfSeries> {
    params.validate()?;
    if !(duration > 0.0) {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let n = ((duration * params.sample_rate_enf) - 1e-9).ceil().max(1.0) as usize;
    let dt = 1.0 / params.sample_rate_enf;
    let theta = params.reversion_rate;
    let sigma = params.volatility;
    let bound = params.deviation_bound;

    // Exact OU transition over one step; theta = 0 degenerates to Brownian motion.
    let (decay, step_sd, stationary_sd) = if theta > 0.0 {
        let decay = (-theta * dt).exp();
        let var = sigma * sigma * (1.0 - decay * decay) / (2.0 * theta);
        (decay, var.sqrt(), sigma / (2.0 * theta).sqrt())
    } else {
        (1.0, sigma * dt.sqrt(), 0.0)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut x = reflect(stationary_sd * normal(), bound);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(params.f_nominal + x);
        x = reflect(decay * x + step_sd * normal(), bound);
    }
    EnfSeries::new(0.0, params.sample_rate_enf, values)
}

/// Cumulative phase of an ENF series, precomputed at every sample so that
/// per-sample queries from the renderers are O(1).
#[derive(Debug, Clone)]
pub struct PhaseTable {
    series: EnfSeries,
    cumulative: Vec<f64>,
}

impl PhaseTable {
    pub fn new(series: EnfSeries) -> Self {
        let dt = 1.0 / series.rate;
        let mut cumulative = Vec::with_capacity(series.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in series.values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dt;
            cumulative.push(acc);
        }
        Self { series, cumulative }
    }

    pub fn series(&self) -> &EnfSeries {
        &self.series
    }

    /// `2π ∫ f dτ` from the series start to `t`, integrating the piecewise
    /// linear interpolant (the trapezoid rule at sample points).
    pub fn phase(&self, t: f64) -> Result<f64> {
        let s = &self.series;
        if !s.covers(t, t) {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside ENF span [{}, {}]",
                s.start_time,
                s.end_time()
            )));
        }
        let dt = 1.0 / s.rate;
        let pos = ((t - s.start_time) * s.rate).max(0.0);
        let i = (pos.floor() as usize).min(s.len() - 1);
        if i + 1 >= s.len() {
            return Ok(2.0 * PI * self.cumulative[i]);
        }
        let tau = (pos - i as f64) * dt;
        let f0 = s.values[i];
        let slope = (s.values[i + 1] - f0) / dt;
        Ok(2.0 * PI * (self.cumulative[i] + f0 * tau + 0.5 * slope * tau * tau))
    }
}

/// Cumulative phase of `series` at time `t` in radians.
pub fn enf_phase(series: &EnfSeries, t: f64) -> Result<f64> {
    PhaseTable::new(series.clone()).phase(t)
}
