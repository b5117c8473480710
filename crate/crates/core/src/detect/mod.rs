//! Online sliding-window correlation of extracted ENF against the grid
//! reference, with localization and threshold sweeps.

use std::collections::VecDeque;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::ExtractedEnf;
use crate::signal::{pearson, EnfSeries};

/// Reference grid recording, indexable by absolute time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDb {
    pub series: EnfSeries,
}

impl ReferenceDb {
    pub fn new(series: EnfSeries) -> Self {
        Self { series }
    }

    /// Linearly interpolated reference value; `None` outside coverage.
    pub fn at(&self, t: f64) -> Option<f64> {
        self.series.value_at(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    /// Window length in ENF samples.
    pub window_len: usize,
    /// Window advance in ENF samples.
    pub hop: usize,
    pub rho_threshold: f64,
    /// Samples below this confidence are excluded from correlation.
    pub min_confidence: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            window_len: 30,
            hop: 5,
            rho_threshold: 0.7,
            min_confidence: 0.3,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_len <= 2 {
            return Err(Error::invalid("window_len must exceed 2"));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::invalid("need 0 < hop <= window_len"));
        }
        if !(self.rho_threshold > -1.0 && self.rho_threshold < 1.0) {
            return Err(Error::invalid("rho threshold must be in (-1, 1)"));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::invalid("min_confidence must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Authentic,
    Tampered,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Authentic => "authentic",
            Verdict::Tampered => "tampered",
            Verdict::Indeterminate => "indeterminate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "authentic" => Some(Verdict::Authentic),
            "tampered" => Some(Verdict::Tampered),
            "indeterminate" => Some(Verdict::Indeterminate),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionWindow {
    pub start: f64,
    pub end: f64,
    /// `None` when the correlation is undefined or too few samples qualify.
    pub rho: Option<f64>,
    pub verdict: Verdict,
}

/// Classifies a window from its correlation and usable-sample count.
pub fn classify(rho: Option<f64>, usable: usize, params: &DetectorParams) -> Verdict {
    match rho {
        _ if 2 * usable < params.window_len => Verdict::Indeterminate,
        None => Verdict::Indeterminate,
        Some(r) if r < params.rho_threshold => Verdict::Tampered,
        Some(_) => Verdict::Authentic,
    }
}

/// Online detector: emits window `i` as soon as its last sample arrives.
pub struct SlidingDetector {
    params: DetectorParams,
    reference: ReferenceDb,
    nominal: f64,
    rate: f64,
    /// `(time, extracted, confidence)` of the most recent samples.
    buf: VecDeque<(f64, f64, f64)>,
    consumed: u64,
    gap_warned: bool,
}

impl SlidingDetector {
    pub fn new(params: DetectorParams, reference: ReferenceDb, nominal: f64, rate: f64) -> Result<Self> {
        params.validate()?;
        if !(rate > 0.0) {
            return Err(Error::invalid("series rate must be positive"));
        }
        Ok(Self {
            buf: VecDeque::with_capacity(params.window_len),
            params,
            reference,
            nominal,
            rate,
            consumed: 0,
            gap_warned: false,
        })
    }

    /// Samples consumed so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn push(&mut self, time: f64, value: f64, confidence: f64) -> Option<DetectionWindow> {
        let n = self.params.window_len;
        self.buf.push_back((time, value, confidence));
        if self.buf.len() > n {
            self.buf.pop_front();
        }
        self.consumed += 1;
        let first = self.consumed.checked_sub(n as u64)?;
        if first % self.params.hop as u64 != 0 {
            return None;
        }
        Some(self.evaluate())
    }

    fn evaluate(&mut self) -> DetectionWindow {
        let start = self.buf[0].0;
        let end = start + self.params.window_len as f64 / self.rate;
        let mut xs = Vec::with_capacity(self.buf.len());
        let mut rs = Vec::with_capacity(self.buf.len());
        for &(t, v, c) in &self.buf {
            let Some(r) = self.reference.at(t) else {
                if !self.gap_warned {
                    self.gap_warned = true;
                    log::warn!("reference does not cover t={t:.3}s; affected windows are indeterminate");
                }
                continue;
            };
            if c >= self.params.min_confidence {
                xs.push(v - self.nominal);
                rs.push(r - self.nominal);
            }
        }
        let rho = if 2 * xs.len() < self.params.window_len {
            None
        } else {
            pearson(&xs, &rs).ok()
        };
        DetectionWindow {
            start,
            end,
            rho,
            verdict: classify(rho, xs.len(), &self.params),
        }
    }
}

/// Runs the detector over a whole extracted series.
pub fn slide(
    extracted: &ExtractedEnf,
    reference: &ReferenceDb,
    params: &DetectorParams,
    nominal: f64,
) -> Result<Vec<DetectionWindow>> {
    let s = &extracted.series;
    if extracted.confidence.len() != s.len() {
        return Err(Error::invalid("confidence length differs from series length"));
    }
    let mut det = SlidingDetector::new(params.clone(), reference.clone(), nominal, s.rate)?;
    Ok((0..s.len())
        .filter_map(|i| det.push(s.time_at(i), s.values[i], extracted.confidence[i]))
        .collect())
}

/// Maximal runs of tampered windows, merging runs separated by fewer than
/// two non-tampered windows. Returns `(onset, end)` pairs in seconds.
pub fn localize(windows: &[DetectionWindow]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut last_tampered: Option<usize> = None;
    for (i, w) in windows.iter().enumerate() {
        if w.verdict != Verdict::Tampered {
            continue;
        }
        match (last_tampered, out.last_mut()) {
            (Some(j), Some(run)) if i - j - 1 < 2 => run.1 = run.1.max(w.end),
            _ => out.push((w.start, w.end)),
        }
        last_tampered = Some(i);
    }
    out
}

/// Merges per-path windows at matching positions: tampered if any path says
/// so, authentic if any path is authentic and none tampered; rho is the
/// smallest defined value.
pub fn merge_windows(paths: &[&[DetectionWindow]]) -> Vec<DetectionWindow> {
    let n = paths.iter().map(|p| p.len()).max().unwrap_or(0);
    (0..n)
        .map(|i| {
            let ws: Vec<&DetectionWindow> = paths.iter().filter_map(|p| p.get(i)).collect();
            let verdict = if ws.iter().any(|w| w.verdict == Verdict::Tampered) {
                Verdict::Tampered
            } else if ws.iter().any(|w| w.verdict == Verdict::Authentic) {
                Verdict::Authentic
            } else {
                Verdict::Indeterminate
            };
            let rho = ws.iter().filter_map(|w| w.rho).reduce(f64::min);
            DetectionWindow {
                start: ws[0].start,
                end: ws[0].end,
                rho,
                verdict,
            }
        })
        .collect()
}

pub fn write_windows_csv<W: Write>(out: W, windows: &[DetectionWindow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = |e: csv::Error| Error::format("<detection csv>", e.to_string());
    w.write_record(["start_s", "end_s", "rho", "verdict"]).map_err(err)?;
    for d in windows {
        w.write_record([
            format!("{:.6}", d.start),
            format!("{:.6}", d.end),
            d.rho.map(|r| format!("{r:.6}")).unwrap_or_default(),
            d.verdict.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<detection csv>", e))?;
    Ok(())
}

pub fn read_windows_csv<R: Read>(input: R) -> Result<Vec<DetectionWindow>> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |m: String| Error::format("<detection csv>", m);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|e| bad(format!("column {i}: {e}")))
        };
        let rho = match rec.get(2).unwrap_or("") {
            "" => None,
            _ => Some(num(2)?),
        };
        let verdict = rec
            .get(3)
            .and_then(Verdict::parse)
            .ok_or_else(|| bad(format!("bad verdict {:?}", rec.get(3))))?;
        out.push(DetectionWindow {
            start: num(0)?,
            end: num(1)?,
            rho,
            verdict,
        });
    }
    Ok(out)
}

/// Ground-truth class of a detection window for threshold sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowLabel {
    /// At least half the window's samples were replayed.
    Positive,
    /// No sample's analysis frame touches replayed media.
    Negative,
    /// Partially replayed; left out of the rates.
    Excluded,
}

/// Labels windows against replay intervals. `rate` is the ENF sample rate and
/// `frame_halfwidth` the half-length of each sample's analysis frame, seconds.
pub fn label_windows(
    windows: &[DetectionWindow],
    replays: &[(f64, f64)],
    rate: f64,
    window_len: usize,
    frame_halfwidth: f64,
) -> Vec<WindowLabel> {
    let inside = |t: f64| replays.iter().any(|&(a, b)| t >= a && t < b);
    let touches = |t: f64| {
        replays
            .iter()
            .any(|&(a, b)| t + frame_halfwidth > a && t - frame_halfwidth < b)
    };
    windows
        .iter()
        .map(|w| {
            let times: Vec<f64> = (0..window_len).map(|i| w.start + i as f64 / rate).collect();
            let replayed = times.iter().filter(|&&t| inside(t)).count();
            if 2 * replayed >= window_len {
                WindowLabel::Positive
            } else if !times.iter().any(|&t| touches(t)) {
                WindowLabel::Negative
            } else {
                WindowLabel::Excluded
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    /// NaN when the corpus has no positive windows.
    pub true_positive_rate: f64,
    /// NaN when the corpus has no negative windows.
    pub false_positive_rate: f64,
}

/// One scenario's windows as `(rho, ground-truth label)`.
pub type ScoredWindows = Vec<(Option<f64>, WindowLabel)>;

/// Per-window rates over a labeled corpus of `(rho, label)` pairs; a window is
/// flagged at threshold `θ` when its rho is defined and below `θ`.
pub fn roc_sweep(corpus: &[ScoredWindows], thresholds: &[f64]) -> Result<Vec<RocPoint>> {
    let all: Vec<(Option<f64>, WindowLabel)> = corpus.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(Error::invalid("empty scenario corpus"));
    }
    let rate = |label: WindowLabel, th: f64| {
        let class: Vec<_> = all.iter().filter(|(_, l)| *l == label).collect();
        let flagged = class.iter().filter(|(r, _)| r.is_some_and(|r| r < th)).count();
        flagged as f64 / class.len() as f64
    };
    Ok(thresholds
        .iter()
        .map(|&th| RocPoint {
            threshold: th,
            true_positive_rate: rate(WindowLabel::Positive, th),
            false_positive_rate: rate(WindowLabel::Negative, th),
        })
        .collect())
}
