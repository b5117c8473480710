//! ENF estimation from mains hum in audio and from rolling-shutter flicker in
//! video.

mod tracker;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use tracker::{confidence, squash_ratio, PeakEstimate, PeakTracker, CONFIDENCE_SCALE, NOISE_PEAK_RATIO};

use crate::error::{Error, Result};
use crate::media::{AudioBlock, Frame};
use crate::signal::{read_series_csv, write_series_csv, EnfSeries, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionParams {
    pub nominal: f64,
    pub harmonic: u32,
    /// Half-width of the peak search around `harmonic * nominal`; defaults to
    /// `0.1 * harmonic` Hz.
    pub search_halfwidth: Option<f64>,
    pub stft_frame: f64,
    pub stft_hop: f64,
    pub window: Window,
    /// Zero-padding factor of each STFT frame.
    pub pad_factor: usize,
    /// Half-width of the band the confidence ratio averages over, Hz.
    pub confidence_halfwidth: f64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            nominal: 60.0,
            harmonic: 1,
            search_halfwidth: None,
            stft_frame: 4.0,
            stft_hop: 1.0,
            window: Window::Hann,
            pad_factor: 4,
            confidence_halfwidth: 5.0,
        }
    }
}

impl ExtractionParams {
    pub fn audio(nominal: f64) -> Self {
        Self {
            nominal,
            ..Self::default()
        }
    }

    pub fn video(nominal: f64) -> Self {
        Self {
            nominal,
            harmonic: 2,
            ..Self::default()
        }
    }

    pub fn search_halfwidth(&self) -> f64 {
        self.search_halfwidth.unwrap_or(0.1 * self.harmonic as f64)
    }

    pub fn center(&self) -> f64 {
        self.nominal * self.harmonic as f64
    }

    /// Search band `[lo, hi]` at the analyzed harmonic, Hz.
    pub fn band(&self) -> (f64, f64) {
        let hw = self.search_halfwidth();
        (self.center() - hw, self.center() + hw)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nominal > 0.0) || self.harmonic == 0 {
            return Err(Error::invalid("nominal must be positive and harmonic >= 1"));
        }
        let hw = self.search_halfwidth();
        if !(hw > 0.0) || hw >= self.center() {
            return Err(Error::invalid(format!("empty or invalid search band (half-width {hw} Hz)")));
        }
        if !(self.stft_hop > 0.0) || self.stft_frame < self.stft_hop {
            return Err(Error::invalid("need stft_frame >= stft_hop > 0"));
        }
        if self.pad_factor == 0 || !(self.confidence_halfwidth >= hw) {
            return Err(Error::invalid(
                "pad factor must be >= 1 and the confidence band must contain the search band",
            ));
        }
        Ok(())
    }
}

/// Estimated ENF with per-sample confidence; flagged samples carry 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedEnf {
    pub series: EnfSeries,
    pub confidence: Vec<f64>,
}

impl ExtractedEnf {
    fn from_estimates(est: &[PeakEstimate], rate: f64) -> Result<Self> {
        let first = est
            .first()
            .ok_or_else(|| Error::invalid("input shorter than one STFT frame"))?;
        Ok(Self {
            series: EnfSeries::new(first.time, rate, est.iter().map(|e| e.freq).collect())?,
            confidence: est.iter().map(|e| e.confidence).collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_series_csv(out, &self.series, Some(&self.confidence))
    }

    /// Reads a series CSV; a missing confidence column reads as all ones.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let (series, conf) = read_series_csv(input)?;
        let confidence = conf.unwrap_or_else(|| vec![1.0; series.len()]);
        Ok(Self { series, confidence })
    }
}

/// Streaming hum-based estimator.
pub struct AudioEnfEstimator {
    tracker: PeakTracker,
    sample_rate: u32,
    estimates: Vec<PeakEstimate>,
    rate: f64,
}

impl AudioEnfEstimator {
    pub fn new(params: &ExtractionParams, sample_rate: u32) -> Result<Self> {
        let tracker = PeakTracker::new(params, sample_rate as f64)?;
        let rate = sample_rate as f64 / tracker.layout().hop_samples as f64;
        Ok(Self {
            tracker,
            sample_rate,
            estimates: Vec::new(),
            rate,
        })
    }

    pub fn push(&mut self, block: &AudioBlock) -> Result<&[PeakEstimate]> {
        if block.sample_rate != self.sample_rate {
            return Err(Error::invalid(format!(
                "audio block at {} Hz fed to a {} Hz estimator",
                block.sample_rate, self.sample_rate
            )));
        }
        let from = self.estimates.len();
        self.estimates.extend(self.tracker.push(&block.samples));
        Ok(&self.estimates[from..])
    }

    pub fn finish(self) -> Result<ExtractedEnf> {
        ExtractedEnf::from_estimates(&self.estimates, self.rate)
    }
}

/// Estimates the ENF from an audio stream starting at time 0.
pub fn estimate_enf_audio<I>(blocks: I, params: &ExtractionParams) -> Result<ExtractedEnf>
where
    I: IntoIterator<Item = Result<AudioBlock>>,
{
    let mut blocks = blocks.into_iter().peekable();
    let sr = match blocks.peek() {
        Some(Ok(b)) => b.sample_rate,
        Some(Err(_)) => return Err(blocks.next().expect("peeked").unwrap_err()),
        None => return Err(Error::invalid("empty audio stream")),
    };
    let mut est = AudioEnfEstimator::new(params, sr)?;
    for b in blocks {
        est.push(&b?)?;
    }
    est.finish()
}

/// Streaming rolling-shutter estimator: row means in readout order, minus
/// each frame's mean, linearly resampled to `fps * height` samples per second.
pub struct VideoEnfEstimator {
    tracker: PeakTracker,
    height: u32,
    rate: f64,
    out_rate: f64,
    origin: Option<f64>,
    prev: Option<(f64, f64)>,
    next_out: u64,
    estimates: Vec<PeakEstimate>,
    scratch: Vec<f64>,
}

impl VideoEnfEstimator {
    pub fn new(params: &ExtractionParams, fps_numerator: u32, fps_denominator: u32, height: u32) -> Result<Self> {
        if fps_numerator == 0 || fps_denominator == 0 || height == 0 {
            return Err(Error::invalid("fps and height must be positive"));
        }
        let out_rate = fps_numerator as f64 * height as f64 / fps_denominator as f64;
        let tracker = PeakTracker::new(params, out_rate)?;
        let rate = out_rate / tracker.layout().hop_samples as f64;
        Ok(Self {
            tracker,
            height,
            rate,
            out_rate,
            origin: None,
            prev: None,
            next_out: 0,
            estimates: Vec::new(),
            scratch: Vec::new(),
        })
    }

    pub fn push(&mut self, frame: &Frame) -> Result<&[PeakEstimate]> {
        if frame.height != self.height || frame.width == 0 {
            return Err(Error::invalid(format!(
                "frame height {} does not match estimator height {}",
                frame.height, self.height
            )));
        }
        let means: Vec<f64> = (0..frame.height)
            .map(|r| frame.row(r).iter().map(|&p| p as f64).sum::<f64>() / frame.width as f64)
            .collect();
        let frame_mean = means.iter().sum::<f64>() / means.len() as f64;
        let origin = *self.origin.get_or_insert(frame.timestamp());
        self.scratch.clear();
        for (r, m) in means.iter().enumerate() {
            let t = frame.timestamp() + frame.row_time(r as u32) - origin;
            let v = m - frame_mean;
            match self.prev {
                Some((t0, _)) if t <= t0 => {
                    return Err(Error::invalid(format!(
                        "row times must increase (frame {} row {r})",
                        frame.index
                    )));
                }
                Some((t0, v0)) => loop {
                    let tj = self.next_out as f64 / self.out_rate;
                    // Tolerate float jitter when a row lands on a grid point.
                    if tj > t + 1e-12 {
                        break;
                    }
                    let w = ((tj - t0) / (t - t0)).clamp(0.0, 1.0);
                    self.scratch.push(v0 + w * (v - v0));
                    self.next_out += 1;
                },
                None => {
                    self.scratch.push(v);
                    self.next_out = 1;
                }
            }
            self.prev = Some((t, v));
        }
        let from = self.estimates.len();
        let mut new = self.tracker.push(&self.scratch);
        for e in &mut new {
            e.time += origin;
        }
        self.estimates.extend(new);
        Ok(&self.estimates[from..])
    }

    pub fn finish(self) -> Result<ExtractedEnf> {
        ExtractedEnf::from_estimates(&self.estimates, self.rate)
    }
}

/// Estimates the ENF from the flicker in a rolling-shutter frame stream.
pub fn estimate_enf_video<I>(
    frames: I,
    params: &ExtractionParams,
    fps_numerator: u32,
    fps_denominator: u32,
) -> Result<ExtractedEnf>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    let mut est: Option<VideoEnfEstimator> = None;
    for f in frames {
        let f = f?;
        let e = match est.as_mut() {
            Some(e) => e,
            None => est.insert(VideoEnfEstimator::new(params, fps_numerator, fps_denominator, f.height)?),
        };
        e.push(&f)?;
    }
    est.ok_or_else(|| Error::invalid("empty frame stream"))?.finish()
}
