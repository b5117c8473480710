//! Streaming STFT peak tracker shared by the audio and video estimators.

use crate::error::{Error, Result};
use crate::signal::{FrameTransform, SpectrumBlock, StftLayout};

use super::ExtractionParams;

/// Peak-to-mean ratio a white-noise band typically reaches; confidence is
/// zero at or below it.
pub const NOISE_PEAK_RATIO: f64 = 3.5;
/// Scale of the exponential squash above [`NOISE_PEAK_RATIO`].
pub const CONFIDENCE_SCALE: f64 = 3.0;

/// One tracked STFT frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEstimate {
    /// Frame center, seconds from the first sample.
    pub time: f64,
    /// Fundamental estimate (peak divided by the harmonic), clamped to band.
    pub freq: f64,
    pub confidence: f64,
    /// The refined peak fell outside the search band, or no peak existed.
    pub flagged: bool,
}

/// Maps a peak-to-mean magnitude ratio onto `[0, 1)`.
pub fn squash_ratio(ratio: f64) -> f64 {
    if !ratio.is_finite() || ratio <= NOISE_PEAK_RATIO {
        return 0.0;
    }
    1.0 - (-(ratio - NOISE_PEAK_RATIO) / CONFIDENCE_SCALE).exp()
}

/// Ratio of `peak` to the mean magnitude over `[lo_hz, hi_hz]`, squashed.
pub fn confidence(spectrum: &SpectrumBlock, peak: usize, lo_hz: f64, hi_hz: f64) -> f64 {
    let df = spectrum.bin_spacing();
    let lo = (lo_hz / df).ceil().max(1.0) as usize;
    let hi = ((hi_hz / df).floor() as usize).min(spectrum.n_samples / 2);
    if hi < lo {
        return 0.0;
    }
    let sum: f64 = spectrum.bin_values[lo..=hi].iter().map(|c| c.norm()).sum();
    let mean = sum / (hi - lo + 1) as f64;
    let p = spectrum.bin_values[peak].norm();
    if mean <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    squash_ratio(p / mean)
}

/// Vertex offset in bins of the parabola through three log magnitudes.
fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// Single-pass tracker holding at most one frame of samples.
pub struct PeakTracker {
    layout: StftLayout,
    sample_rate: f64,
    transform: FrameTransform,
    harmonic: f64,
    band: (f64, f64),
    conf_band: (f64, f64),
    buf: Vec<f64>,
    /// Absolute index of `buf[0]`.
    offset: u64,
    emitted: u64,
}

impl PeakTracker {
    pub fn new(params: &ExtractionParams, sample_rate: f64) -> Result<Self> {
        params.validate()?;
        let nyquist = sample_rate / 2.0;
        let (lo, hi) = params.band();
        if hi >= nyquist {
            return Err(Error::UnsupportedConfiguration(format!(
                "search band up to {hi} Hz exceeds Nyquist {nyquist} Hz"
            )));
        }
        let center = params.center();
        let conf_band = (
            (center - params.confidence_halfwidth).max(0.0),
            (center + params.confidence_halfwidth).min(nyquist),
        );
        let layout = StftLayout::new(sample_rate, params.stft_frame, params.stft_hop)?;
        if layout.frame_samples < 3 {
            return Err(Error::invalid("STFT frame must span at least 3 samples"));
        }
        Ok(Self {
            transform: FrameTransform::new(layout.frame_samples, params.window, params.pad_factor),
            layout,
            sample_rate,
            harmonic: params.harmonic as f64,
            band: (lo, hi),
            conf_band,
            buf: Vec::with_capacity(layout.frame_samples),
            offset: 0,
            emitted: 0,
        })
    }

    pub fn layout(&self) -> StftLayout {
        self.layout
    }

    /// Number of estimates produced so far.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Feeds samples; returns every estimate whose frame is now complete.
    pub fn push(&mut self, samples: &[f64]) -> Vec<PeakEstimate> {
        let mut out = Vec::new();
        let n = self.layout.frame_samples;
        let hop = self.layout.hop_samples;
        let mut rest = samples;
        while !rest.is_empty() {
            let next_start = self.emitted * hop as u64;
            // Samples before the next frame start (hop > frame is impossible).
            let skip = next_start.saturating_sub(self.offset + self.buf.len() as u64) as usize;
            if skip > 0 {
                let s = skip.min(rest.len());
                rest = &rest[s..];
                self.offset += s as u64;
                continue;
            }
            let take = (n - self.buf.len()).min(rest.len());
            self.buf.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
            if self.buf.len() == n {
                out.push(self.estimate());
                self.emitted += 1;
                let drop = hop.min(n);
                self.buf.drain(..drop);
                self.offset += drop as u64;
            }
        }
        out
    }

    fn estimate(&mut self) -> PeakEstimate {
        let start = self.emitted as f64 * self.layout.hop_samples as f64;
        let time = (start + self.layout.frame_samples as f64 / 2.0) / self.sample_rate;
        let spectrum = self.transform.transform(&self.buf, self.sample_rate);
        let (lo, hi) = self.band;
        let center = (lo + hi) / 2.0;
        let fallback = PeakEstimate {
            time,
            freq: center / self.harmonic,
            confidence: 0.0,
            flagged: true,
        };
        let df = spectrum.bin_spacing();
        let k_lo = (lo / df).ceil().max(1.0) as usize;
        let k_hi = (hi / df).floor() as usize;
        let mags = |k: usize| spectrum.bin_values[k].norm();
        let Some(peak) = (k_lo..=k_hi)
            .filter(|&k| mags(k) > 0.0)
            .max_by(|&a, &b| mags(a).total_cmp(&mags(b)))
        else {
            return fallback;
        };
        let (a, b, c) = (mags(peak - 1), mags(peak), mags(peak + 1));
        let delta = if a > 0.0 && c > 0.0 {
            parabolic_offset(a.ln(), b.ln(), c.ln())
        } else {
            0.0
        };
        let f = (peak as f64 + delta) * df;
        let clamped = f.clamp(lo, hi);
        // A maximum on an edge bin with a larger neighbor outside means the
        // true peak lies beyond the band.
        let rising_out = (peak == k_lo && a > b) || (peak == k_hi && c > b);
        let flagged = clamped != f || rising_out;
        PeakEstimate {
            time,
            freq: clamped / self.harmonic,
            confidence: if flagged {
                0.0
            } else {
                confidence(&spectrum, peak, self.conf_band.0, self.conf_band.1)
            },
            flagged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_vertex() {
        // y = -(x - 0.3)^2 at x = -1, 0, 1
        let y = |x: f64| -(x - 0.3) * (x - 0.3);
        assert!((parabolic_offset(y(-1.0), y(0.0), y(1.0)) - 0.3).abs() < 1e-12);
        assert_eq!(parabolic_offset(1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn squash_is_monotone_and_bounded() {
        assert_eq!(squash_ratio(1.0), 0.0);
        assert_eq!(squash_ratio(f64::NAN), 0.0);
        let mut last = 0.0;
        for r in 4..100 {
            let c = squash_ratio(r as f64);
            assert!(c >= last && c < 1.0);
            last = c;
        }
    }
}
