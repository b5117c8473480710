//! Audio noise gate: mean spectral magnitude outside the hum lines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::AudioBlock;
use crate::signal::{FrameTransform, Window};

pub const MIN_GATE_BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseGateParams {
    /// Gate threshold on the mean magnitude, in units of `|A_k| / sqrt(N)`
    /// (white noise of deviation σ reads about 0.886 σ).
    pub threshold: f64,
    /// Mains nominal; every multiple below Nyquist is excluded.
    pub nominal: f64,
    /// Half-width of the exclusion around each hum harmonic, Hz.
    pub guard_hz: f64,
    /// Gate block length in samples.
    pub block: usize,
}

impl Default for NoiseGateParams {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            nominal: 60.0,
            guard_hz: 1.0,
            block: 2048,
        }
    }
}

/// Stateful gate caching the FFT plan for one block length.
pub struct NoiseGate {
    params: NoiseGateParams,
    transform: Option<FrameTransform>,
}

impl NoiseGate {
    pub fn new(params: NoiseGateParams) -> Result<Self> {
        if params.block < MIN_GATE_BLOCK {
            return Err(Error::invalid(format!(
                "gate block must hold at least {MIN_GATE_BLOCK} samples"
            )));
        }
        if !(params.threshold >= 0.0) || !(params.guard_hz >= 0.0) || !(params.nominal > 0.0) {
            return Err(Error::invalid("invalid noise gate parameters"));
        }
        Ok(Self {
            params,
            transform: None,
        })
    }

    pub fn params(&self) -> &NoiseGateParams {
        &self.params
    }

    /// Mean normalized magnitude over the one-sided spectrum, excluding DC and
    /// every bin whose extent comes within `guard_hz` of a hum harmonic.
    pub fn mean_magnitude(&mut self, samples: &[f64], sample_rate: u32) -> Result<f64> {
        let n = samples.len();
        if n < MIN_GATE_BLOCK {
            return Err(Error::invalid(format!(
                "noise gate needs >= {MIN_GATE_BLOCK} samples, got {n}"
            )));
        }
        if self.transform.as_ref().map(|t| t.frame_samples()) != Some(n) {
            self.transform = Some(FrameTransform::new(n, Window::Rect, 1));
        }
        let spec = self
            .transform
            .as_mut()
            .expect("plan just built")
            .transform(samples, sample_rate as f64);
        let df = spec.bin_spacing();
        let nyquist = sample_rate as f64 / 2.0;
        let reach = self.params.guard_hz + df / 2.0;
        let nominal = self.params.nominal;
        let (mut sum, mut count) = (0.0, 0usize);
        for k in 1..=n / 2 {
            let f = k as f64 * df;
            let h = (f / nominal).round();
            if h >= 1.0 && h * nominal < nyquist && (f - h * nominal).abs() < reach {
                continue;
            }
            sum += spec.bin_values[k].norm();
            count += 1;
        }
        if count == 0 {
            return Ok(0.0);
        }
        Ok(sum / count as f64 / (n as f64).sqrt())
    }

    pub fn is_noisy(&mut self, samples: &[f64], sample_rate: u32) -> Result<bool> {
        Ok(self.mean_magnitude(samples, sample_rate)? > self.params.threshold)
    }
}

/// One-shot form of [`NoiseGate::is_noisy`] on a whole block.
pub fn detect_audio_noise(block: &AudioBlock, params: &NoiseGateParams) -> Result<bool> {
    let p = NoiseGateParams {
        block: block.samples.len().max(MIN_GATE_BLOCK),
        ..params.clone()
    };
    NoiseGate::new(p)?.is_noisy(&block.samples, block.sample_rate)
}
