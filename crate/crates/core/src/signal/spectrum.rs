//! Discrete Fourier transform and short-time spectra.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Rect,
}

impl Window {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Complex DFT coefficients of a real block.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBlock {
    pub bin_values: Vec<Complex64>,
    pub n_samples: usize,
    pub sample_rate: f64,
}

impl SpectrumBlock {
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate / self.n_samples as f64
    }

    pub fn bin_spacing(&self) -> f64 {
        self.sample_rate / self.n_samples as f64
    }

    /// Nearest bin to `freq`.
    pub fn bin_of(&self, freq: f64) -> usize {
        (freq / self.bin_spacing()).round().max(0.0) as usize
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bin_values.iter().map(|c| c.norm()).collect()
    }
}

/// `A_k = Σ_n a_n e^{-j 2π k n / N}` for all `k`, with unit sample rate.
pub fn dft(samples: &[f64]) -> Result<SpectrumBlock> {
    dft_at_rate(samples, 1.0)
}

pub fn dft_at_rate(samples: &[f64], sample_rate: f64) -> Result<SpectrumBlock> {
    if samples.is_empty() {
        return Err(Error::invalid("DFT of an empty block"));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(samples.len());
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft.process(&mut buf);
    Ok(SpectrumBlock {
        bin_values: buf,
        n_samples: samples.len(),
        sample_rate,
    })
}

/// Inverse of [`dft`]; returns the real part of the reconstruction.
pub fn idft(block: &SpectrumBlock) -> Vec<f64> {
    let n = block.bin_values.len();
    if n == 0 {
        return Vec::new();
    }
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut buf = block.bin_values.clone();
    fft.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Framing of an STFT in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftLayout {
    pub frame_samples: usize,
    pub hop_samples: usize,
}

impl StftLayout {
    pub fn new(sample_rate: f64, frame_len: f64, hop: f64) -> Result<Self> {
        if !(hop > 0.0) || frame_len < hop {
            return Err(Error::invalid(format!(
                "STFT needs frame_len >= hop > 0 (frame {frame_len}, hop {hop})"
            )));
        }
        let frame_samples = (frame_len * sample_rate).round() as usize;
        let hop_samples = (hop * sample_rate).round() as usize;
        if frame_samples == 0 || hop_samples == 0 {
            return Err(Error::invalid("STFT frame or hop shorter than one sample"));
        }
        Ok(Self {
            frame_samples,
            hop_samples,
        })
    }

    pub fn frame_count(&self, n: usize) -> usize {
        if n < self.frame_samples {
            0
        } else {
            (n - self.frame_samples) / self.hop_samples + 1
        }
    }
}

/// Windowed forward transform of fixed length with a cached plan, optionally
/// zero-padded by an integer factor.
pub struct FrameTransform {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    padded_len: usize,
    scratch: Vec<Complex64>,
}

impl FrameTransform {
    pub fn new(frame_samples: usize, window: Window, pad_factor: usize) -> Self {
        let padded_len = frame_samples * pad_factor.max(1);
        let fft = FftPlanner::<f64>::new().plan_fft_forward(padded_len);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self {
            window: window.coefficients(frame_samples),
            fft,
            padded_len,
            scratch,
        }
    }

    pub fn frame_samples(&self) -> usize {
        self.window.len()
    }

    pub fn padded_len(&self) -> usize {
        self.padded_len
    }

    /// Transforms one frame; `frame.len()` must equal the configured length.
    pub fn transform(&mut self, frame: &[f64], sample_rate: f64) -> SpectrumBlock {
        debug_assert_eq!(frame.len(), self.window.len());
        let mut buf = vec![Complex64::default(); self.padded_len];
        for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
            b.re = x * w;
        }
        self.fft.process_with_scratch(&mut buf, &mut self.scratch);
        SpectrumBlock {
            bin_values: buf,
            n_samples: self.padded_len,
            sample_rate,
        }
    }
}

/// Short-time spectra; each entry carries the frame's center time relative to
/// the first sample. Too few samples yields an empty result.
pub fn stft(
    samples: &[f64],
    sample_rate: f64,
    frame_len: f64,
    hop: f64,
    window: Window,
) -> Result<Vec<(f64, SpectrumBlock)>> {
    let layout = StftLayout::new(sample_rate, frame_len, hop)?;
    let mut tf = FrameTransform::new(layout.frame_samples, window, 1);
    Ok((0..layout.frame_count(samples.len()))
        .map(|i| {
            let start = i * layout.hop_samples;
            let frame = &samples[start..start + layout.frame_samples];
            let center = (start as f64 + layout.frame_samples as f64 / 2.0) / sample_rate;
            (center, tf.transform(frame, sample_rate))
        })
        .collect())
}
