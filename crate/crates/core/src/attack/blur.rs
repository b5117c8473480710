use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::Frame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlurParams {
    /// Odd kernel side in px.
    pub kernel_size: u32,
    /// Standard deviation in px; `None` means `kernel_size / 6`.
    pub sigma: Option<f64>,
}

impl Default for BlurParams {
    fn default() -> Self {
        Self {
            kernel_size: 21,
            sigma: None,
        }
    }
}

impl BlurParams {
    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(self.kernel_size as f64 / 6.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "blur kernel must be odd and >= 3, got {}",
                self.kernel_size
            )));
        }
        if !(self.sigma() > 0.0) {
            return Err(Error::invalid("blur sigma must be positive"));
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian taps. The 2-D kernel is their outer product,
    /// which equals the normalized `exp(-(x² + y²) / 2σ²)` kernel.
    pub fn taps(&self) -> Vec<f32> {
        let r = (self.kernel_size / 2) as i64;
        let s = self.sigma();
        let raw: Vec<f64> = (-r..=r)
            .map(|x| (-(x * x) as f64 / (2.0 * s * s)).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.iter().map(|w| (w / sum) as f32).collect()
    }
}

/// Reusable separable blur with edge replication.
#[derive(Debug, Clone)]
pub struct GaussianBlur {
    taps: Vec<f32>,
    padded: Vec<f32>,
    tmp: Vec<f32>,
}

impl GaussianBlur {
    pub fn new(params: &BlurParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            taps: params.taps(),
            padded: Vec::new(),
            tmp: Vec::new(),
        })
    }

    pub fn kernel_size(&self) -> usize {
        self.taps.len()
    }

    /// Blurs a float plane in place of `out`.
    pub fn blur_plane(&mut self, src: &[f32], width: usize, height: usize, out: &mut Vec<f32>) -> Result<()> {
        let k = self.taps.len();
        if k > width || k > height {
            return Err(Error::invalid(format!(
                "{k}x{k} kernel does not fit a {width}x{height} frame"
            )));
        }
        let r = k / 2;
        self.tmp.resize(width * height, 0.0);
        self.padded.resize(width.max(height) + 2 * r, 0.0);

        // Horizontal pass.
        for y in 0..height {
            let row = &src[y * width..(y + 1) * width];
            let p = &mut self.padded[..width + 2 * r];
            p[..r].fill(row[0]);
            p[r..r + width].copy_from_slice(row);
            p[r + width..].fill(row[width - 1]);
            let dst = &mut self.tmp[y * width..(y + 1) * width];
            for (x, d) in dst.iter_mut().enumerate() {
                *d = p[x..x + k].iter().zip(&self.taps).map(|(a, b)| a * b).sum();
            }
        }

        // Vertical pass, accumulated row by row so the inner loop runs along x.
        out.clear();
        out.resize(width * height, 0.0);
        for y in 0..height {
            let dst = &mut out[y * width..(y + 1) * width];
            for (j, &w) in self.taps.iter().enumerate() {
                let sy = (y + j).saturating_sub(r).min(height - 1);
                let srow = &self.tmp[sy * width..(sy + 1) * width];
                for (d, &s) in dst.iter_mut().zip(srow) {
                    *d += w * s;
                }
            }
        }
        Ok(())
    }

    pub fn blur(&mut self, frame: &Frame) -> Result<Frame> {
        let (w, h) = (frame.width as usize, frame.height as usize);
        let src: Vec<f32> = frame.pixels.iter().map(|&p| p as f32).collect();
        let mut out = Vec::new();
        self.blur_plane(&src, w, h, &mut out)?;
        Ok(Frame {
            pixels: out
                .iter()
                .map(|v| v.round().clamp(0.0, 255.0) as u8)
                .collect(),
            ..frame.clone_header()
        })
    }
}

impl Frame {
    pub(crate) fn clone_header(&self) -> Frame {
        Frame {
            index: self.index,
            width: self.width,
            height: self.height,
            timestamp_ns: self.timestamp_ns,
            row_readout_ns: self.row_readout_ns,
            pixels: Vec::new(),
        }
    }
}

/// Low-pass filters `frame` with a normalized Gaussian kernel.
pub fn gaussian_blur(frame: &Frame, params: &BlurParams) -> Result<Frame> {
    GaussianBlur::new(params)?.blur(frame)
}
