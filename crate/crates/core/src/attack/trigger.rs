//! Fiducial trigger: normalized cross-correlation over every placement of a
//! template, numerator via 2-D real FFT, local statistics via integral images.

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::media::{fiducial_template, Frame};

pub const DEFAULT_NCC_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Template {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != (width * height) as usize {
            return Err(Error::invalid("template dimensions do not match its pixels"));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// The checkerboard marker the renderer paints.
    pub fn fiducial() -> Self {
        let (n, pixels) = fiducial_template();
        Self {
            width: n,
            height: n,
            pixels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerHit {
    /// Top-left corner of the best placement.
    pub x: u32,
    pub y: u32,
    pub ncc: f64,
}

/// 2-D real FFT over a fixed `width x height` plane.
struct Fft2 {
    width: usize,
    height: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    row_in: Vec<f64>,
    row_spec: Vec<Complex64>,
    column: Vec<Complex64>,
}

impl Fft2 {
    fn new(width: usize, height: usize) -> Self {
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        let r2c = rp.plan_fft_forward(width);
        let c2r = rp.plan_fft_inverse(width);
        Self {
            width,
            height,
            row_in: r2c.make_input_vec(),
            row_spec: r2c.make_output_vec(),
            r2c,
            c2r,
            col_fwd: cp.plan_fft_forward(height),
            col_inv: cp.plan_fft_inverse(height),
            column: vec![Complex64::default(); height],
        }
    }

    fn spec_width(&self) -> usize {
        self.width / 2 + 1
    }

    fn forward(&mut self, plane: &[f64], out: &mut [Complex64]) {
        let (w, h, wc) = (self.width, self.height, self.spec_width());
        for y in 0..h {
            self.row_in.copy_from_slice(&plane[y * w..(y + 1) * w]);
            self.r2c
                .process(&mut self.row_in, &mut self.row_spec)
                .expect("row length matches plan");
            out[y * wc..(y + 1) * wc].copy_from_slice(&self.row_spec);
        }
        for c in 0..wc {
            for y in 0..h {
                self.column[y] = out[y * wc + c];
            }
            self.col_fwd.process(&mut self.column);
            for y in 0..h {
                out[y * wc + c] = self.column[y];
            }
        }
    }

    /// Unnormalized inverse; `spec` is clobbered.
    fn inverse(&mut self, spec: &mut [Complex64], plane: &mut [f64]) {
        let (w, h, wc) = (self.width, self.height, self.spec_width());
        for c in 0..wc {
            for y in 0..h {
                self.column[y] = spec[y * wc + c];
            }
            self.col_inv.process(&mut self.column);
            for y in 0..h {
                spec[y * wc + c] = self.column[y];
            }
        }
        for y in 0..h {
            self.row_spec.copy_from_slice(&spec[y * wc..(y + 1) * wc]);
            // DC and Nyquist bins of a real row are real; drop rounding residue.
            self.row_spec[0].im = 0.0;
            if w % 2 == 0 {
                self.row_spec[wc - 1].im = 0.0;
            }
            self.c2r
                .process(&mut self.row_spec, &mut self.row_in)
                .expect("row length matches plan");
            plane[y * w..(y + 1) * w].copy_from_slice(&self.row_in);
        }
    }
}

/// Template matcher bound to one frame size.
pub struct TemplateMatcher {
    tw: usize,
    th: usize,
    width: usize,
    height: usize,
    template_energy: f64,
    template_spec: Vec<Complex64>,
    fft: Fft2,
    plane: Vec<f64>,
    spec: Vec<Complex64>,
    cross: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl TemplateMatcher {
    pub fn new(template: &Template, width: u32, height: u32) -> Result<Self> {
        let (tw, th) = (template.width as usize, template.height as usize);
        let (w, h) = (width as usize, height as usize);
        if tw > w || th > h {
            return Err(Error::invalid(format!(
                "{tw}x{th} template does not fit a {w}x{h} frame"
            )));
        }
        let n = (tw * th) as f64;
        let mean = template.pixels.iter().map(|&p| p as f64).sum::<f64>() / n;
        let mut padded = vec![0.0; w * h];
        let mut energy = 0.0;
        for y in 0..th {
            for x in 0..tw {
                let v = template.pixels[y * tw + x] as f64 - mean;
                padded[y * w + x] = v;
                energy += v * v;
            }
        }
        let mut fft = Fft2::new(w, h);
        let wc = fft.spec_width();
        let mut template_spec = vec![Complex64::default(); wc * h];
        fft.forward(&padded, &mut template_spec);
        for c in &mut template_spec {
            *c = c.conj();
        }
        Ok(Self {
            tw,
            th,
            width: w,
            height: h,
            template_energy: energy,
            template_spec,
            fft,
            plane: padded,
            spec: vec![Complex64::default(); wc * h],
            cross: vec![0.0; w * h],
            sum: vec![0.0; (w + 1) * (h + 1)],
            sum_sq: vec![0.0; (w + 1) * (h + 1)],
        })
    }

    /// NCC at every valid placement, row-major over
    /// `(width - tw + 1) x (height - th + 1)`.
    pub fn ncc_map(&mut self, frame: &Frame) -> Result<Vec<f64>> {
        let (w, h) = (self.width, self.height);
        if frame.width as usize != w || frame.height as usize != h {
            return Err(Error::invalid("frame size differs from matcher"));
        }
        for (d, &p) in self.plane.iter_mut().zip(&frame.pixels) {
            *d = p as f64;
        }
        self.fft.forward(&self.plane, &mut self.spec);
        for (s, t) in self.spec.iter_mut().zip(&self.template_spec) {
            *s *= t;
        }
        self.fft.inverse(&mut self.spec, &mut self.cross);
        let scale = 1.0 / (w * h) as f64;

        // Integral images with a zero top row and left column.
        let stride = w + 1;
        for y in 0..h {
            let (mut row, mut row_sq) = (0.0, 0.0);
            for x in 0..w {
                let v = self.plane[y * w + x];
                row += v;
                row_sq += v * v;
                self.sum[(y + 1) * stride + x + 1] = self.sum[y * stride + x + 1] + row;
                self.sum_sq[(y + 1) * stride + x + 1] = self.sum_sq[y * stride + x + 1] + row_sq;
            }
        }
        let n = (self.tw * self.th) as f64;
        let box_sum = |s: &[f64], x: usize, y: usize| {
            s[(y + self.th) * stride + x + self.tw] - s[y * stride + x + self.tw]
                - s[(y + self.th) * stride + x]
                + s[y * stride + x]
        };
        let (vw, vh) = (w - self.tw + 1, h - self.th + 1);
        let mut out = Vec::with_capacity(vw * vh);
        for y in 0..vh {
            for x in 0..vw {
                let s1 = box_sum(&self.sum, x, y);
                let s2 = box_sum(&self.sum_sq, x, y);
                let var = s2 - s1 * s1 / n;
                let denom = (var.max(0.0) * self.template_energy).sqrt();
                let ncc = if var <= 1e-9 * n || denom == 0.0 {
                    0.0
                } else {
                    (self.cross[y * w + x] * scale / denom).clamp(-1.0, 1.0)
                };
                out.push(ncc);
            }
        }
        Ok(out)
    }

    /// Best placement if its NCC exceeds `threshold`.
    pub fn find(&mut self, frame: &Frame, threshold: f64) -> Result<Option<TriggerHit>> {
        let map = self.ncc_map(frame)?;
        let vw = self.width - self.tw + 1;
        let best = map
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &v)| TriggerHit {
                x: (i % vw) as u32,
                y: (i / vw) as u32,
                ncc: v,
            });
        Ok(best.filter(|hit| hit.ncc > threshold))
    }
}

/// Scans `frame` for `template`; `None` when no placement beats the threshold.
pub fn detect_trigger(frame: &Frame, template: &Template, ncc_threshold: f64) -> Option<TriggerHit> {
    TemplateMatcher::new(template, frame.width, frame.height)
        .and_then(|mut m| m.find(frame, ncc_threshold))
        .ok()
        .flatten()
}
