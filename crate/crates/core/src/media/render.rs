//! Frame and audio generators carrying the ENF fingerprint.
//!
//! Illumination flickers at twice the grid frequency:
//! `pixel = scene * (1 + m sin(2 φ(t_r))) + noise`, with `t_r` the exposure
//! time of the pixel's row and `φ` the cumulative grid phase. The microphone
//! picks up `Σ_h a_h sin(h φ(t))` plus scripted noise and a white floor.
//!
//! Scene textures are built so that every row of the static background, the
//! moving objects and the fiducial marker has the same mean. A row profile
//! that is constant in time repeats at the frame rate and would put energy on
//! multiples of the frame rate, which for 30 fps includes the 120 Hz flicker
//! line itself.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::camera::CameraParams;
use super::frame::{AudioBlock, Frame};
use super::scene::{Event, SceneScript};
use crate::error::{Error, Result};
use crate::signal::{EnfSeries, PhaseTable};

/// Side of the square fiducial marker, px.
pub const FIDUCIAL_SIZE: u32 = 32;
const FIDUCIAL_CELL: u32 = 8;
/// Background texture period along a row, px.
const TEXTURE_PERIOD: u32 = 32;
const TEXTURE_DEPTH: f32 = 0.25;
const OBJECT_CONTRAST: f32 = 0.5;
const MARKER_CONTRAST: f32 = 0.9;

/// Default audio block length in samples.
pub const AUDIO_BLOCK: usize = 2048;

/// Checkerboard fiducial as 0/255 luminance, row-major.
pub fn fiducial_template() -> (u32, Vec<u8>) {
    let n = FIDUCIAL_SIZE;
    let px = (0..n * n)
        .map(|i| {
            let (x, y) = (i % n, i / n);
            if ((x / FIDUCIAL_CELL) + (y / FIDUCIAL_CELL)).is_multiple_of(2) {
                255
            } else {
                0
            }
        })
        .collect();
    (n, px)
}

fn check_coverage(script: &SceneScript, enf: &EnfSeries) -> Result<()> {
    if !enf.covers(0.0, script.duration) {
        return Err(Error::invalid(format!(
            "ENF series [{}, {}] does not cover scene [0, {}]",
            enf.start_time,
            enf.end_time(),
            script.duration
        )));
    }
    Ok(())
}

fn texture(width: u32, height: u32) -> Vec<f32> {
    let mut out = Vec::with_capacity(width as usize * height as usize);
    for r in 0..height {
        let shift = (r * 7) % TEXTURE_PERIOD;
        for c in 0..width {
            let phase = 2.0 * std::f32::consts::PI * ((c + shift) % TEXTURE_PERIOD) as f32
                / TEXTURE_PERIOD as f32;
            out.push(1.0 + TEXTURE_DEPTH * phase.sin());
        }
    }
    out
}

/// Top-left corner of scripted object `slot` at time `t`.
fn object_position(
    slot: usize,
    width: u32,
    height: u32,
    size: u32,
    velocity: f64,
    elapsed: f64,
) -> (u32, u32) {
    let range = width.saturating_sub(size) as f64;
    let x = if range > 0.0 {
        let p = (velocity.abs() * elapsed).rem_euclid(2.0 * range);
        if p > range {
            2.0 * range - p
        } else {
            p
        }
    } else {
        0.0
    };
    let rows = height.saturating_sub(size) + 1;
    let y = ((height.saturating_sub(size)) / 2 + slot as u32 * 61) % rows;
    (x as u32, y)
}

/// Streaming frame generator; single consumer.
pub struct FrameRenderer {
    script: SceneScript,
    phase: PhaseTable,
    cam: CameraParams,
    base: Vec<f32>,
    rel: Vec<f32>,
    rng: ChaCha8Rng,
    next: u64,
    total: u64,
}

/// Renders the scripted scene as a rolling-shutter frame stream.
pub fn render_frames(
    script: &SceneScript,
    enf: &EnfSeries,
    cam: &CameraParams,
    noise_seed: u64,
) -> Result<FrameRenderer> {
    script.validate()?;
    cam.validate()?;
    check_coverage(script, enf)?;
    let base = texture(cam.width, cam.height);
    Ok(FrameRenderer {
        script: script.clone(),
        phase: PhaseTable::new(enf.clone()),
        cam: cam.clone(),
        rel: base.clone(),
        base,
        rng: ChaCha8Rng::seed_from_u64(noise_seed),
        next: 0,
        total: cam.frame_count(script.duration),
    })
}

impl FrameRenderer {
    pub fn frame_count(&self) -> u64 {
        self.total
    }

    pub fn camera(&self) -> &CameraParams {
        &self.cam
    }

    /// Paints moving objects and the fiducial into the relative-luminance buffer.
    fn compose(&mut self, t: f64) {
        let (w, h) = (self.cam.width, self.cam.height);
        self.rel.copy_from_slice(&self.base);
        for (slot, ev) in self.script.events.iter().enumerate() {
            match *ev {
                Event::Motion {
                    start,
                    end,
                    object_size_px,
                    velocity_px_per_s,
                } if t >= start && t < end => {
                    let size = object_size_px.min(w).min(h);
                    let (x0, y0) =
                        object_position(slot, w, h, size, velocity_px_per_s, t - start);
                    let half = size / 2;
                    for y in y0..y0 + size {
                        let row = &mut self.rel[(y * w) as usize..((y + 1) * w) as usize];
                        for dx in 0..size {
                            // Dipole profile: bright left half, dark right half.
                            let delta = if dx < half {
                                OBJECT_CONTRAST
                            } else if dx >= size - half {
                                -OBJECT_CONTRAST
                            } else {
                                0.0
                            };
                            row[(x0 + dx) as usize] += delta;
                        }
                    }
                }
                Event::TriggerAppearance {
                    start,
                    end,
                    position_px: [px, py],
                } if t >= start && t < end => {
                    let n = FIDUCIAL_SIZE;
                    if px + n > w || py + n > h {
                        continue;
                    }
                    for y in 0..n {
                        for x in 0..n {
                            let white = ((x / FIDUCIAL_CELL) + (y / FIDUCIAL_CELL)).is_multiple_of(2);
                            let v = if white {
                                1.0 + MARKER_CONTRAST
                            } else {
                                1.0 - MARKER_CONTRAST
                            };
                            self.rel[((py + y) * w + px + x) as usize] = v;
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

impl Iterator for FrameRenderer {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        if self.next >= self.total {
            return None;
        }
        let index = self.next;
        self.next += 1;
        let ts_ns = self.cam.frame_timestamp_ns(index);
        let rr_ns = self.cam.row_readout_ns();
        let t0 = ts_ns as f64 * 1e-9;
        let rr = rr_ns as f64 * 1e-9;
        self.compose(t0);

        let (w, h) = (self.cam.width as usize, self.cam.height as usize);
        let m = self.cam.flicker_depth;
        let sigma = self.cam.luma_noise_sigma as f32;
        let mut pixels = vec![0u8; w * h];
        for r in 0..h {
            let tr = (t0 + r as f64 * rr).min(self.script.duration);
            let level = self.script.light_level(tr);
            let flicker = if m > 0.0 {
                // Coverage was checked up front; `tr` is clamped into the span.
                let phi = self.phase.phase(tr).unwrap_or(0.0);
                1.0 + m * (2.0 * phi).sin()
            } else {
                1.0
            };
            let gain = (level * flicker) as f32;
            let rel = &self.rel[r * w..(r + 1) * w];
            let out = &mut pixels[r * w..(r + 1) * w];
            if sigma > 0.0 {
                for (o, &q) in out.iter_mut().zip(rel) {
                    let n: f32 = StandardNormal.sample(&mut self.rng);
                    *o = (gain * q + sigma * n).round().clamp(0.0, 255.0) as u8;
                }
            } else {
                for (o, &q) in out.iter_mut().zip(rel) {
                    *o = (gain * q).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        Some(Frame {
            index,
            width: self.cam.width,
            height: self.cam.height,
            timestamp_ns: ts_ns,
            row_readout_ns: rr_ns,
            pixels,
        })
    }
}

/// RBJ band-pass biquad (0 dB peak).
#[derive(Debug, Clone)]
struct BandPass {
    b0: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl BandPass {
    fn new(center: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * center / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: alpha / a0,
            b2: -alpha / a0,
            a1: -2.0 * w0.cos() / a0,
            a2: (1.0 - alpha) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b2 * self.x2 - self.a1 * self.y1 - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    /// Output standard deviation for unit white input.
    fn white_gain(&self) -> f64 {
        let mut f = self.clone();
        let mut energy = f.process(1.0).powi(2);
        for _ in 0..16384 {
            energy += f.process(0.0).powi(2);
        }
        energy.sqrt()
    }
}

/// Streaming audio generator; single consumer.
pub struct AudioRenderer {
    phase: PhaseTable,
    harmonics: Vec<(f64, f64)>,
    bursts: Vec<(f64, f64, f64)>,
    floor_sigma: f64,
    sample_rate: u32,
    band: BandPass,
    band_scale: f64,
    rng: ChaCha8Rng,
    block: usize,
    next: u64,
    total: u64,
}

/// Renders the microphone signal as a stream of `block`-sample blocks.
pub fn render_audio(
    script: &SceneScript,
    enf: &EnfSeries,
    cam: &CameraParams,
    noise_seed: u64,
) -> Result<AudioRenderer> {
    render_audio_blocks(script, enf, cam, noise_seed, AUDIO_BLOCK)
}

pub fn render_audio_blocks(
    script: &SceneScript,
    enf: &EnfSeries,
    cam: &CameraParams,
    noise_seed: u64,
    block: usize,
) -> Result<AudioRenderer> {
    script.validate()?;
    cam.validate()?;
    check_coverage(script, enf)?;
    if block == 0 {
        return Err(Error::invalid("audio block size must be positive"));
    }
    let sr = cam.audio_sample_rate as f64;
    let band = BandPass::new((1000.0f64).min(0.2 * sr), 0.7, sr);
    let band_scale = 1.0 / (3.0 * band.white_gain());
    let bursts = script
        .events
        .iter()
        .filter_map(|e| match *e {
            Event::NoiseBurst {
                start,
                end,
                amplitude,
            } => Some((start, end, amplitude)),
            _ => None,
        })
        .collect();
    Ok(AudioRenderer {
        phase: PhaseTable::new(enf.clone()),
        harmonics: cam
            .hum_harmonics
            .iter()
            .map(|&(h, a)| (h as f64, a * cam.hum_amplitude))
            .collect(),
        bursts,
        floor_sigma: cam.audio_noise_sigma,
        sample_rate: cam.audio_sample_rate,
        band,
        band_scale,
        rng: ChaCha8Rng::seed_from_u64(noise_seed ^ 0xA0D1_0000_0000_0001),
        block,
        next: 0,
        total: (script.duration * sr).round() as u64,
    })
}

impl AudioRenderer {
    pub fn total_samples(&self) -> u64 {
        self.total
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

impl Iterator for AudioRenderer {
    type Item = AudioBlock;

    fn next(&mut self) -> Option<AudioBlock> {
        if self.next >= self.total {
            return None;
        }
        let start = self.next;
        let n = (self.total - start).min(self.block as u64) as usize;
        let sr = self.sample_rate as f64;
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let t = (start + i as u64) as f64 / sr;
            let phi = self.phase.phase(t).unwrap_or(0.0);
            let mut v: f64 = self
                .harmonics
                .iter()
                .map(|&(h, a)| a * (h * phi).sin())
                .sum();
            let white: f64 = StandardNormal.sample(&mut self.rng);
            let burst_in: f64 = StandardNormal.sample(&mut self.rng);
            let shaped = self.band.process(burst_in);
            let env: f64 = self
                .bursts
                .iter()
                .filter(|&&(s, e, _)| t >= s && t < e)
                .map(|&(_, _, a)| a)
                .sum();
            v += env * self.band_scale * shaped + self.floor_sigma * white;
            samples.push(v.clamp(-1.0, 1.0));
        }
        self.next += n as u64;
        Some(AudioBlock {
            sample_rate: self.sample_rate,
            start_offset: start,
            samples,
        })
    }
}
