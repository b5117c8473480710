use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sensor, lighting and microphone model shared by both renderers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraParams {
    pub width: u32,
    pub height: u32,
    pub fps_numerator: u32,
    pub fps_denominator: u32,
    /// Row readout time in nanoseconds; `None` packs the rows into the whole
    /// frame interval (no idle gap), rounded down to whole nanoseconds.
    pub row_readout_ns: Option<u32>,
    /// Flicker modulation depth of the illumination.
    pub flicker_depth: f64,
    pub hum_amplitude: f64,
    /// `(harmonic index, relative amplitude)` pairs of the mains hum.
    pub hum_harmonics: Vec<(u32, f64)>,
    /// Per-pixel Gaussian noise, luminance units.
    pub luma_noise_sigma: f64,
    /// Additive white noise floor of the microphone.
    pub audio_noise_sigma: f64,
    pub audio_sample_rate: u32,
}

impl Default for CameraParams {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            fps_numerator: 30,
            fps_denominator: 1,
            row_readout_ns: None,
            flicker_depth: 0.05,
            hum_amplitude: 0.1,
            hum_harmonics: vec![(1, 1.0), (2, 0.3)],
            luma_noise_sigma: 2.0,
            audio_noise_sigma: 0.01,
            audio_sample_rate: 8000,
        }
    }
}

impl CameraParams {
    pub fn fps(&self) -> f64 {
        self.fps_numerator as f64 / self.fps_denominator as f64
    }

    pub fn frame_interval(&self) -> f64 {
        self.fps_denominator as f64 / self.fps_numerator as f64
    }

    /// Effective row readout in ns.
    pub fn row_readout_ns(&self) -> u32 {
        self.row_readout_ns.unwrap_or_else(|| {
            (1e9 * self.fps_denominator as f64 / (self.fps_numerator as f64 * self.height as f64))
                .floor() as u32
        })
    }

    pub fn row_readout(&self) -> f64 {
        self.row_readout_ns() as f64 * 1e-9
    }

    /// Exposure start of frame `index` in ns, exact for rational frame rates.
    pub fn frame_timestamp_ns(&self, index: u64) -> u64 {
        frame_timestamp_ns(index, self.fps_numerator, self.fps_denominator)
    }

    pub fn frame_count(&self, duration: f64) -> u64 {
        (duration * self.fps() + 1e-9).floor() as u64
    }

    /// First audio sample belonging to frame `index`.
    pub fn audio_sample_of_frame(&self, index: u64) -> u64 {
        audio_sample_of_frame(
            index,
            self.audio_sample_rate,
            self.fps_numerator,
            self.fps_denominator,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("frame dimensions must be non-zero"));
        }
        if self.fps_numerator == 0 || self.fps_denominator == 0 {
            return Err(Error::invalid("fps must be positive"));
        }
        let rows = self.height as f64 * self.row_readout();
        if self.row_readout_ns() == 0 || rows > self.frame_interval() + 1e-12 {
            return Err(Error::invalid(format!(
                "{} rows of {} s readout do not fit in a {} s frame interval",
                self.height,
                self.row_readout(),
                self.frame_interval()
            )));
        }
        if !(0.0..1.0).contains(&self.flicker_depth) {
            return Err(Error::invalid("flicker depth must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.hum_amplitude) {
            return Err(Error::invalid("hum amplitude must be in [0, 1]"));
        }
        if self.hum_harmonics.iter().any(|&(h, _)| h == 0) {
            return Err(Error::invalid("hum harmonic indices start at 1"));
        }
        if !(self.luma_noise_sigma >= 0.0) || !(self.audio_noise_sigma >= 0.0) {
            return Err(Error::invalid("noise levels must be non-negative"));
        }
        if self.audio_sample_rate == 0 {
            return Err(Error::invalid("audio sample rate must be positive"));
        }
        Ok(())
    }
}

pub fn frame_timestamp_ns(index: u64, fps_num: u32, fps_den: u32) -> u64 {
    ((index as u128 * 1_000_000_000u128 * fps_den as u128 + fps_num as u128 / 2)
        / fps_num as u128) as u64
}

pub fn audio_sample_of_frame(index: u64, sample_rate: u32, fps_num: u32, fps_den: u32) -> u64 {
    ((index as u128 * sample_rate as u128 * fps_den as u128) / fps_num as u128) as u64
}
