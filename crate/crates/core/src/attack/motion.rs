use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::Frame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionParams {
    /// A pixel counts as changed when `|cur - prev|` exceeds this.
    pub pixel_delta_threshold: u8,
    /// Motion when the changed fraction of the frame exceeds this.
    pub changed_fraction_threshold: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            pixel_delta_threshold: 10,
            changed_fraction_threshold: 0.005,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        if self.pixel_delta_threshold == 0 || self.pixel_delta_threshold == 255 {
            return Err(Error::invalid("pixel delta threshold must be in (0, 255)"));
        }
        if !(self.changed_fraction_threshold > 0.0 && self.changed_fraction_threshold < 1.0) {
            return Err(Error::invalid("changed fraction threshold must be in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionResult {
    pub motion: bool,
    pub changed_count: usize,
}

/// Frame differencing on two blurred frames; both comparisons are strict.
pub fn detect_motion(prev: &Frame, cur: &Frame, params: &MotionParams) -> Result<MotionResult> {
    if !prev.same_shape(cur) {
        return Err(Error::invalid(format!(
            "frame size mismatch: {}x{} vs {}x{}",
            prev.width, prev.height, cur.width, cur.height
        )));
    }
    let t = params.pixel_delta_threshold;
    let changed_count = prev
        .pixels
        .iter()
        .zip(&cur.pixels)
        .filter(|(&a, &b)| a.abs_diff(b) > t)
        .count();
    let area = cur.width as f64 * cur.height as f64;
    Ok(MotionResult {
        motion: changed_count as f64 > params.changed_fraction_threshold * area,
        changed_count,
    })
}
