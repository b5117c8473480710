use crate::error::{Error, Result};

/// Grayscale rolling-shutter frame. Row `r` is exposed at
/// `timestamp + r * row_readout`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub width: u32,
    pub height: u32,
    pub timestamp_ns: u64,
    pub row_readout_ns: u32,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(
        index: u64,
        width: u32,
        height: u32,
        timestamp_ns: u64,
        row_readout_ns: u32,
        pixels: Vec<u8>,
    ) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "{}x{} frame needs {} pixels, got {}",
                width,
                height,
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self {
            index,
            width,
            height,
            timestamp_ns,
            row_readout_ns,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            index: 0,
            width,
            height,
            timestamp_ns: 0,
            row_readout_ns: 0,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp_ns as f64 * 1e-9
    }

    pub fn row_readout(&self) -> f64 {
        self.row_readout_ns as f64 * 1e-9
    }

    /// Exposure offset of row `r` relative to the frame timestamp.
    pub fn row_time(&self, r: u32) -> f64 {
        r as f64 * self.row_readout()
    }

    pub fn row_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.height).map(|r| self.row_time(r))
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn row(&self, r: u32) -> &[u8] {
        let w = self.width as usize;
        &self.pixels[r as usize * w..(r as usize + 1) * w]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| p as u64).sum::<u64>() as f64 / self.pixels.len() as f64
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Contiguous mono samples in `[-1, 1]` starting at `start_offset` in the
/// stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBlock {
    pub sample_rate: u32,
    pub start_offset: u64,
    pub samples: Vec<f64>,
}

impl AudioBlock {
    pub fn start_time(&self) -> f64 {
        self.start_offset as f64 / self.sample_rate as f64
    }

    pub fn end_offset(&self) -> u64 {
        self.start_offset + self.samples.len() as u64
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}
