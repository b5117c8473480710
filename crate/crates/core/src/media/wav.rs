//! Mono 16-bit PCM WAV I/O. Samples are quantized once, on write; reading a
//! file and writing it back reproduces it bit for bit.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::frame::AudioBlock;
use crate::error::{Error, Result};

const FULL_SCALE: f64 = 32768.0;

pub fn quantize(x: f64) -> i16 {
    (x * FULL_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn dequantize(s: i16) -> f64 {
    s as f64 / FULL_SCALE
}

fn spec(sample_rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

pub struct WavWriter {
    inner: hound::WavWriter<BufWriter<File>>,
    path: PathBuf,
    written: u64,
}

impl WavWriter {
    pub fn create(path: &Path, sample_rate: u32) -> Result<Self> {
        let inner = hound::WavWriter::create(path, spec(sample_rate))
            .map_err(|e| wav_error(path, e))?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            written: 0,
        })
    }

    pub fn write_samples(&mut self, samples: &[f64]) -> Result<()> {
        for &x in samples {
            self.inner
                .write_sample(quantize(x))
                .map_err(|e| wav_error(&self.path, e))?;
        }
        self.written += samples.len() as u64;
        Ok(())
    }

    pub fn finish(self) -> Result<u64> {
        self.inner.finalize().map_err(|e| wav_error(&self.path, e))?;
        Ok(self.written)
    }
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    }
}

/// Whole-file read; returns the sample rate and dequantized samples.
pub fn read_wav(path: &Path) -> Result<(u32, Vec<f64>)> {
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let s = reader.spec();
    if s.channels != 1 || s.bits_per_sample != 16 || s.sample_format != hound::SampleFormat::Int {
        return Err(Error::format(
            path,
            format!(
                "expected mono 16-bit PCM, got {} ch {} bit {:?}",
                s.channels, s.bits_per_sample, s.sample_format
            ),
        ));
    }
    let samples = reader
        .samples::<i16>()
        .map(|r| r.map(dequantize))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    Ok((s.sample_rate, samples))
}

/// Splits a sample buffer into contiguous blocks.
pub fn into_blocks(sample_rate: u32, samples: Vec<f64>, block: usize) -> Vec<AudioBlock> {
    samples
        .chunks(block.max(1))
        .scan(0u64, |offset, chunk| {
            let b = AudioBlock {
                sample_rate,
                start_offset: *offset,
                samples: chunk.to_vec(),
            };
            *offset += chunk.len() as u64;
            Some(b)
        })
        .collect()
}

/// Borrowing form of [`into_blocks`].
pub fn into_blocks_iter(
    sample_rate: u32,
    samples: &[f64],
    block: usize,
) -> impl Iterator<Item = AudioBlock> + Send + '_ {
    let block = block.max(1);
    samples.chunks(block).enumerate().map(move |(i, chunk)| AudioBlock {
        sample_rate,
        start_offset: (i * block) as u64,
        samples: chunk.to_vec(),
    })
}
