//! `FSEQ` raw frame-sequence container.
//!
//! Layout (little-endian): magic `FSEQ`, u32 width, u32 height,
//! u32 fps_numerator, u32 fps_denominator, u32 row_readout_ns,
//! u64 frame_count, then per frame a u64 timestamp_ns followed by
//! width * height bytes of row-major luminance.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::camera::CameraParams;
use super::frame::Frame;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FSEQ";
pub const HEADER_LEN: u64 = 32;
const FRAME_COUNT_OFFSET: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FseqHeader {
    pub width: u32,
    pub height: u32,
    pub fps_numerator: u32,
    pub fps_denominator: u32,
    pub row_readout_ns: u32,
    pub frame_count: u64,
}

impl FseqHeader {
    pub fn for_camera(cam: &CameraParams) -> Self {
        Self {
            width: cam.width,
            height: cam.height,
            fps_numerator: cam.fps_numerator,
            fps_denominator: cam.fps_denominator,
            row_readout_ns: cam.row_readout_ns(),
            frame_count: 0,
        }
    }

    pub fn frame_bytes(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn fps(&self) -> f64 {
        self.fps_numerator as f64 / self.fps_denominator as f64
    }

    fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[0..4].copy_from_slice(MAGIC);
        b[4..8].copy_from_slice(&self.width.to_le_bytes());
        b[8..12].copy_from_slice(&self.height.to_le_bytes());
        b[12..16].copy_from_slice(&self.fps_numerator.to_le_bytes());
        b[16..20].copy_from_slice(&self.fps_denominator.to_le_bytes());
        b[20..24].copy_from_slice(&self.row_readout_ns.to_le_bytes());
        b[24..32].copy_from_slice(&self.frame_count.to_le_bytes());
        b
    }

    fn decode(b: &[u8]) -> Result<Self> {
        let parse = |field: &'static str, offset: u64, reason: String| Error::Parse {
            field,
            offset,
            reason,
        };
        if b.len() < 4 || &b[0..4] != MAGIC {
            return Err(parse("magic", 0, format!("expected `FSEQ`, got {:?}", &b[..b.len().min(4)])));
        }
        let fields: [(&'static str, u64); 5] = [
            ("width", 4),
            ("height", 8),
            ("fps_numerator", 12),
            ("fps_denominator", 16),
            ("row_readout_ns", 20),
        ];
        let mut vals = [0u32; 5];
        for (slot, (name, off)) in vals.iter_mut().zip(fields) {
            let o = off as usize;
            let raw = b
                .get(o..o + 4)
                .ok_or_else(|| parse(name, off, "truncated header".into()))?;
            *slot = u32::from_le_bytes(raw.try_into().expect("4 bytes"));
            if *slot == 0 && name != "row_readout_ns" {
                return Err(parse(name, off, "must be non-zero".into()));
            }
        }
        let raw = b
            .get(24..32)
            .ok_or_else(|| parse("frame_count", FRAME_COUNT_OFFSET, "truncated header".into()))?;
        let header = Self {
            width: vals[0],
            height: vals[1],
            fps_numerator: vals[2],
            fps_denominator: vals[3],
            row_readout_ns: vals[4],
            frame_count: u64::from_le_bytes(raw.try_into().expect("8 bytes")),
        };
        if header.row_readout_ns as u64 * header.height as u64 * header.fps_numerator as u64
            > 1_000_000_000 * header.fps_denominator as u64
        {
            return Err(parse(
                "row_readout_ns",
                20,
                "rows do not fit within the frame interval".into(),
            ));
        }
        Ok(header)
    }
}

/// Streaming writer; the frame count is patched into the header on `finish`.
pub struct FseqWriter {
    out: BufWriter<File>,
    header: FseqHeader,
    path: PathBuf,
}

impl FseqWriter {
    pub fn create(path: &Path, header: FseqHeader) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        let mut h = header;
        h.frame_count = 0;
        out.write_all(&h.encode()).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out,
            header: h,
            path: path.to_path_buf(),
        })
    }

    pub fn header(&self) -> &FseqHeader {
        &self.header
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<()> {
        if frame.width != self.header.width || frame.height != self.header.height {
            return Err(Error::invalid(format!(
                "frame {}x{} does not match stream {}x{}",
                frame.width, frame.height, self.header.width, self.header.height
            )));
        }
        let io = |e| Error::io(&self.path, e);
        self.out
            .write_all(&frame.timestamp_ns.to_le_bytes())
            .map_err(io)?;
        self.out.write_all(&frame.pixels).map_err(io)?;
        self.header.frame_count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<FseqHeader> {
        let io = |e| Error::io(&self.path, e);
        self.out.flush().map_err(io)?;
        let mut file = self.out.into_inner().map_err(|e| Error::io(&self.path, e.into_error()))?;
        file.seek(SeekFrom::Start(FRAME_COUNT_OFFSET))
            .map_err(|e| Error::io(&self.path, e))?;
        file.write_all(&self.header.frame_count.to_le_bytes())
            .map_err(|e| Error::io(&self.path, e))?;
        file.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.header)
    }
}

/// Streaming reader yielding frames in file order.
pub struct FseqReader<R> {
    input: R,
    header: FseqHeader,
    next: u64,
    offset: u64,
}

impl FseqReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::new(BufReader::with_capacity(1 << 20, file))
    }
}

impl<R: Read> FseqReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut buf = Vec::with_capacity(HEADER_LEN as usize);
        (&mut input)
            .take(HEADER_LEN)
            .read_to_end(&mut buf)
            .map_err(|e| Error::Parse {
                field: "magic",
                offset: 0,
                reason: e.to_string(),
            })?;
        let header = FseqHeader::decode(&buf)?;
        Ok(Self {
            input,
            header,
            next: 0,
            offset: HEADER_LEN,
        })
    }

    pub fn header(&self) -> &FseqHeader {
        &self.header
    }

    fn read_frame(&mut self) -> Result<Frame> {
        let mut ts = [0u8; 8];
        self.input.read_exact(&mut ts).map_err(|e| Error::Parse {
            field: "frame_timestamp",
            offset: self.offset,
            reason: format!("frame {}: {e}", self.next),
        })?;
        self.offset += 8;
        let mut pixels = vec![0u8; self.header.frame_bytes() as usize];
        self.input.read_exact(&mut pixels).map_err(|e| Error::Parse {
            field: "frame_pixels",
            offset: self.offset,
            reason: format!("frame {}: {e}", self.next),
        })?;
        self.offset += self.header.frame_bytes();
        let frame = Frame {
            index: self.next,
            width: self.header.width,
            height: self.header.height,
            timestamp_ns: u64::from_le_bytes(ts),
            row_readout_ns: self.header.row_readout_ns,
            pixels,
        };
        self.next += 1;
        Ok(frame)
    }
}

impl<R: Read> Iterator for FseqReader<R> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Result<Frame>> {
        if self.next >= self.header.frame_count {
            return None;
        }
        let r = self.read_frame();
        if r.is_err() {
            // Stop after the first malformed frame.
            self.next = self.header.frame_count;
        }
        Some(r)
    }
}

/// Checks header and total length without decoding frames.
pub fn validate_fseq(path: &Path) -> Result<FseqHeader> {
    let reader = FseqReader::open(path)?;
    let header = *reader.header();
    let len = std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    let expected = HEADER_LEN + header.frame_count * (8 + header.frame_bytes());
    if len != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes for {} frames, found {len}", header.frame_count),
        ));
    }
    Ok(header)
}
