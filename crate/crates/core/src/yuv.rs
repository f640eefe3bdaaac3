//! Raw I420 ingestion and the luma/macroblock geometry everything else
//! works in. Only the luma plane is analyzed; chroma is skipped on read.

use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use crate::error::{Error, Result};

pub const MB_SIZE: usize = 16;
pub const MB_PIXELS: usize = MB_SIZE * MB_SIZE;

/// Geometry and timing of an input sequence. Dimensions must be multiples
/// of the macroblock size; nothing here is ever guessed from file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSpec {
    pub width: usize,
    pub height: usize,
    pub frame_rate: f64,
    pub frame_count: usize,
}

impl VideoSpec {
    pub fn new(width: usize, height: usize, frame_rate: f64, frame_count: usize) -> Result<Self> {
        if width == 0 || height == 0 || width % MB_SIZE != 0 || height % MB_SIZE != 0 {
            return Err(Error::config(format!(
                "frame size {width}x{height} must be a positive multiple of {MB_SIZE}"
            )));
        }
        if !(frame_rate > 0.0) || !frame_rate.is_finite() {
            return Err(Error::config(format!("frame rate {frame_rate} must be positive")));
        }
        if frame_count == 0 {
            return Err(Error::config("frame count must be positive"));
        }
        Ok(VideoSpec {
            width,
            height,
            frame_rate,
            frame_count,
        })
    }

    /// Bytes of one I420 frame (luma plus both subsampled chroma planes).
    pub fn frame_bytes(&self) -> usize {
        self.width * self.height * 3 / 2
    }

    pub fn grid(&self) -> MbGrid {
        MbGrid::new(self.width, self.height)
    }
}

/// Macroblock tiling of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MbGrid {
    pub mbs_x: usize,
    pub mbs_y: usize,
    pub mb_count: usize,
}

impl MbGrid {
    pub fn new(width: usize, height: usize) -> Self {
        let mbs_x = width / MB_SIZE;
        let mbs_y = height / MB_SIZE;
        MbGrid {
            mbs_x,
            mbs_y,
            mb_count: mbs_x * mbs_y,
        }
    }

    /// Top-left pixel of macroblock `p` (raster order).
    pub fn mb_origin(&self, p: usize) -> (usize, usize) {
        ((p % self.mbs_x) * MB_SIZE, (p / self.mbs_x) * MB_SIZE)
    }
}

/// A single 8-bit plane with edge-clamped sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Sample with coordinates clamped to the plane bounds (border replication).
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[cy * self.width + cx]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

/// Luma plane of one coded frame. `index` is the position in the coded
/// timeline (after any input subsampling).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameY {
    pub index: usize,
    pub luma: Plane,
}

impl FrameY {
    pub fn new(index: usize, luma: Plane) -> Self {
        FrameY { index, luma }
    }

    pub fn grid(&self) -> MbGrid {
        MbGrid::new(self.luma.width, self.luma.height)
    }
}

/// Read luma planes from a raw I420 file, keeping every `frame_skip + 1`-th
/// frame of the first `spec.frame_count` frames. The file length is checked
/// up front so a truncated input fails before any work happens.
pub fn load_sequence(path: &Path, spec: &VideoSpec, frame_skip: usize) -> Result<Vec<FrameY>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let meta = file.metadata().map_err(|e| Error::io(path, e))?;
    let expected = (spec.frame_count * spec.frame_bytes()) as u64;
    if meta.len() < expected {
        return Err(Error::Ingest {
            path: path.to_path_buf(),
            expected,
            actual: meta.len(),
        });
    }

    let luma_bytes = spec.width * spec.height;
    let chroma_bytes = (spec.frame_bytes() - luma_bytes) as u64;
    let mut reader = BufReader::new(file);
    let mut frames = Vec::new();
    let step = frame_skip + 1;
    let mut source = 0;
    while source < spec.frame_count {
        reader
            .seek(SeekFrom::Start((source * spec.frame_bytes()) as u64))
            .map_err(|e| Error::io(path, e))?;
        let mut data = vec![0u8; luma_bytes];
        reader.read_exact(&mut data).map_err(|e| Error::io(path, e))?;
        let _ = chroma_bytes; // chroma is never decoded
        frames.push(FrameY::new(frames.len(), Plane::from_data(spec.width, spec.height, data)));
        source += step;
    }
    Ok(frames)
}

/// Copy the 256 luma samples of macroblock `p` in raster order.
pub fn mb_pixels(frame: &FrameY, p: usize) -> Result<[u8; MB_PIXELS]> {
    let grid = frame.grid();
    if p >= grid.mb_count {
        return Err(Error::index(format!(
            "macroblock {p} outside grid of {} macroblocks",
            grid.mb_count
        )));
    }
    let (ox, oy) = grid.mb_origin(p);
    let mut out = [0u8; MB_PIXELS];
    for j in 0..MB_SIZE {
        let row = frame.luma.row(oy + j);
        out[j * MB_SIZE..(j + 1) * MB_SIZE].copy_from_slice(&row[ox..ox + MB_SIZE]);
    }
    Ok(out)
}
