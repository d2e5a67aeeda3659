//! Binary configuration snapshots.
//!
//! Layout: the magic bytes `CGAS1`, a version byte, the particle count as a
//! little-endian `u32`, then any number of frames, each `n` pairs of
//! little-endian `f64` (real part, imaginary part).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub const MAGIC: &[u8; 5] = b"CGAS1";
pub const VERSION: u8 = 1;
const HEADER: usize = MAGIC.len() + 1 + 4;

pub struct SnapshotWriter<W: Write> {
    out: W,
    n: usize,
    frames: usize,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(mut out: W, n: usize) -> Result<Self> {
        let count = u32::try_from(n).map_err(|_| invalid("particle count does not fit in u32"))?;
        if n == 0 {
            return Err(invalid("snapshots need at least one particle"));
        }
        out.write_all(MAGIC)?;
        out.write_all(&[VERSION])?;
        out.write_all(&count.to_le_bytes())?;
        Ok(Self { out, n, frames: 0 })
    }

    pub fn write_frame(&mut self, points: &[Complex64]) -> Result<()> {
        if points.len() != self.n {
            return Err(invalid(format!("frame has {} points, expected {}", points.len(), self.n)));
        }
        let mut buf = Vec::with_capacity(16 * self.n);
        for z in points {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        self.out.write_all(&buf)?;
        self.frames += 1;
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Decoded snapshot stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub n: usize,
    pub frames: Vec<Vec<Complex64>>,
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Snapshots, String> {
    if bytes.len() < HEADER || &bytes[..5] != MAGIC {
        return Err("missing CGAS1 magic".into());
    }
    if bytes[5] != VERSION {
        return Err(format!("unsupported snapshot version {}", bytes[5]));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    if n == 0 {
        return Err("zero particle count".into());
    }
    let body = &bytes[HEADER..];
    let frame = 16 * n;
    if body.len() % frame != 0 {
        return Err(format!("{} trailing bytes after the last complete frame", body.len() % frame));
    }
    let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
    let frames = body
        .chunks_exact(frame)
        .map(|f| f.chunks_exact(16).map(|p| Complex64::new(f64_at(&p[..8]), f64_at(&p[8..]))).collect())
        .collect();
    Ok(Snapshots { n, frames })
}

pub fn read_from<R: Read>(mut r: R, source: &Path) -> Result<Snapshots> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes).map_err(|message| Error::MalformedArtifact { path: PathBuf::from(source), message })
}

pub fn read_file(path: &Path) -> Result<Snapshots> {
    read_from(std::fs::File::open(path)?, path)
}
