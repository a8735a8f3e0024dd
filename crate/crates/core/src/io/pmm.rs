//! PMM raster container.
//!
//! Layout: the magic bytes `PMM1`, then little-endian `u32` width, height and channel
//! count, then `width * height * channels` little-endian `f32` values. Pixels are stored
//! row-major with the channel index varying fastest.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const PMM_MAGIC: &[u8; 4] = b"PMM1";

/// A multi-channel `f32` raster as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PmmRaster {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

impl PmmRaster {
    pub fn new(width: u32, height: u32, channels: u32, data: Vec<f32>) -> Result<Self> {
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "PMM data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[f32] {
        let c = self.channels as usize;
        let start = (y as usize * self.width as usize + x as usize) * c;
        &self.data[start..start + c]
    }
}

fn eof_to_format(err: io::Error) -> Error {
    if err.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("unexpected end of PMM stream".into())
    } else {
        Error::Io(err)
    }
}

fn read_u32<R: Read>(reader: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(eof_to_format)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_pmm<R: Read>(mut reader: R) -> Result<PmmRaster> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(eof_to_format)?;
    if &magic != PMM_MAGIC {
        return Err(Error::Format(format!("bad PMM magic {magic:?}")));
    }
    let width = read_u32(&mut reader)?;
    let height = read_u32(&mut reader)?;
    let channels = read_u32(&mut reader)?;
    if channels == 0 {
        return Err(Error::Format("PMM channel count is zero".into()));
    }
    let count = (width as u64)
        .checked_mul(height as u64)
        .and_then(|n| n.checked_mul(channels as u64))
        .filter(|&n| n <= (usize::MAX / 4) as u64)
        .ok_or_else(|| Error::Format("PMM dimensions overflow".into()))? as usize;

    // Read in bounded chunks so a lying header cannot force a huge allocation up front.
    let mut data = Vec::with_capacity(count.min(1 << 20));
    let mut chunk = vec![0u8; 4 * 4096];
    let mut remaining = count;
    while remaining > 0 {
        let n = remaining.min(4096);
        let bytes = &mut chunk[..4 * n];
        reader.read_exact(bytes).map_err(eof_to_format)?;
        data.extend(
            bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        );
        remaining -= n;
    }
    Ok(PmmRaster { width, height, channels, data })
}

pub fn write_pmm<W: Write>(mut writer: W, raster: &PmmRaster) -> Result<()> {
    writer.write_all(PMM_MAGIC)?;
    writer.write_all(&raster.width.to_le_bytes())?;
    writer.write_all(&raster.height.to_le_bytes())?;
    writer.write_all(&raster.channels.to_le_bytes())?;
    for v in &raster.data {
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_pmm_file(path: impl AsRef<Path>) -> Result<PmmRaster> {
    read_pmm(BufReader::new(File::open(path)?))
}

pub fn write_pmm_file(path: impl AsRef<Path>, raster: &PmmRaster) -> Result<()> {
    write_pmm(BufWriter::new(File::create(path)?), raster)
}
