//! Binary greymap (P5). 8-bit samples are written; 8- and 16-bit samples are read
//! (16-bit samples are big-endian as the format requires).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: u32,
    pub height: u32,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl PgmImage {
    /// Samples scaled to `[0, 1]`.
    pub fn to_unit(&self) -> Vec<f64> {
        let max = f64::from(self.maxval);
        self.samples.iter().map(|&s| f64::from(s) / max).collect()
    }
}

fn header_token<R: Read>(reader: &mut R) -> Result<String> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            return Err(Error::Format("unexpected end of PGM header".into()));
        }
        match byte[0] {
            b'#' if token.is_empty() => {
                // comment runs to end of line
                loop {
                    if reader.read(&mut byte)? == 0 {
                        return Err(Error::Format("unexpected end of PGM header".into()));
                    }
                    if byte[0] == b'\n' || byte[0] == b'\r' {
                        break;
                    }
                }
            }
            c if c.is_ascii_whitespace() => {
                if !token.is_empty() {
                    return Ok(token);
                }
            }
            c => token.push(c as char),
        }
    }
}

fn header_number<R: Read>(reader: &mut R, what: &str) -> Result<u32> {
    let token = header_token(reader)?;
    token
        .parse()
        .map_err(|_| Error::Format(format!("bad PGM {what}: {token:?}")))
}

pub fn read_pgm<R: Read>(mut reader: R) -> Result<PgmImage> {
    let magic = header_token(&mut reader)?;
    if magic != "P5" {
        return Err(Error::Format(format!("expected P5 magic, found {magic:?}")));
    }
    let width = header_number(&mut reader, "width")?;
    let height = header_number(&mut reader, "height")?;
    let maxval = header_number(&mut reader, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM dimensions must be nonzero".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let n = width as usize * height as usize;
    let wide = maxval > 255;
    let mut raw = vec![0u8; if wide { 2 * n } else { n }];
    reader.read_exact(&mut raw).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("unexpected end of PGM stream".into())
        } else {
            Error::Io(e)
        }
    })?;
    let samples = if wide {
        raw.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()
    } else {
        raw.into_iter().map(u16::from).collect()
    };
    Ok(PgmImage { width, height, maxval: maxval as u16, samples })
}

pub fn write_pgm<W: Write>(mut writer: W, width: u32, height: u32, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width as usize * height as usize {
        return Err(Error::invalid("PGM pixel count does not match dimensions"));
    }
    write!(writer, "P5\n{width} {height}\n255\n")?;
    writer.write_all(pixels)?;
    writer.flush()?;
    Ok(())
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<PgmImage> {
    read_pgm(BufReader::new(File::open(path)?))
}

pub fn write_pgm_file(path: impl AsRef<Path>, width: u32, height: u32, pixels: &[u8]) -> Result<()> {
    write_pgm(BufWriter::new(File::create(path)?), width, height, pixels)
}
