use crate::error::{Error, Result};
use crate::io::PmmRaster;

use super::mueller::MuellerMatrix;

/// H×W raster of Mueller matrices, 16 channels per pixel, row-major pixels with the
/// channel index fastest (`channel = 4 * row + col` of the matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct MuellerImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl MuellerImage {
    pub const CHANNELS: usize = 16;

    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * Self::CHANNELS {
            return Err(Error::invalid(format!(
                "Mueller image data length {} does not match {width}x{height}x16",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite Mueller channel value at index {i}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, m: &MuellerMatrix) -> Self {
        let px = m.to_channels();
        let data = (0..width * height).flat_map(|_| px).collect();
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> MuellerMatrix) -> Self {
        let mut data = Vec::with_capacity(width * height * 16);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y).to_channels());
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel_channels(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * Self::CHANNELS;
        &self.data[start..start + Self::CHANNELS]
    }

    pub fn pixel(&self, x: usize, y: usize) -> MuellerMatrix {
        MuellerMatrix::from_channels(self.pixel_channels(x, y))
    }

    /// One channel as a plane, e.g. channel 0 is the unpolarized transmittance `m00`.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        assert!(c < Self::CHANNELS);
        self.data.iter().skip(c).step_by(Self::CHANNELS).copied().collect()
    }

    pub fn from_pmm(raster: &PmmRaster) -> Result<Self> {
        if raster.channels as usize != Self::CHANNELS {
            return Err(Error::Format(format!(
                "Mueller PMM must have 16 channels, found {}",
                raster.channels
            )));
        }
        let data: Vec<f64> = raster.data.iter().map(|&v| f64::from(v)).collect();
        Self::new(raster.width as usize, raster.height as usize, data)
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_pmm(&self) -> PmmRaster {
        PmmRaster {
            width: self.width as u32,
            height: self.height as u32,
            channels: Self::CHANNELS as u32,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }

    /// Crop `w × h` pixels starting at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::invalid("crop window exceeds the Mueller image"));
        }
        let mut data = Vec::with_capacity(w * h * 16);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * 16;
            data.extend_from_slice(&self.data[start..start + w * 16]);
        }
        Ok(Self { width: w, height: h, data })
    }
}
