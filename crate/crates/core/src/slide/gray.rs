use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_pgm_file, write_pgm_file, PgmImage};

/// Single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be >= 1"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "image data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!("intensity {} at index {i} is outside [0, 1]", data[i])));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from `f(x, y)`; values are clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite intensity at ({x}, {y})")));
                }
                data.push(v.clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, data)
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

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::invalid("crop window exceeds image bounds"));
        }
        let data = (y0..y0 + h)
            .flat_map(|y| self.data[y * self.width + x0..y * self.width + x0 + w].iter().copied())
            .collect();
        Ok(Self { width: w, height: h, data })
    }

    pub fn from_pgm(img: &PgmImage) -> Result<Self> {
        Self::new(img.width as usize, img.height as usize, img.to_unit())
    }

    /// 8-bit samples, rounded.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_pgm(&read_pgm_file(path)?)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        write_pgm_file(path, self.width as u32, self.height as u32, &self.to_u8())
    }

    /// 2×2 box average; odd trailing rows and columns are dropped.
    pub(crate) fn downsample2(&self) -> Self {
        let (w, h) = ((self.width / 2).max(1), (self.height / 2).max(1));
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let mut sum = 0.0;
                let mut n = 0.0;
                for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let (sx, sy) = (2 * x + dx, 2 * y + dy);
                    if sx < self.width && sy < self.height {
                        sum += self.get(sx, sy);
                        n += 1.0;
                    }
                }
                data.push(sum / n);
            }
        }
        Self { width: w, height: h, data }
    }
}
