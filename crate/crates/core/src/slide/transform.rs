use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::gray::GrayImage;
use crate::error::{Error, Result};
use crate::polarimetry::MuellerImage;

/// Similarity transform between two image frames in centered pixel coordinates
/// (`u = p - ((w-1)/2, (h-1)/2)`): `u_dst = scale · Rot(rotation) · u_src + (dx, dy)`.
///
/// Working about each image's own center keeps the transform independent of the two
/// frames' sizes. With `y` pointing down, positive rotation is clockwise on screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    /// Radians in `(-π, π]`.
    pub rotation: f64,
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

impl RigidTransform {
    pub const fn identity() -> Self {
        Self { rotation: 0.0, dx: 0.0, dy: 0.0, scale: 1.0 }
    }

    pub fn new(rotation: f64, dx: f64, dy: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !rotation.is_finite() || !dx.is_finite() || !dy.is_finite() {
            return Err(Error::invalid("transform needs finite parameters and scale > 0"));
        }
        Ok(Self { rotation: wrap_angle(rotation), dx, dy, scale })
    }

    pub const fn translation(dx: f64, dy: f64) -> Self {
        Self { rotation: 0.0, dx, dy, scale: 1.0 }
    }

    pub fn apply(&self, u: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        (
            self.scale * (c * u.0 - s * u.1) + self.dx,
            self.scale * (s * u.0 + c * u.1) + self.dy,
        )
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.rotation.sin_cos();
        let k = 1.0 / self.scale;
        // u_src = k · Rot(-θ) · (u_dst - t)
        Self {
            rotation: wrap_angle(-self.rotation),
            dx: -k * (c * self.dx + s * self.dy),
            dy: -k * (-s * self.dx + c * self.dy),
            scale: k,
        }
    }

    fn apply_inverse(&self, u: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let (x, y) = (u.0 - self.dx, u.1 - self.dy);
        ((c * x + s * y) / self.scale, (-s * x + c * y) / self.scale)
    }
}

fn center(w: usize, h: usize) -> (f64, f64) {
    ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

/// Source coordinate and bilinear weights for each output pixel; `None` outside the
/// source footprint.
#[derive(Debug, Clone, Copy)]
struct Tap {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
    fx: f64,
    fy: f64,
}

const EDGE_SLACK: f64 = 1e-9;

fn taps(src: (usize, usize), t: &RigidTransform, out: (usize, usize)) -> Vec<Option<Tap>> {
    let (cs, co) = (center(src.0, src.1), center(out.0, out.1));
    let (max_x, max_y) = ((src.0 - 1) as f64, (src.1 - 1) as f64);
    let mut taps = Vec::with_capacity(out.0 * out.1);
    for qy in 0..out.1 {
        for qx in 0..out.0 {
            let u = t.apply_inverse((qx as f64 - co.0, qy as f64 - co.1));
            let (x, y) = (u.0 + cs.0, u.1 + cs.1);
            if x < -EDGE_SLACK || y < -EDGE_SLACK || x > max_x + EDGE_SLACK || y > max_y + EDGE_SLACK {
                taps.push(None);
                continue;
            }
            let (x, y) = (x.clamp(0.0, max_x), y.clamp(0.0, max_y));
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            taps.push(Some(Tap {
                x0,
                y0,
                x1: (x0 + 1).min(src.0 - 1),
                y1: (y0 + 1).min(src.1 - 1),
                fx: x - x0 as f64,
                fy: y - y0 as f64,
            }));
        }
    }
    taps
}

fn bilinear(tap: &Tap, width: usize, sample: impl Fn(usize) -> f64) -> f64 {
    let v00 = sample(tap.y0 * width + tap.x0);
    if tap.fx == 0.0 && tap.fy == 0.0 {
        return v00;
    }
    let v10 = sample(tap.y0 * width + tap.x1);
    let v01 = sample(tap.y1 * width + tap.x0);
    let v11 = sample(tap.y1 * width + tap.x1);
    let top = v00 + tap.fx * (v10 - v00);
    let bottom = v01 + tap.fx * (v11 - v01);
    top + tap.fy * (bottom - top)
}

/// A resampled image and, per output pixel, whether the source footprint reached it.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled<T> {
    pub image: T,
    pub coverage: Vec<bool>,
}

/// `out(T(u)) = img(u)`: moves the content of `img` by `transform` into an
/// `out_size` frame, bilinearly. Uncovered pixels are 0.
pub fn resample_gray(img: &GrayImage, transform: &RigidTransform, out_size: (usize, usize)) -> Result<Resampled<GrayImage>> {
    let taps = taps((img.width(), img.height()), transform, out_size);
    let data = img.data();
    let values = taps
        .iter()
        .map(|t| t.map_or(0.0, |t| bilinear(&t, img.width(), |i| data[i]).clamp(0.0, 1.0)))
        .collect();
    Ok(Resampled {
        image: GrayImage::new(out_size.0, out_size.1, values)?,
        coverage: taps.iter().map(Option::is_some).collect(),
    })
}

/// Like [`resample_gray`] with the same weights applied to each of the 16 channels.
pub fn resample_mueller(
    img: &MuellerImage,
    transform: &RigidTransform,
    out_size: (usize, usize),
) -> Result<Resampled<MuellerImage>> {
    const C: usize = MuellerImage::CHANNELS;
    let taps = taps((img.width(), img.height()), transform, out_size);
    let data = img.data();
    let mut values = Vec::with_capacity(taps.len() * C);
    for tap in &taps {
        match tap {
            Some(t) => values.extend((0..C).map(|c| bilinear(t, img.width(), |i| data[i * C + c]))),
            None => values.extend([0.0; C]),
        }
    }
    Ok(Resampled {
        image: MuellerImage::new(out_size.0, out_size.1, values)?,
        coverage: taps.iter().map(Option::is_some).collect(),
    })
}
