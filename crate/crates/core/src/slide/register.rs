use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gray::GrayImage;
use super::transform::{resample_gray, RigidTransform};
use crate::error::{Error, Result};

/// Registrations whose best normalized cross-correlation falls below this fail.
pub const NCC_FLOOR: f64 = 0.2;

/// Search ranges for [`register_rigid`]. Angles in radians, shifts in full-resolution pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBounds {
    pub max_rotation: f64,
    pub rotation_step: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    pub scale_step: f64,
    pub max_shift: f64,
    /// The coarse grid search runs once the larger image side is at most this.
    pub coarse_size: usize,
    /// Smallest overlap, as a fraction of the moving image, a candidate may score on.
    pub min_overlap: f64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            max_rotation: 10f64.to_radians(),
            rotation_step: 1f64.to_radians(),
            min_scale: 0.95,
            max_scale: 1.05,
            scale_step: 0.05,
            max_shift: 32.0,
            coarse_size: 128,
            min_overlap: 0.25,
        }
    }
}

impl SearchBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_rotation >= 0.0
            && self.rotation_step > 0.0
            && self.min_scale > 0.0
            && self.max_scale >= self.min_scale
            && self.scale_step > 0.0
            && self.max_shift >= 0.0
            && self.coarse_size >= 8
            && self.min_overlap > 0.0
            && self.min_overlap <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("invalid registration search bounds"))
        }
    }

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        let mid = 0.5 * (lo + hi);
        let start = mid - 0.5 * n as f64 * step;
        (0..=n).map(|i| start + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationOutcome {
    /// Carries `reference` content into the `moving` frame.
    pub transform: RigidTransform,
    pub score: f64,
}

#[derive(Default)]
struct Moments {
    n: f64,
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
}

impl Moments {
    fn push(&mut self, a: f64, b: f64) {
        self.n += 1.0;
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.bb += b * b;
        self.ab += a * b;
    }

    fn ncc(&self, min_count: f64) -> f64 {
        if self.n < min_count.max(2.0) {
            return -1.0;
        }
        let va = self.aa - self.a * self.a / self.n;
        let vb = self.bb - self.b * self.b / self.n;
        if va <= 1e-12 || vb <= 1e-12 {
            return -1.0;
        }
        (self.ab - self.a * self.b / self.n) / (va * vb).sqrt()
    }
}

/// Normalized cross-correlation of `a` and `b` over pixels where `mask` holds.
pub fn masked_ncc(a: &GrayImage, b: &GrayImage, mask: &[bool]) -> f64 {
    let mut m = Moments::default();
    for ((&x, &y), &keep) in a.data().iter().zip(b.data()).zip(mask) {
        if keep {
            m.push(x, y);
        }
    }
    m.ncc(2.0)
}

struct Level {
    moving: GrayImage,
    reference: GrayImage,
    /// Full-resolution pixels per level pixel.
    factor: f64,
}

fn pyramid(moving: &GrayImage, reference: &GrayImage, coarse_size: usize) -> Vec<Level> {
    let mut levels = vec![Level { moving: moving.clone(), reference: reference.clone(), factor: 1.0 }];
    loop {
        let last = levels.last().expect("nonempty");
        let side = last.moving.width().max(last.moving.height()).max(last.reference.width()).max(last.reference.height());
        if side <= coarse_size || last.moving.width().min(last.moving.height()) < 16 {
            break;
        }
        let next = Level {
            moving: last.moving.downsample2(),
            reference: last.reference.downsample2(),
            factor: last.factor * 2.0,
        };
        levels.push(next);
    }
    levels
}

#[derive(Debug, Clone, Copy)]
struct Params {
    rotation: f64,
    scale: f64,
    dx: f64,
    dy: f64,
}

impl Params {
    fn transform(&self) -> RigidTransform {
        RigidTransform { rotation: self.rotation, dx: self.dx, dy: self.dy, scale: self.scale }
    }
}

fn score(level: &Level, p: &Params, min_count: f64) -> Result<f64> {
    let size = (level.moving.width(), level.moving.height());
    let r = resample_gray(&level.reference, &p.transform(), size)?;
    let mut m = Moments::default();
    for ((&a, &b), &c) in r.image.data().iter().zip(level.moving.data()).zip(&r.coverage) {
        if c {
            m.push(a, b);
        }
    }
    Ok(m.ncc(min_count))
}

/// Best integer shift of the zero-translation candidate `(rotation, scale)`; ties keep
/// the first shift in row-major scan order.
fn best_shift(level: &Level, rotation: f64, scale: f64, max_shift: i64, min_count: f64) -> Result<(f64, i64, i64)> {
    let t = RigidTransform { rotation, dx: 0.0, dy: 0.0, scale };
    let (w, h) = (level.moving.width(), level.moving.height());
    let r = resample_gray(&level.reference, &t, (w, h))?;
    let (rd, md) = (r.image.data(), level.moving.data());
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for sy in -max_shift..=max_shift {
        for sx in -max_shift..=max_shift {
            let mut m = Moments::default();
            // Shifting the resampled reference by s: value at q comes from q - s.
            let (x_lo, x_hi) = ((sx.max(0)) as usize, (w as i64 + sx.min(0)).max(0) as usize);
            let (y_lo, y_hi) = ((sy.max(0)) as usize, (h as i64 + sy.min(0)).max(0) as usize);
            for y in y_lo..y_hi {
                let src_row = (y as i64 - sy) as usize * w;
                let row = y * w;
                for x in x_lo..x_hi {
                    let s = src_row + (x as i64 - sx) as usize;
                    if r.coverage[s] {
                        m.push(rd[s], md[row + x]);
                    }
                }
            }
            let v = m.ncc(min_count);
            if v > best.0 {
                best = (v, sx, sy);
            }
        }
    }
    Ok(best)
}

fn hill_climb(level: &Level, start: Params, bounds: &SearchBounds, steps: [f64; 4], min_count: f64) -> Result<(Params, f64)> {
    let mut p = start;
    let mut best = score(level, &p, min_count)?;
    let mut steps = steps;
    let shift_limit = bounds.max_shift / level.factor;
    let min_shift_step = 0.02;
    for _ in 0..400 {
        if steps[2] < min_shift_step {
            break;
        }
        let mut improved: Option<(Params, f64)> = None;
        for (axis, &step) in steps.iter().enumerate() {
            for sign in [-1.0, 1.0] {
                let mut q = p;
                let delta = sign * step;
                match axis {
                    0 => q.rotation = (q.rotation + delta).clamp(-bounds.max_rotation, bounds.max_rotation),
                    1 => q.scale = (q.scale + delta).clamp(bounds.min_scale, bounds.max_scale),
                    2 => q.dx = (q.dx + delta).clamp(-shift_limit, shift_limit),
                    _ => q.dy = (q.dy + delta).clamp(-shift_limit, shift_limit),
                }
                let s = score(level, &q, min_count)?;
                if s > improved.map_or(best, |(_, v)| v) {
                    improved = Some((q, s));
                }
            }
        }
        match improved {
            Some((q, s)) => {
                p = q;
                best = s;
            }
            None => steps = steps.map(|s| s * 0.5),
        }
    }
    Ok((p, best))
}

/// Similarity transform carrying `reference` onto `moving`, i.e. maximizing the
/// correlation of `resample(reference, T, moving size)` with `moving`.
///
/// A coarse pyramid level is searched exhaustively over the rotation/scale grid and all
/// integer shifts; the winner is refined by coordinate hill-climbing at every finer level.
pub fn register_rigid(moving: &GrayImage, reference: &GrayImage, bounds: &SearchBounds) -> Result<RegistrationOutcome> {
    bounds.validate()?;
    let levels = pyramid(moving, reference, bounds.coarse_size);
    let coarse = levels.last().expect("nonempty");
    let min_count = |l: &Level| bounds.min_overlap * (l.moving.width() * l.moving.height()) as f64;

    let rotations = SearchBounds::grid(-bounds.max_rotation, bounds.max_rotation, bounds.rotation_step);
    let scales = SearchBounds::grid(bounds.min_scale, bounds.max_scale, bounds.scale_step);
    let combos: Vec<(f64, f64)> = rotations.iter().flat_map(|&r| scales.iter().map(move |&s| (r, s))).collect();
    let max_shift = (bounds.max_shift / coarse.factor).ceil() as i64;
    let coarse_min = min_count(coarse);
    let results = combos
        .par_iter()
        .map(|&(r, s)| best_shift(coarse, r, s, max_shift, coarse_min).map(|b| (r, s, b)))
        .collect::<Result<Vec<_>>>()?;
    let mut winner = results[0];
    for &cand in &results[1..] {
        if cand.2 .0 > winner.2 .0 {
            winner = cand;
        }
    }
    let (rotation, scale, (_, sx, sy)) = winner;
    let mut p = Params { rotation, scale, dx: sx as f64, dy: sy as f64 };

    let mut final_score = f64::NEG_INFINITY;
    for (i, level) in levels.iter().enumerate().rev() {
        if i + 1 < levels.len() {
            p.dx *= 2.0;
            p.dy *= 2.0;
        }
        let refine = 0.5f64.powi((levels.len() - 1 - i) as i32);
        let steps = [bounds.rotation_step * 0.5 * refine, bounds.scale_step * 0.25 * refine, 1.0, 1.0];
        let (q, s) = hill_climb(level, p, bounds, steps, min_count(level))?;
        p = q;
        final_score = s;
    }
    if !(final_score >= NCC_FLOOR) {
        return Err(Error::Registration { score: final_score, floor: NCC_FLOOR });
    }
    Ok(RegistrationOutcome { transform: RigidTransform::new(p.rotation, p.dx, p.dy, p.scale)?, score: final_score })
}
