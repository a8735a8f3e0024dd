use super::gray::GrayImage;

pub const OTSU_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TissueMask {
    pub width: usize,
    pub height: usize,
    /// `true` marks tissue.
    pub mask: Vec<bool>,
    /// Intensity threshold; pixels at or below it are tissue before the opening.
    pub threshold: f64,
    /// The histogram had a single value, so no threshold exists and the mask is empty.
    pub degenerate: bool,
}

impl TissueMask {
    pub fn fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    /// Tissue fraction of the `size`-square window at `(x0, y0)`.
    pub fn window_fraction(&self, x0: usize, y0: usize, w: usize, h: usize) -> f64 {
        let mut n = 0usize;
        for y in y0..y0 + h {
            n += self.mask[y * self.width + x0..y * self.width + x0 + w].iter().filter(|&&m| m).count();
        }
        n as f64 / (w * h) as f64
    }
}

/// Last bin of the darker class under Otsu's criterion; the first maximizer wins.
pub fn otsu_bin(hist: &[u64]) -> usize {
    let total: u64 = hist.iter().sum();
    let weighted: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_var) = (0, f64::NEG_INFINITY);
    for (t, &c) in hist.iter().enumerate().take(hist.len() - 1) {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total as f64 - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (m0, m1) = (sum0 / w0, (weighted - sum0) / w1);
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best_var {
            best_var = between;
            best = t;
        }
    }
    best
}

fn bin_of(v: f64, lo: f64, span: f64) -> usize {
    (((v - lo) / span * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1)
}

/// 3×3 erosion then dilation; the window is cut at the image edge.
fn open3(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let pass = |src: &[bool], erode: bool| {
        let mut out = vec![false; src.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = erode;
                for yy in y.saturating_sub(1)..(y + 2).min(h) {
                    for xx in x.saturating_sub(1)..(x + 2).min(w) {
                        let v = src[yy * w + xx];
                        acc = if erode { acc && v } else { acc || v };
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    };
    pass(&pass(mask, true), false)
}

/// Otsu threshold over a 256-bin histogram spanning the image's intensity range; the
/// darker class is tissue (bright background), cleaned by a 3×3 opening.
pub fn tissue_mask(img: &GrayImage) -> TissueMask {
    tissue_mask_within(img, &vec![true; img.data().len()])
}

/// [`tissue_mask`] restricted to pixels where `valid` holds; the rest are never tissue
/// and do not enter the histogram.
pub fn tissue_mask_within(img: &GrayImage, valid: &[bool]) -> TissueMask {
    let (w, h) = (img.width(), img.height());
    let values = || img.data().iter().zip(valid).filter(|(_, &ok)| ok).map(|(&v, _)| v);
    let lo = values().fold(f64::INFINITY, f64::min);
    let hi = values().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 1e-12) {
        return TissueMask { width: w, height: h, mask: vec![false; w * h], threshold: lo, degenerate: true };
    }
    let mut hist = vec![0u64; OTSU_BINS];
    for v in values() {
        hist[bin_of(v, lo, span)] += 1;
    }
    let t = otsu_bin(&hist);
    let raw: Vec<bool> = img
        .data()
        .iter()
        .zip(valid)
        .map(|(&v, &ok)| ok && bin_of(v, lo, span) <= t)
        .collect();
    TissueMask {
        width: w,
        height: h,
        mask: open3(&raw, w, h),
        threshold: lo + (t + 1) as f64 / OTSU_BINS as f64 * span,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn otsu_splits_two_spikes() {
        let mut hist = vec![0u64; 256];
        hist[40] = 100;
        hist[200] = 300;
        let t = otsu_bin(&hist);
        assert!((40..200).contains(&t));
    }

    #[test]
    fn opening_removes_speckle_keeps_blocks() {
        let (w, h) = (8, 6);
        let mut m = vec![false; w * h];
        m[2 * w + 6] = true;
        for y in 0..4 {
            for x in 0..3 {
                m[y * w + x] = true;
            }
        }
        let o = open3(&m, w, h);
        assert!(!o[2 * w + 6]);
        for y in 0..4 {
            for x in 0..3 {
                assert!(o[y * w + x]);
            }
        }
        assert_eq!(o.iter().filter(|&&v| v).count(), 12);
    }

    #[test]
    fn all_white_is_degenerate() {
        let m = tissue_mask(&GrayImage::filled(5, 5, 1.0).unwrap());
        assert!(m.degenerate);
        assert!(m.mask.iter().all(|&v| !v));
    }
}
