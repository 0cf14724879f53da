use rayon::prelude::*;

use super::{FusionConfig, InstancePredictionMaps, MapsView};
use crate::targets::NUM_KEYPOINTS;
use crate::tensor::TensorMap;

/// Refines long-range offsets with the short-range offsets at their landing
/// positions, `refine_iterations` times:
///
/// `L'(q) = L(q) + S(q + L(q))`
///
/// `S` is the short-range map of the same keypoint type, sampled bilinearly
/// at the landing position after clamping it into the image. Short- and
/// middle-range maps are passed through unchanged.
pub fn refine_offsets(maps: &InstancePredictionMaps, cfg: &FusionConfig) -> InstancePredictionMaps {
    InstancePredictionMaps {
        long: refine_long(maps.view(), cfg.refine_iterations, None),
        ..maps.clone()
    }
}

/// Refined long-range offsets at the pixels selected by `mask` (all pixels
/// if `None`). Pixels outside the mask are left at zero.
pub(crate) fn refine_long(v: MapsView<'_>, iterations: usize, mask: Option<&[bool]>) -> TensorMap<f32> {
    let mut out = match mask {
        Some(_) => TensorMap::zeros(v.long.shape()),
        None => v.long.clone(),
    };
    if out.data().is_empty() || (iterations == 0 && mask.is_none()) {
        return out;
    }
    // Each pixel's refinement reads only its own offset and the short map,
    // so pixels outside `mask` can be skipped without affecting the rest.
    let (h, w) = (v.height(), v.width());
    let n = h * w;
    out.data_mut()
        .par_chunks_mut(2 * n)
        .take(NUM_KEYPOINTS)
        .enumerate()
        .for_each(|(k, out)| {
            let (oy, ox) = out.split_at_mut(n);
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    if mask.map_or(true, |m| m[i]) {
                        (oy[i], ox[i]) = refine_one(v, k, (y, x), iterations);
                    }
                }
            }
        });
    out
}

/// Refined long-range offset of keypoint type `k` at pixel `(y, x)`.
pub(crate) fn refine_one(v: MapsView<'_>, k: usize, (y, x): (usize, usize), iterations: usize) -> (f32, f32) {
    let (h, w) = (v.height(), v.width());
    let i = y * w + x;
    let (sy, sx) = (v.short.channel(2 * k), v.short.channel(2 * k + 1));
    let (ymax, xmax) = ((h - 1) as f64, (w - 1) as f64);
    let (y, x) = (y as f64, x as f64);
    let (mut dy, mut dx) = (v.long.channel(2 * k)[i], v.long.channel(2 * k + 1)[i]);
    for _ in 0..iterations {
        let py = (y + dy as f64).clamp(0.0, ymax);
        let px = (x + dx as f64).clamp(0.0, xmax);
        let (cy, cx) = bilinear_pair(sy, sx, w, h, py, px);
        (dy, dx) = ((dy as f64 + cy) as f32, (dx as f64 + cx) as f32);
    }
    (dy, dx)
}

/// Bilinear sample of two planes at an in-bounds position.
#[inline]
fn bilinear_pair(a: &[f32], b: &[f32], w: usize, h: usize, py: f64, px: f64) -> (f64, f64) {
    // Truncation is floor here: both coordinates are non-negative.
    let (y0, x0) = (py as usize, px as usize);
    let (fy, fx) = (py - y0 as f64, px - x0 as f64);
    let i00 = y0 * w + x0;
    if fy == 0.0 && fx == 0.0 {
        return (a[i00] as f64, b[i00] as f64);
    }
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let (i01, i10, i11) = (y0 * w + x1, y1 * w + x0, y1 * w + x1);
    let (w00, w01, w10, w11) = ((1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx);
    let s = |p: &[f32]| w00 * p[i00] as f64 + w01 * p[i01] as f64 + w10 * p[i10] as f64 + w11 * p[i11] as f64;
    (s(a), s(b))
}
