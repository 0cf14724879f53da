use rayon::prelude::*;

use super::{sigmoid, FusionConfig, InstancePredictionMaps, MapsView};
use crate::error::{Error, Result};
use crate::targets::NUM_KEYPOINTS;
use crate::tensor::{Shape, TensorMap};

/// Element-wise sigmoid of the heatmap logits.
pub fn heatmap_probabilities(logits: &TensorMap<f32>) -> TensorMap<f32> {
    let mut out = TensorMap::zeros(logits.shape());
    out.data_mut()
        .par_chunks_mut(4096)
        .zip(logits.data().par_chunks(4096))
        .for_each(|(o, z)| {
            for (o, &z) in o.iter_mut().zip(z) {
                *o = sigmoid(z);
            }
        });
    out
}

/// Fused Hough score map `(P, H, W)`.
///
/// Every pixel `q` votes at `q + short(q)` with weight `sigmoid(logit(q))`
/// and at `q + long(q)` with weight 1. Votes are split bilinearly over the
/// four surrounding cells; votes landing outside the image are dropped. The
/// result is `short_weight · short_votes + long_weight · long_votes`.
pub fn hough_scores(maps: &InstancePredictionMaps, cfg: &FusionConfig) -> TensorMap<f32> {
    let probs = heatmap_probabilities(&maps.heatmap_logits);
    vote(maps.view(), &probs, cfg, None)
}

/// [`hough_scores`] with long-range votes restricted to pixels where
/// `long_vote_mask` is set (typically the pixels predicted as a thing class).
pub fn hough_scores_masked(maps: &InstancePredictionMaps, cfg: &FusionConfig, long_vote_mask: &[bool]) -> Result<TensorMap<f32>> {
    if long_vote_mask.len() != maps.height() * maps.width() {
        return Err(Error::DimensionMismatch(format!(
            "vote mask has {} entries for a {}x{} map",
            long_vote_mask.len(),
            maps.height(),
            maps.width()
        )));
    }
    let probs = heatmap_probabilities(&maps.heatmap_logits);
    Ok(vote(maps.view(), &probs, cfg, Some(long_vote_mask)))
}

pub(crate) fn vote(v: MapsView<'_>, probs: &TensorMap<f32>, cfg: &FusionConfig, long_mask: Option<&[bool]>) -> TensorMap<f32> {
    let (h, w) = (v.height(), v.width());
    let n = h * w;
    let mut out = TensorMap::zeros(Shape::new(NUM_KEYPOINTS, h, w));
    if n == 0 {
        return out;
    }
    let (ws, wl) = (cfg.short_weight, cfg.long_weight);
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(k, acc)| {
        let p = probs.channel(k);
        let (sy, sx) = (v.short.channel(2 * k), v.short.channel(2 * k + 1));
        let (ly, lx) = (v.long.channel(2 * k), v.long.channel(2 * k + 1));
        let mut splat = Splat::new(acc, h, w);
        for y in 0..h {
            let fy = y as i32 as f32;
            for x in 0..w {
                let i = y * w + x;
                let fx = x as i32 as f32;
                if ws != 0.0 {
                    splat.add(fy + sy[i], fx + sx[i], ws * p[i]);
                }
                if wl != 0.0 && long_mask.map_or(true, |m| m[i]) {
                    splat.add(fy + ly[i], fx + lx[i], wl);
                }
            }
        }
    });
    out
}

/// Bilinear vote accumulator over one `h×w` plane.
///
/// Coordinates go through `i32`, which converts in a single instruction;
/// image sides are far below the range where that loses precision.
struct Splat<'a> {
    acc: &'a mut [f32],
    w: usize,
    ymax: f32,
    xmax: f32,
}

impl<'a> Splat<'a> {
    fn new(acc: &'a mut [f32], h: usize, w: usize) -> Self {
        Self {
            acc,
            w,
            ymax: (h - 1) as i32 as f32,
            xmax: (w - 1) as i32 as f32,
        }
    }

    #[inline(always)]
    fn add(&mut self, py: f32, px: f32, weight: f32) {
        // Also rejects NaN.
        if !(py >= 0.0 && py <= self.ymax && px >= 0.0 && px <= self.xmax) {
            return;
        }
        // Truncation is floor here: both coordinates are non-negative.
        let (yi, xi) = (py as i32, px as i32);
        let (fy, fx) = (py - yi as f32, px - xi as f32);
        let (y0, x0) = (yi as usize, xi as usize);
        let w = self.w;
        let i = y0 * w + x0;
        let (top, bottom) = (weight * (1.0 - fy), weight * fy);
        self.acc[i] += top * (1.0 - fx);
        if fx > 0.0 {
            self.acc[i + 1] += top * fx;
        }
        if fy > 0.0 {
            self.acc[i + w] += bottom * (1.0 - fx);
            if fx > 0.0 {
                self.acc[i + w + 1] += bottom * fx;
            }
        }
    }
}
