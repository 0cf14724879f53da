use std::cmp::Ordering;

use rayon::prelude::*;

use super::{heatmap_probabilities, FusionConfig, InstancePredictionMaps, Keypoint, Rescore};
use crate::geometry::Point;
use crate::tensor::TensorMap;

/// Local maxima of a fused score map, one list entry per peak.
///
/// A pixel is a peak of its channel when its score exceeds
/// `localmax_threshold` and is at least every score within Chebyshev distance
/// `localmax_radius`. On plateaus only the first pixel in raster order
/// counts. Peaks are rescored per [`FusionConfig::rescore`] and returned by
/// descending score, ties by `(kind, y, x)`.
pub fn localize_keypoints(scores: &TensorMap<f32>, maps: &InstancePredictionMaps, cfg: &FusionConfig) -> Vec<Keypoint> {
    let probs = heatmap_probabilities(&maps.heatmap_logits);
    localize(scores, &probs, cfg)
}

pub(crate) fn localize(scores: &TensorMap<f32>, probs: &TensorMap<f32>, cfg: &FusionConfig) -> Vec<Keypoint> {
    let (h, w) = (scores.height(), scores.width());
    let r = cfg.localmax_radius;
    let thr = cfg.localmax_threshold;
    let mut out: Vec<Keypoint> = (0..scores.channels())
        .into_par_iter()
        .flat_map_iter(|k| {
            let s = scores.channel(k);
            let mut peaks = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let v = s[i];
                    if v > thr && is_peak(s, h, w, y, x, r) {
                        peaks.push((y, x));
                    }
                }
            }
            peaks.into_iter().map(move |(y, x)| {
                let position = Point::new(y as f64, x as f64);
                Keypoint {
                    kind: k,
                    position,
                    score: rescore(probs, k, position, cfg),
                }
            })
        })
        .collect();
    sort_keypoints(&mut out);
    out
}

pub(crate) fn sort_keypoints(kps: &mut [Keypoint]) {
    kps.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.kind.cmp(&b.kind))
            .then(a.position.y.total_cmp(&b.position.y))
            .then(a.position.x.total_cmp(&b.position.x))
    });
}

#[inline]
fn is_peak(s: &[f32], h: usize, w: usize, y: usize, x: usize, r: usize) -> bool {
    let i = y * w + x;
    let v = s[i];
    for ny in y.saturating_sub(r)..=(y + r).min(h - 1) {
        let row = ny * w;
        for nx in x.saturating_sub(r)..=(x + r).min(w - 1) {
            let j = row + nx;
            let u = s[j];
            if u > v || (u == v && j < i) {
                return false;
            }
        }
    }
    true
}

/// Keypoint confidence at `pos` for keypoint type `kind`.
pub(crate) fn rescore(probs: &TensorMap<f32>, kind: usize, pos: Point, cfg: &FusionConfig) -> f64 {
    let (h, w) = (probs.height(), probs.width());
    let p = probs.channel(kind);
    match cfg.rescore {
        Rescore::PeakProbability => {
            let (y, x) = pos.nearest_pixel(h, w);
            p[y * w + x] as f64
        }
        Rescore::DiskMeanProbability => {
            let r = cfg.rescore_radius as f64;
            let mut sum = 0.0f64;
            let mut count = 0usize;
            let ys = (pos.y - r).ceil().max(0.0) as usize;
            let ye = ((pos.y + r).floor().max(0.0) as usize).min(h - 1);
            for y in ys..=ye {
                let dy = y as f64 - pos.y;
                let half = r * r - dy * dy;
                if half < 0.0 {
                    continue;
                }
                let half = half.sqrt();
                let xs = (pos.x - half).ceil().max(0.0) as usize;
                let xe = (pos.x + half).floor();
                if xe < 0.0 {
                    continue;
                }
                let xe = (xe as usize).min(w - 1);
                if xs > xe {
                    continue;
                }
                let row = &p[y * w + xs..=y * w + xe];
                sum += row.iter().map(|&v| v as f64).sum::<f64>();
                count += row.len();
            }
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        }
    }
}
