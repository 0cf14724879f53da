//! Forward-only losses for the semantic and instance heads.

use std::cmp::Ordering;

use super::InstanceTargetMaps;
use crate::error::{Error, Result};
use crate::tensor::{Shape, TensorMap};

const PROB_FLOOR: f64 = 1e-12;
const NORM_TOLERANCE: f64 = 1e-5;

/// Number of pixels kept out of `n` for a top-k fraction. A small epsilon
/// keeps products like `0.15 · 100` from rounding up past the exact count.
pub(crate) fn topk_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Weighted bootstrapped cross-entropy.
///
/// Per-pixel losses `−log p[label]` are ranked from largest to smallest (ties
/// by lowest pixel index) and only the first `K = ⌈fraction·N⌉` contribute,
/// each scaled by its weight; the sum is divided by `K`.
pub fn bootstrapped_ce_loss(
    probs: &TensorMap<f32>,
    labels: &TensorMap<i32>,
    weights: &TensorMap<f32>,
    topk_fraction: f64,
) -> Result<f64> {
    if !(topk_fraction > 0.0 && topk_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("topk_fraction must be in (0, 1], got {topk_fraction}")));
    }
    let (classes, h, w) = (probs.channels(), probs.height(), probs.width());
    labels.expect_shape(Shape::new(1, h, w), "labels")?;
    weights.expect_shape(Shape::new(1, h, w), "weights")?;
    let n = h * w;
    if n == 0 {
        return Ok(0.0);
    }

    let p = probs.data();
    let mut losses = Vec::with_capacity(n);
    for (i, &label) in labels.data().iter().enumerate() {
        let mut sum = 0.0f64;
        for c in 0..classes {
            let v = p[c * n + i];
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidDistribution {
                    pixel: i,
                    reason: format!("probability {v} for class {c}"),
                });
            }
            sum += v as f64;
        }
        if (sum - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidDistribution {
                pixel: i,
                reason: format!("probabilities sum to {sum}"),
            });
        }
        if label < 0 || label as usize >= classes {
            return Err(Error::InvalidInput(format!("label {label} at pixel {i} outside [0, {classes})")));
        }
        let prob = (p[label as usize * n + i] as f64).max(PROB_FLOOR);
        losses.push((-prob.ln(), i));
    }

    let k = topk_count(topk_fraction, n);
    let hardest_first = |a: &(f64, usize), b: &(f64, usize)| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
    if k < n {
        losses.select_nth_unstable_by(k - 1, hardest_first);
        losses.truncate(k);
    }
    losses.sort_unstable_by_key(|&(_, i)| i);
    let wd = weights.data();
    let total: f64 = losses.iter().map(|&(l, i)| wd[i] as f64 * l).sum();
    Ok(total / k as f64)
}

/// Mean sigmoid cross-entropy of heatmap logits against the binary targets.
pub fn heatmap_loss(logits: &TensorMap<f32>, target: &InstanceTargetMaps) -> Result<f64> {
    logits.expect_shape(target.heatmap.shape(), "heatmap logits")?;
    let n = logits.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = logits
        .data()
        .iter()
        .zip(target.heatmap.data())
        .map(|(&z, &t)| {
            let (z, t) = (z as f64, t as f64);
            z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
        })
        .sum();
    Ok(total / n as f64)
}

/// L1 distance averaged over masked positions.
///
/// `mask` may have as many channels as `pred` or any divisor of that count;
/// mask channel `m` then covers the consecutive group of prediction channels
/// it divides into (so a `P`-channel disk mask covers `2P` offset channels).
/// With nothing masked the loss is 0.
pub fn masked_l1_loss(pred: &TensorMap<f32>, target: &TensorMap<f32>, mask: &TensorMap<u8>) -> Result<f64> {
    target.expect_shape(pred.shape(), "target")?;
    mask.expect_spatial(pred.height(), pred.width(), "mask")?;
    let (pc, mc) = (pred.channels(), mask.channels());
    if mc == 0 || pc % mc != 0 {
        return Err(Error::DimensionMismatch(format!(
            "mask with {mc} channels cannot cover {pc} prediction channels"
        )));
    }
    let group = pc / mc;
    let mut total = 0.0f64;
    let mut count = 0usize;
    for ch in 0..pc {
        let m = mask.channel(ch / group);
        for ((&a, &b), &on) in pred.channel(ch).iter().zip(target.channel(ch)).zip(m) {
            if on != 0 {
                total += (a as f64 - b as f64).abs();
                count += 1;
            }
        }
    }
    Ok(total / count.max(1) as f64)
}
