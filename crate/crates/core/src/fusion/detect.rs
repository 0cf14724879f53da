use std::cmp::Ordering;
use std::collections::VecDeque;

use super::localize::rescore;
use super::{heatmap_probabilities, FusionConfig, Instance, InstancePredictionMaps, Keypoint, MapsView};
use crate::geometry::Point;
use crate::targets::{Dkrg, NUM_KEYPOINTS};
use crate::tensor::TensorMap;

/// Greedy keypoint grouping.
///
/// Keypoints are consumed in the given order (highest score first). One that
/// lies within `proximity_radius` of the same-type keypoint of an instance
/// already detected is skipped. Otherwise it seeds a new instance: the
/// remaining keypoints are reached by walking the relation graph outward from
/// the seed, each hop following the middle-range offset stored at the pixel
/// nearest to the current keypoint. Types the graph cannot reach from the seed are taken
/// from the seed's long-range offsets. Hop targets are clamped into the
/// image, and every derived keypoint is scored like a localized one.
/// Detection stops after `max_instances` instances.
pub fn detect_instances(keypoints: &[Keypoint], maps: &InstancePredictionMaps, graph: &Dkrg, cfg: &FusionConfig) -> Vec<Instance> {
    let probs = heatmap_probabilities(&maps.heatmap_logits);
    detect(keypoints, maps.view(), &probs, graph, cfg)
}

pub(crate) fn detect(keypoints: &[Keypoint], v: MapsView<'_>, probs: &TensorMap<f32>, graph: &Dkrg, cfg: &FusionConfig) -> Vec<Instance> {
    let r2 = (cfg.proximity_radius as f64).powi(2);
    let mut out: Vec<Instance> = Vec::new();
    for kp in keypoints {
        if out.len() >= cfg.max_instances {
            break;
        }
        let taken = out
            .iter()
            .any(|inst| inst.keypoints[kp.kind].position.distance_sq(&kp.position) <= r2);
        if !taken {
            out.push(group(kp, v, probs, graph, cfg));
        }
    }
    out
}

fn group(seed: &Keypoint, v: MapsView<'_>, probs: &TensorMap<f32>, graph: &Dkrg, cfg: &FusionConfig) -> Instance {
    let (h, w) = (v.height(), v.width());
    let mut pos: [Option<Point>; NUM_KEYPOINTS] = [None; NUM_KEYPOINTS];
    pos[seed.kind] = Some(seed.position);
    let mut queue = VecDeque::from([seed.kind]);
    while let Some(s) = queue.pop_front() {
        let from = pos[s].expect("queued keypoints are placed");
        for (e, t) in graph.outgoing(s) {
            if pos[t].is_none() {
                pos[t] = Some(hop(v.middle, e, from, h, w));
                queue.push_back(t);
            }
        }
    }
    let keypoints: [Keypoint; NUM_KEYPOINTS] = std::array::from_fn(|k| {
        if k == seed.kind {
            return *seed;
        }
        let position = pos[k].unwrap_or_else(|| hop(v.long, k, seed.position, h, w));
        Keypoint {
            kind: k,
            position,
            score: rescore(probs, k, position, cfg),
        }
    });
    Instance::new(keypoints)
}

/// Follows offset pair `pair` of `map` from `from`. Offsets are relative to
/// pixel centers, so the hop starts at the nearest pixel.
fn hop(map: &TensorMap<f32>, pair: usize, from: Point, h: usize, w: usize) -> Point {
    let (y, x) = from.nearest_pixel(h, w);
    let off = MapsView::offset_at(map, pair, from);
    Point::new(y as f64 + off.y, x as f64 + off.x).clamp_to(h, w)
}

/// Greedy bounding-box non-maximum suppression.
///
/// Instances are visited by descending score (input order on ties); one is
/// dropped when its box overlaps an already kept box with IoU above
/// `nms_iou`. Survivors keep their input order.
pub fn nms_instances(instances: &[Instance], cfg: &FusionConfig) -> Vec<Instance> {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| {
        instances[b]
            .score
            .partial_cmp(&instances[a].score)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let suppressed = kept
            .iter()
            .any(|&j| instances[i].bbox.iou(&instances[j].bbox) > cfg.nms_iou);
        if !suppressed {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.into_iter().map(|i| instances[i].clone()).collect()
}
