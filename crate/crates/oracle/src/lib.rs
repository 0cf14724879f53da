//! Deliberately naive reference implementations.
//!
//! Everything here works on plain slices and pixel sets so that the library's
//! optimized code paths can be checked against something that shares none of
//! their structure. Nothing in this crate is meant to be fast.

use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Index-formula space-to-depth over a `[C, H, W]` buffer.
pub fn space_to_depth_naive<T: Copy + Default>(data: &[T], shape: [usize; 3], b: usize) -> Vec<T> {
    let [c, h, w] = shape;
    let (oh, ow, oc) = (h / b, w / b, c * b * b);
    let mut out = vec![T::default(); oc * oh * ow];
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                let (by, bx) = (y % b, x % b);
                let o = ((ci * b * b + by * b + bx) * oh + y / b) * ow + x / b;
                out[o] = data[(ci * h + y) * w + x];
            }
        }
    }
    out
}

/// Index-formula depth-to-space over a `[C, H, W]` buffer.
pub fn depth_to_space_naive<T: Copy + Default>(data: &[T], shape: [usize; 3], b: usize) -> Vec<T> {
    let [c, h, w] = shape;
    let (oc, oh, ow) = (c / (b * b), h * b, w * b);
    let mut out = vec![T::default(); oc * oh * ow];
    for o in 0..oc {
        for y in 0..oh {
            for x in 0..ow {
                let ic = o * b * b + (y % b) * b + x % b;
                out[(o * oh + y) * ow + x] = data[(ic * h + y / b) * w + x / b];
            }
        }
    }
    out
}

/// A flat panoptic labeling: per-pixel semantic class and instance id.
pub struct Labeling<'a> {
    pub semantic: &'a [i32],
    pub instance: &'a [i32],
}

/// Per-class PQ tallies.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassTally {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub iou_sum: f64,
}

impl ClassTally {
    pub fn pq(&self) -> f64 {
        let d = self.tp as f64 + 0.5 * self.fp as f64 + 0.5 * self.fn_ as f64;
        if d == 0.0 {
            0.0
        } else {
            self.iou_sum / d
        }
    }

    pub fn sq(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            self.iou_sum / self.tp as f64
        }
    }

    pub fn rq(&self) -> f64 {
        let d = self.tp as f64 + 0.5 * self.fp as f64 + 0.5 * self.fn_ as f64;
        if d == 0.0 {
            0.0
        } else {
            self.tp as f64 / d
        }
    }
}

type Key = (i32, i32);

/// Pixel sets keyed by `(class, instance)`; stuff pixels collapse to instance 0.
fn segments(l: &Labeling, is_thing: &dyn Fn(i32) -> bool, keep: &dyn Fn(usize) -> bool) -> BTreeMap<Key, HashSet<usize>> {
    let mut out: BTreeMap<Key, HashSet<usize>> = BTreeMap::new();
    for i in 0..l.semantic.len() {
        if !keep(i) {
            continue;
        }
        let c = l.semantic[i];
        let key = if is_thing(c) { (c, l.instance[i]) } else { (c, 0) };
        out.entry(key).or_default().insert(i);
    }
    out
}

fn iou(a: &HashSet<usize>, b: &HashSet<usize>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// PQ tallies by exhaustive pairwise comparison of pixel sets.
///
/// Pixels whose ground-truth class equals `ignore` are removed from both
/// labelings first. The IoU sum is accumulated in ascending `(class, instance)`
/// order of the ground-truth segments.
pub fn pq_naive(
    gt: &Labeling,
    pred: &Labeling,
    is_thing: &dyn Fn(i32) -> bool,
    ignore: Option<i32>,
) -> BTreeMap<i32, ClassTally> {
    let keep = |i: usize| Some(gt.semantic[i]) != ignore;
    let gs = segments(gt, is_thing, &keep);
    let ps = segments(pred, is_thing, &keep);
    let classes: BTreeSet<i32> = gs.keys().chain(ps.keys()).map(|k| k.0).collect();
    let mut out = BTreeMap::new();
    for c in classes {
        let g: Vec<_> = gs.iter().filter(|(k, _)| k.0 == c).collect();
        let p: Vec<_> = ps.iter().filter(|(k, _)| k.0 == c).collect();
        let mut tally = ClassTally::default();
        let mut pred_matched = vec![false; p.len()];
        for (_, gset) in &g {
            let mut matched = false;
            for (j, (_, pset)) in p.iter().enumerate() {
                let v = iou(gset, pset);
                if v > 0.5 {
                    assert!(!matched && !pred_matched[j], "IoU > 0.5 matching must be unique");
                    matched = true;
                    pred_matched[j] = true;
                    tally.tp += 1;
                    tally.iou_sum += v;
                }
            }
            if !matched {
                tally.fn_ += 1;
            }
        }
        tally.fp = pred_matched.iter().filter(|m| !**m).count() as u64;
        out.insert(c, tally);
    }
    out
}

/// Per-class covering `(Cov_i, N_i)` by exhaustive comparison; classes
/// without ground-truth pixels are omitted.
pub fn covering_naive(
    gt: &Labeling,
    pred: &Labeling,
    is_thing: &dyn Fn(i32) -> bool,
    ignore: Option<i32>,
) -> BTreeMap<i32, (f64, u64)> {
    let keep = |i: usize| Some(gt.semantic[i]) != ignore;
    let gs = segments(gt, is_thing, &keep);
    let ps = segments(pred, is_thing, &keep);
    let classes: BTreeSet<i32> = gs.keys().map(|k| k.0).collect();
    let mut out = BTreeMap::new();
    for c in classes {
        let mut n = 0u64;
        let mut weighted = 0.0f64;
        for (_, gset) in gs.iter().filter(|(k, _)| k.0 == c) {
            let best = ps
                .iter()
                .filter(|(k, _)| k.0 == c)
                .map(|(_, pset)| iou(gset, pset))
                .fold(0.0f64, f64::max);
            n += gset.len() as u64;
            weighted += gset.len() as f64 * best;
        }
        out.insert(c, (weighted / n as f64, n));
    }
    out
}

/// Axis-aligned box `[y0, x0, y1, x1]`.
pub type Box4 = [f64; 4];

pub fn box_iou(a: &Box4, b: &Box4) -> f64 {
    if a == b {
        return 1.0;
    }
    let area = |r: &Box4| (r[2] - r[0]).max(0.0) * (r[3] - r[1]).max(0.0);
    let (aa, ab) = (area(a), area(b));
    if aa == 0.0 || ab == 0.0 {
        return 0.0;
    }
    let ih = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iw = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ih * iw;
    inter / (aa + ab - inter)
}

/// Greedy NMS by its recursive definition: a box survives iff no surviving
/// box ranked above it overlaps it by more than `thresh`. Rank is score
/// descending, then input index. Returns surviving indices in input order.
pub fn nms_naive(boxes: &[Box4], scores: &[f64], thresh: f64) -> Vec<usize> {
    let n = boxes.len();
    let ranked_above = |i: usize, j: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
    fn survives(i: usize, boxes: &[Box4], thresh: f64, above: &dyn Fn(usize, usize) -> bool, memo: &mut Vec<Option<bool>>) -> bool {
        if let Some(v) = memo[i] {
            return v;
        }
        let mut ok = true;
        for j in 0..boxes.len() {
            if j != i && above(i, j) && survives(j, boxes, thresh, above, memo) && box_iou(&boxes[i], &boxes[j]) > thresh {
                ok = false;
                break;
            }
        }
        memo[i] = Some(ok);
        ok
    }
    let mut memo = vec![None; n];
    (0..n).filter(|&i| survives(i, boxes, thresh, &ranked_above, &mut memo)).collect()
}
