use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Overlap, SegmentKind};
use crate::dataset::{DatasetSpec, PanopticMap};
use crate::error::Result;

/// Per-class panoptic quality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassQuality {
    pub class_id: i32,
    pub name: String,
    pub kind: SegmentKind,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Sum of matched IoUs.
    pub iou_sum: f64,
}

/// Class-averaged PQ, SQ and RQ over a group of classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PqSummary {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    /// Classes averaged; all three scores are 0 when this is 0.
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PqReport {
    /// Same as `all.pq`.
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    /// Classes present in either map, ascending id.
    pub per_class: Vec<ClassQuality>,
    pub all: PqSummary,
    pub thing: PqSummary,
    pub stuff: PqSummary,
}

/// Panoptic quality of `pred` against `gt`.
///
/// Segments of the same class match when their IoU is strictly above 0.5,
/// which makes matches one-to-one. Per class, with TP the matched pairs:
///
/// * SQ = mean IoU over TP (0 without matches),
/// * RQ = |TP| / (|TP| + ½|FP| + ½|FN|),
/// * PQ = ΣIoU / (|TP| + ½|FP| + ½|FN|) = SQ · RQ.
///
/// Aggregates are plain means over the classes present in either map.
pub fn panoptic_quality(gt: &PanopticMap, pred: &PanopticMap, spec: &DatasetSpec) -> Result<PqReport> {
    let ov = Overlap::new(gt, pred, spec)?;
    let mut tallies: BTreeMap<i32, (u64, u64, u64, f64)> = BTreeMap::new();
    let mut gt_matched = vec![false; ov.gt.len()];
    let mut pred_matched = vec![false; ov.pred.len()];
    // `joint` is sorted by gt segment, so IoUs are summed in ascending
    // (class, instance) order of the ground truth.
    for &((a, b), inter) in &ov.joint {
        let iou = ov.iou(a, b, inter);
        if iou > 0.5 {
            assert!(
                !gt_matched[a as usize] && !pred_matched[b as usize],
                "IoU > 0.5 matching must be one-to-one"
            );
            gt_matched[a as usize] = true;
            pred_matched[b as usize] = true;
            let t = tallies.entry(ov.gt[a as usize].class_id).or_default();
            t.0 += 1;
            t.3 += iou;
        }
    }
    for (s, &m) in ov.gt.iter().zip(&gt_matched) {
        let t = tallies.entry(s.class_id).or_default();
        t.2 += u64::from(!m);
    }
    for (s, &m) in ov.pred.iter().zip(&pred_matched) {
        let t = tallies.entry(s.class_id).or_default();
        t.1 += u64::from(!m);
    }

    let per_class: Vec<ClassQuality> = tallies
        .into_iter()
        .map(|(c, (tp, fp, fn_, iou_sum))| {
            let d = tp as f64 + 0.5 * fp as f64 + 0.5 * fn_ as f64;
            ClassQuality {
                class_id: c,
                name: spec.name(c).to_string(),
                kind: if spec.is_thing(c) { SegmentKind::Thing } else { SegmentKind::Stuff },
                pq: if d == 0.0 { 0.0 } else { iou_sum / d },
                sq: if tp == 0 { 0.0 } else { iou_sum / tp as f64 },
                rq: if d == 0.0 { 0.0 } else { tp as f64 / d },
                tp,
                fp,
                fn_,
                iou_sum,
            }
        })
        .collect();
    let summarize = |f: &dyn Fn(&ClassQuality) -> bool| {
        let group: Vec<_> = per_class.iter().filter(|c| f(c)).collect();
        if group.is_empty() {
            return PqSummary::default();
        }
        let n = group.len() as f64;
        PqSummary {
            pq: group.iter().map(|c| c.pq).sum::<f64>() / n,
            sq: group.iter().map(|c| c.sq).sum::<f64>() / n,
            rq: group.iter().map(|c| c.rq).sum::<f64>() / n,
            classes: group.len(),
        }
    };
    let all = summarize(&|_| true);
    let thing = summarize(&|c| c.kind == SegmentKind::Thing);
    let stuff = summarize(&|c| c.kind == SegmentKind::Stuff);
    Ok(PqReport {
        pq: all.pq,
        sq: all.sq,
        rq: all.rq,
        per_class,
        all,
        thing,
        stuff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn spec() -> DatasetSpec {
        DatasetSpec::new(3, vec![2], vec!["ground".into(), "sky".into(), "car".into()], Some(255)).unwrap()
    }

    /// 20×10 map, background class 0, with class `c` instance `id` on `cells`.
    fn map(cells: &[usize], c: i32, id: i32) -> PanopticMap {
        let mut sem = vec![0; 200];
        let mut inst = vec![0; 200];
        for &i in cells {
            sem[i] = c;
            inst[i] = if c == 2 { id } else { 0 };
        }
        PanopticMap::from_planes(20, 10, sem, inst).unwrap()
    }

    #[test]
    fn identical_maps_score_one() {
        let gt = map(&(0..30).collect::<Vec<_>>(), 2, 4);
        let r = panoptic_quality(&gt, &gt, &spec()).unwrap();
        assert_eq!((r.pq, r.sq, r.rq), (1.0, 1.0, 1.0));
        assert_eq!(r.per_class.len(), 2);
        assert_eq!((r.thing.classes, r.stuff.classes), (1, 1));
    }

    #[test]
    fn iou_just_below_half_is_unmatched() {
        let gt = map(&(0..100).collect::<Vec<_>>(), 2, 1);
        let pred = map(&(40..140).collect::<Vec<_>>(), 2, 1);
        let r = panoptic_quality(&gt, &pred, &spec()).unwrap();
        let car = &r.per_class[1];
        assert_eq!((car.tp, car.fp, car.fn_), (0, 1, 1));
        assert_eq!(car.pq, 0.0);
    }

    #[test]
    fn eighty_percent_overlap() {
        let gt = map(&(0..100).collect::<Vec<_>>(), 2, 1);
        let pred = map(&(0..80).collect::<Vec<_>>(), 2, 9);
        let r = panoptic_quality(&gt, &pred, &spec()).unwrap();
        let car = &r.per_class[1];
        assert_eq!((car.tp, car.fp, car.fn_), (1, 0, 0));
        assert!((car.pq - 0.8).abs() < 1e-15);
        assert!((car.sq - 0.8).abs() < 1e-15);
        assert_eq!(car.rq, 1.0);
    }

    #[test]
    fn ignore_pixels_are_dropped_from_both_maps() {
        let mut gt = map(&(0..100).collect::<Vec<_>>(), 2, 1);
        let pred = map(&(0..140).collect::<Vec<_>>(), 2, 1);
        // Without ignore: IoU 100/140. Ignoring gt pixels 100..140 makes it exact.
        let mut sem = gt.semantic_plane().to_vec();
        sem[100..140].iter_mut().for_each(|v| *v = 255);
        gt = PanopticMap::from_planes(20, 10, sem, gt.instance_plane().to_vec()).unwrap();
        let r = panoptic_quality(&gt, &pred, &spec()).unwrap();
        assert_eq!(r.pq, 1.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = PanopticMap::from_planes(1, 2, vec![0, 0], vec![0, 0]).unwrap();
        let b = PanopticMap::from_planes(2, 1, vec![0, 0], vec![0, 0]).unwrap();
        assert!(matches!(panoptic_quality(&a, &b, &spec()), Err(Error::DimensionMismatch(_))));
    }
}
