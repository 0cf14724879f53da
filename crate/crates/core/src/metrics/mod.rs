//! Segment-level evaluation of panoptic maps.
//!
//! Both metrics see an image as a set of segments: one per thing instance and
//! one per stuff class present, however many disconnected blobs it has.
//! Pixels whose ground-truth class is the ignore label are removed from both
//! maps before anything is counted.
//!
//! * [`panoptic_quality`] matches ground-truth and predicted segments of the
//!   same class when their IoU exceeds 0.5 and reports PQ = SQ × RQ.
//! * [`parsing_covering`] gives every ground-truth segment its best IoU with
//!   any predicted segment of the class, weighted by area, with no matching.
//!
//! IoUs come from one joint-histogram pass over the pixels rather than from
//! pairwise set comparisons.

mod covering;
mod pq;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSpec, PanopticMap};
use crate::error::{Error, Result};

pub use covering::{parsing_covering, ClassCoverage, PcReport};
pub use pq::{panoptic_quality, ClassQuality, PqReport, PqSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Thing,
    Stuff,
}

/// One region of a panoptic map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub class_id: i32,
    /// 0 for stuff segments.
    pub instance_id: i32,
    pub kind: SegmentKind,
    /// Pixel count, always positive.
    pub area: u64,
}

/// Segments of `pmap` ordered by `(class_id, instance_id)`. Ignore-labeled
/// pixels produce no segment.
pub fn extract_segments(pmap: &PanopticMap, spec: &DatasetSpec) -> Result<Vec<Segment>> {
    pmap.validate(spec)?;
    let keep = vec![true; pmap.len()];
    Ok(Labeled::new(pmap, spec, &keep).segments)
}

/// A panoptic map reduced to dense segment indices.
pub(crate) struct Labeled {
    pub segments: Vec<Segment>,
    /// Segment index per pixel, `NONE` for pixels outside every segment.
    pub index: Vec<u32>,
}

pub(crate) const NONE: u32 = u32::MAX;

impl Labeled {
    pub fn new(pmap: &PanopticMap, spec: &DatasetSpec, keep: &[bool]) -> Self {
        let sem = pmap.semantic_plane();
        let inst = pmap.instance_plane();
        let mut ids: HashMap<(i32, i32), u32> = HashMap::new();
        let mut keys: Vec<(i32, i32)> = Vec::new();
        let mut index = vec![NONE; sem.len()];
        let mut last: Option<((i32, i32), u32)> = None;
        for i in 0..sem.len() {
            let c = sem[i];
            if !keep[i] || !spec.is_class(c) {
                continue;
            }
            let key = (c, if spec.is_thing(c) { inst[i] } else { 0 });
            let id = match last {
                Some((k, id)) if k == key => id,
                _ => *ids.entry(key).or_insert_with(|| {
                    keys.push(key);
                    keys.len() as u32 - 1
                }),
            };
            last = Some((key, id));
            index[i] = id;
        }
        // Renumber in key order.
        let mut order: Vec<u32> = (0..keys.len() as u32).collect();
        order.sort_unstable_by_key(|&j| keys[j as usize]);
        let mut rank = vec![0u32; keys.len()];
        for (r, &j) in order.iter().enumerate() {
            rank[j as usize] = r as u32;
        }
        let mut segments: Vec<Segment> = order
            .iter()
            .map(|&j| {
                let (class_id, instance_id) = keys[j as usize];
                Segment {
                    class_id,
                    instance_id,
                    kind: if spec.is_thing(class_id) { SegmentKind::Thing } else { SegmentKind::Stuff },
                    area: 0,
                }
            })
            .collect();
        for v in index.iter_mut().filter(|v| **v != NONE) {
            *v = rank[*v as usize];
            segments[*v as usize].area += 1;
        }
        Self { segments, index }
    }
}

/// Both maps reduced to segments, plus their pixel overlaps.
pub(crate) struct Overlap {
    pub gt: Vec<Segment>,
    pub pred: Vec<Segment>,
    /// Intersection areas keyed by `(gt segment, pred segment)`, restricted
    /// to pairs of the same class, sorted by key.
    pub joint: Vec<((u32, u32), u64)>,
}

impl Overlap {
    pub fn new(gt: &PanopticMap, pred: &PanopticMap, spec: &DatasetSpec) -> Result<Self> {
        if gt.height() != pred.height() || gt.width() != pred.width() {
            return Err(Error::DimensionMismatch(format!(
                "ground truth is {}x{}, prediction is {}x{}",
                gt.height(),
                gt.width(),
                pred.height(),
                pred.width()
            )));
        }
        gt.validate(spec)?;
        pred.validate(spec)?;
        let keep: Vec<bool> = gt.semantic_plane().iter().map(|&c| !spec.is_ignore(c)).collect();
        let g = Labeled::new(gt, spec, &keep);
        let p = Labeled::new(pred, spec, &keep);
        let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
        let mut run: Option<((u32, u32), u64)> = None;
        for (&a, &b) in g.index.iter().zip(&p.index) {
            if a == NONE || b == NONE {
                continue;
            }
            match &mut run {
                Some((k, n)) if *k == (a, b) => *n += 1,
                _ => {
                    if let Some((k, n)) = run.take() {
                        *counts.entry(k).or_default() += n;
                    }
                    run = Some(((a, b), 1));
                }
            }
        }
        if let Some((k, n)) = run {
            *counts.entry(k).or_default() += n;
        }
        let mut joint: Vec<_> = counts
            .into_iter()
            .filter(|&((a, b), _)| g.segments[a as usize].class_id == p.segments[b as usize].class_id)
            .collect();
        joint.sort_unstable();
        Ok(Self {
            gt: g.segments,
            pred: p.segments,
            joint,
        })
    }

    pub fn iou(&self, a: u32, b: u32, inter: u64) -> f64 {
        let union = self.gt[a as usize].area + self.pred[b as usize].area - inter;
        inter as f64 / union as f64
    }
}
