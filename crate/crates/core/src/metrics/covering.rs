use serde::{Deserialize, Serialize};

use super::{Overlap, SegmentKind};
use crate::dataset::{DatasetSpec, PanopticMap};
use crate::error::Result;

/// Covering of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCoverage {
    pub class_id: i32,
    pub name: String,
    pub kind: SegmentKind,
    /// Area-weighted best IoU of the class's ground-truth segments.
    pub coverage: f64,
    /// Ground-truth pixels of the class.
    pub gt_area: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcReport {
    /// Mean coverage over `per_class`.
    pub pc: f64,
    /// Classes with ground-truth pixels, ascending id.
    pub per_class: Vec<ClassCoverage>,
}

/// Parsing covering of `pred` against `gt`.
///
/// For class `i` with ground-truth segments `S_i` and predicted segments
/// `S'_i`:
///
/// `Cov_i = (1 / N_i) Σ_{R ∈ S_i} |R| · max_{R' ∈ S'_i} IoU(R, R')`,
/// `N_i = Σ_{R ∈ S_i} |R|`.
///
/// PC is the mean of `Cov_i` over the classes with `N_i > 0`; classes absent
/// from the ground truth have no defined covering and are left out.
pub fn parsing_covering(gt: &PanopticMap, pred: &PanopticMap, spec: &DatasetSpec) -> Result<PcReport> {
    let ov = Overlap::new(gt, pred, spec)?;
    let mut best = vec![0.0f64; ov.gt.len()];
    for &((a, b), inter) in &ov.joint {
        let v = ov.iou(a, b, inter);
        if v > best[a as usize] {
            best[a as usize] = v;
        }
    }
    let mut per_class: Vec<ClassCoverage> = Vec::new();
    let mut acc: Option<(i32, u64, f64)> = None;
    let flush = |acc: Option<(i32, u64, f64)>, out: &mut Vec<ClassCoverage>| {
        if let Some((c, n, weighted)) = acc {
            out.push(ClassCoverage {
                class_id: c,
                name: spec.name(c).to_string(),
                kind: if spec.is_thing(c) { SegmentKind::Thing } else { SegmentKind::Stuff },
                coverage: weighted / n as f64,
                gt_area: n,
            });
        }
    };
    // Segments are in (class, instance) order, so classes arrive grouped.
    for (s, &v) in ov.gt.iter().zip(&best) {
        match &mut acc {
            Some((c, n, weighted)) if *c == s.class_id => {
                *n += s.area;
                *weighted += s.area as f64 * v;
            }
            _ => {
                flush(acc.take(), &mut per_class);
                acc = Some((s.class_id, s.area, s.area as f64 * v));
            }
        }
    }
    flush(acc, &mut per_class);
    let pc = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|c| c.coverage).sum::<f64>() / per_class.len() as f64
    };
    Ok(PcReport { pc, per_class })
}
