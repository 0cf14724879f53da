use rayon::prelude::*;

use super::{Instance, SemanticInput};
use crate::dataset::{DatasetSpec, PanopticMap};
use crate::error::{Error, Result};
use crate::tensor::{Shape, TensorMap};

/// Hard per-pixel class labels `(1, H, W)` from a semantic prediction.
///
/// Probabilities are reduced by argmax, ties toward the lower class.
/// Labels must lie in `[0, C)`.
pub fn semantic_labels(semantic: &SemanticInput, spec: &DatasetSpec) -> Result<TensorMap<i32>> {
    let c = spec.num_classes();
    match semantic {
        SemanticInput::Labels(t) => {
            t.expect_shape(Shape::new(1, t.height(), t.width()), "semantic labels")?;
            check_labels(t, spec)?;
            Ok(t.clone())
        }
        SemanticInput::Probabilities(p) => {
            if p.channels() != c {
                return Err(Error::DimensionMismatch(format!(
                    "semantic probabilities have {} channels for {c} classes",
                    p.channels()
                )));
            }
            let (h, w) = (p.height(), p.width());
            let n = h * w;
            let mut out = TensorMap::zeros(Shape::new(1, h, w));
            if n == 0 || c == 0 {
                return Ok(out);
            }
            let src = p.data();
            out.data_mut().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
                for (x, slot) in row.iter_mut().enumerate() {
                    let i = y * w + x;
                    let mut best = 0;
                    let mut bv = src[i];
                    for k in 1..c {
                        let v = src[k * n + i];
                        if v > bv || bv.is_nan() && !v.is_nan() {
                            best = k;
                            bv = v;
                        }
                    }
                    *slot = best as i32;
                }
            });
            Ok(out)
        }
    }
}

fn check_labels(t: &TensorMap<i32>, spec: &DatasetSpec) -> Result<()> {
    match t.data().iter().position(|&v| !spec.is_class(v)) {
        Some(i) => Err(Error::InvalidInput(format!(
            "semantic label {} at pixel {i} is not a class id in [0, {})",
            t.data()[i],
            spec.num_classes()
        ))),
        None => Ok(()),
    }
}

/// Merges semantic labels with per-pixel instance ids.
///
/// Stuff pixels keep their label and get instance 0. Thing pixels are grouped
/// by `instance_ids`; each group takes the majority thing class of its pixels
/// (ties toward the lower class) and the groups are renumbered densely from 1
/// in id order. Groups with no thing pixel vanish.
///
/// Thing pixels without an instance (id 0, e.g. when nothing was detected)
/// cannot form a valid segment and are relabeled: to the most frequent stuff
/// class in the prediction, else the lowest stuff class of `spec`; a spec
/// with no stuff classes instead turns each such thing class into one extra
/// instance.
pub fn fuse_panoptic(
    semantic_labels: &TensorMap<i32>,
    instance_ids: &TensorMap<i32>,
    instances: &[Instance],
    spec: &DatasetSpec,
) -> Result<PanopticMap> {
    let (h, w) = (semantic_labels.height(), semantic_labels.width());
    semantic_labels.expect_shape(Shape::new(1, h, w), "semantic labels")?;
    instance_ids.expect_shape(Shape::new(1, h, w), "instance ids")?;
    check_labels(semantic_labels, spec)?;
    let m = instances.len();
    if let Some(&bad) = instance_ids.data().iter().find(|&&j| j < 0 || j as usize > m) {
        return Err(Error::InvalidInput(format!("instance id {bad} outside [0, {m}]")));
    }
    let c = spec.num_classes();
    let labels = semantic_labels.data();
    let ids = instance_ids.data();

    // Votes per (instance, class); row 0 collects unassigned thing pixels.
    let mut votes = vec![0u64; (m + 1) * c];
    let mut stuff_area = vec![0u64; c];
    for (&l, &j) in labels.iter().zip(ids) {
        let l = l as usize;
        if spec.is_thing(l as i32) {
            votes[j as usize * c + l] += 1;
        } else {
            stuff_area[l] += 1;
        }
    }
    let majority = |j: usize| -> Option<usize> {
        let row = &votes[j * c..(j + 1) * c];
        let (k, &n) = row.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        (n > 0).then_some(k)
    };

    let mut class_of = vec![0i32; m + 1];
    let mut new_id = vec![0i32; m + 1];
    let mut next = 1;
    for j in 1..=m {
        if let Some(k) = majority(j) {
            class_of[j] = k as i32;
            new_id[j] = next;
            next += 1;
        }
    }

    // Fallback for unassigned thing pixels.
    let fallback_stuff = stuff_area
        .iter()
        .enumerate()
        .filter(|&(_, &n)| n > 0)
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k as i32)
        .or_else(|| spec.stuff_ids().next().map(|s| s as i32));
    let mut orphan_id = vec![0i32; c];
    if fallback_stuff.is_none() {
        for k in 0..c {
            if votes[k] > 0 {
                orphan_id[k] = next;
                next += 1;
            }
        }
    }

    let mut sem = Vec::with_capacity(h * w);
    let mut inst = Vec::with_capacity(h * w);
    for (&l, &j) in labels.iter().zip(ids) {
        let (s, i) = if !spec.is_thing(l) {
            (l, 0)
        } else if j > 0 {
            (class_of[j as usize], new_id[j as usize])
        } else {
            match fallback_stuff {
                Some(s) => (s, 0),
                None => (l, orphan_id[l as usize]),
            }
        };
        sem.push(s);
        inst.push(i);
    }
    PanopticMap::from_planes(h, w, sem, inst)
}
