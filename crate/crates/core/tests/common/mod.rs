//! Helpers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use panoptic::fusion::{self, FusionConfig};
use panoptic::synth::{self, SceneConfig, ShapeKind};
use panoptic::targets::KeypointConfig;
use panoptic::{DatasetSpec, PanopticMap};
use panoptic_oracle::{ClassTally, Labeling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Disk radius used by the round-trip scenes.
pub const RADIUS: f32 = 8.0;

/// 128×128 scene with 1–8 instances kept more than `2 * RADIUS` apart.
pub fn separated_scene(seed: u64) -> SceneConfig {
    SceneConfig {
        seed,
        height: 128,
        width: 128,
        num_instances: 1 + (seed % 8) as usize,
        shape_kind: ShapeKind::Mixed,
        min_extent: 2,
        max_extent: 20,
        stuff_bands: 2,
        spec: DatasetSpec::synthetic(),
        min_separation: Some(2.0 * RADIUS as f64),
    }
}

/// Ground truth and the parse of its ideal predictions.
pub fn round_trip(scene: &SceneConfig) -> (PanopticMap, PanopticMap) {
    let gt = synth::generate_scene(scene).unwrap();
    let kcfg = KeypointConfig::with_radius(RADIUS);
    let (semantic, maps) = synth::ideal_predictions(&gt, &scene.spec, &kcfg).unwrap();
    let parsed = fusion::parse(&semantic, &maps, &scene.spec, &kcfg, &FusionConfig::for_radius(RADIUS)).unwrap();
    (gt, parsed)
}

/// Three equally sized trees on a sky background; the prediction gets the
/// first tree exactly and labels the others sky.
pub fn three_trees(tree_is_thing: bool) -> (PanopticMap, PanopticMap, DatasetSpec) {
    let things = if tree_is_thing { vec![1] } else { vec![] };
    let spec = DatasetSpec::new(2, things, vec!["sky".into(), "tree".into()], None).unwrap();
    let (h, w) = (10, 30);
    let mut gt_sem = vec![0; h * w];
    let mut gt_inst = vec![0; h * w];
    let mut pred_sem = vec![0; h * w];
    let mut pred_inst = vec![0; h * w];
    for t in 0..3 {
        for y in 3..7 {
            for x in 2 + 10 * t..6 + 10 * t {
                let i = y * w + x;
                gt_sem[i] = 1;
                gt_inst[i] = if tree_is_thing { t as i32 + 1 } else { 0 };
                if t == 0 {
                    pred_sem[i] = 1;
                    pred_inst[i] = if tree_is_thing { 5 } else { 0 };
                }
            }
        }
    }
    (
        PanopticMap::from_planes(h, w, gt_sem, gt_inst).unwrap(),
        PanopticMap::from_planes(h, w, pred_sem, pred_inst).unwrap(),
        spec,
    )
}

/// Spec for the random metric pairs: 6 classes, 3–5 are things, 255 ignored.
pub fn pair_spec() -> DatasetSpec {
    DatasetSpec::new(6, vec![3, 4, 5], vec![], Some(255)).unwrap()
}

/// A random valid `h×w` panoptic map: stuff blocks overlaid with thing
/// rectangles, optionally with some ignore pixels.
fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, ignore: bool) -> (Vec<i32>, Vec<i32>) {
    let mut sem = vec![0; h * w];
    let mut inst = vec![0; h * w];
    for _ in 0..rng.random_range(1..4) {
        let c = rng.random_range(0..3);
        let (y0, x0) = (rng.random_range(0..h), rng.random_range(0..w));
        let (y1, x1) = (rng.random_range(y0..h), rng.random_range(x0..w));
        for y in y0..=y1 {
            for x in x0..=x1 {
                sem[y * w + x] = c;
            }
        }
    }
    for id in 1..=rng.random_range(0..7) {
        let c = rng.random_range(3..6);
        let (y0, x0) = (rng.random_range(0..h), rng.random_range(0..w));
        let (y1, x1) = ((y0 + rng.random_range(0..12)).min(h - 1), (x0 + rng.random_range(0..12)).min(w - 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                sem[y * w + x] = c;
                inst[y * w + x] = id;
            }
        }
    }
    if ignore {
        for _ in 0..rng.random_range(0..3) {
            let (y0, x0) = (rng.random_range(0..h), rng.random_range(0..w));
            for y in y0..(y0 + 4).min(h) {
                for x in x0..(x0 + 4).min(w) {
                    sem[y * w + x] = 255;
                    inst[y * w + x] = 0;
                }
            }
        }
    }
    (sem, inst)
}

/// A ground truth and a prediction that partly agrees with it, so that both
/// matched and unmatched segments occur.
pub fn random_pair(seed: u64, h: usize, w: usize) -> (PanopticMap, PanopticMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gs, gi) = random_map(&mut rng, h, w, true);
    let (mut ps, mut pi) = match rng.random_range(0..3) {
        // Independent prediction.
        0 => random_map(&mut rng, h, w, false),
        // Ground truth with a few rectangles repainted.
        _ => {
            let (mut s, mut i) = (gs.clone(), gi.clone());
            let (os, oi) = random_map(&mut rng, h, w, false);
            for _ in 0..rng.random_range(0..4) {
                let (y0, x0) = (rng.random_range(0..h), rng.random_range(0..w));
                let (y1, x1) = ((y0 + rng.random_range(0..10)).min(h - 1), (x0 + rng.random_range(0..10)).min(w - 1));
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let k = y * w + x;
                        s[k] = os[k];
                        // Offset ids so repainted things never merge with gt ids of another class.
                        i[k] = if oi[k] > 0 { oi[k] + 100 } else { 0 };
                    }
                }
            }
            (s, i)
        }
    };
    // Prediction carries no ignore label.
    for k in 0..h * w {
        if ps[k] == 255 {
            ps[k] = 0;
            pi[k] = 0;
        }
    }
    // Stuff never carries ids; a thing id must stay within one class.
    let spec = pair_spec();
    for k in 0..h * w {
        if spec.is_stuff(ps[k]) {
            pi[k] = 0;
        } else if pi[k] > 0 {
            pi[k] += 1000 * ps[k];
        }
    }
    (
        PanopticMap::from_planes(h, w, gs, gi).unwrap(),
        PanopticMap::from_planes(h, w, ps, pi).unwrap(),
    )
}

pub fn labeling(m: &PanopticMap) -> Labeling<'_> {
    Labeling {
        semantic: m.semantic_plane(),
        instance: m.instance_plane(),
    }
}

/// Oracle PQ tallies for `gt` vs `pred` under `spec`.
pub fn oracle_pq(gt: &PanopticMap, pred: &PanopticMap, spec: &DatasetSpec) -> std::collections::BTreeMap<i32, ClassTally> {
    panoptic_oracle::pq_naive(&labeling(gt), &labeling(pred), &|c| spec.is_thing(c), spec.ignore_label())
}

/// Oracle covering per class for `gt` vs `pred` under `spec`.
pub fn oracle_covering(gt: &PanopticMap, pred: &PanopticMap, spec: &DatasetSpec) -> std::collections::BTreeMap<i32, (f64, u64)> {
    panoptic_oracle::covering_naive(&labeling(gt), &labeling(pred), &|c| spec.is_thing(c), spec.ignore_label())
}

/// Tolerance for an offset of magnitude `delta` stored as `f32`: the 1e-6 px
/// budget plus half an ulp of the stored value.
pub fn offset_tolerance(delta: f64) -> f64 {
    1e-6 + delta.abs() * f64::from(f32::EPSILON) / 2.0
}

/// Checks that every short, middle and long-range target lands where it
/// should. Returns the number of offsets checked.
pub fn check_target_consistency(gt: &PanopticMap, spec: &DatasetSpec, kcfg: &KeypointConfig) -> Result<usize, String> {
    use panoptic::targets::{generate_targets, gt_instances, NUM_KEYPOINTS};
    let t = generate_targets(gt, spec, kcfg).map_err(|e| e.to_string())?;
    let (h, w) = (gt.height(), gt.width());
    let n = h * w;
    let inst = gt_instances(gt).map_err(|e| e.to_string())?;
    let r = kcfg.radius as f64;
    let mut checked = 0;
    let at = |m: &panoptic::TensorMap<f32>, pair: usize, i: usize| (m.data()[2 * pair * n + i] as f64, m.data()[(2 * pair + 1) * n + i] as f64);
    for i in 0..n {
        let (qy, qx) = ((i / w) as f64, (i % w) as f64);
        for k in 0..NUM_KEYPOINTS {
            let in_disk = t.disk_mask.data()[k * n + i] == 1;
            if (t.heatmap.data()[k * n + i] == 1.0) != in_disk {
                return Err(format!("heatmap and disk mask disagree at pixel {i}"));
            }
            let (dy, dx) = at(&t.short, k, i);
            if !in_disk {
                if (dy, dx) != (0.0, 0.0) {
                    return Err(format!("short offset outside the disk at pixel {i}"));
                }
                continue;
            }
            // Lands on the nearest same-type keypoint.
            let (ly, lx) = (qy + dy, qx + dx);
            let nearest = inst
                .iter()
                .map(|(_, _, kp)| ((kp[k].y - qy).powi(2) + (kp[k].x - qx).powi(2), kp[k]))
                .fold((f64::INFINITY, None), |b, (d, p)| if d < b.0 { (d, Some(p)) } else { b });
            let target = nearest.1.ok_or("disk pixel without instance")?;
            if nearest.0.sqrt() > r + 1e-9 {
                return Err(format!("disk pixel {i} is farther than R from every keypoint"));
            }
            let err = (ly - target.y).abs().max((lx - target.x).abs());
            if err > 1e-6 {
                return Err(format!("short offset at pixel {i} type {k} misses by {err:e}"));
            }
            checked += 1;
        }
    }
    let graph = kcfg.dkrg();
    for (_, pixels, kps) in &inst {
        for &(y, x) in pixels {
            let i = y * w + x;
            for (k, kp) in kps.iter().enumerate() {
                let (dy, dx) = at(&t.long, k, i);
                let ey = (y as f64 + dy - kp.y).abs();
                let ex = (x as f64 + dx - kp.x).abs();
                if ey > offset_tolerance(kp.y - y as f64) || ex > offset_tolerance(kp.x - x as f64) {
                    return Err(format!("long offset at ({y}, {x}) type {k} misses by ({ey:e}, {ex:e})"));
                }
                checked += 1;
            }
        }
        // Middle-range composition at the pixel nearest to each source keypoint.
        for (e, &(s, d)) in graph.edges().iter().enumerate() {
            let (py, px) = kps[s].nearest_pixel(h, w);
            let i = py * w + px;
            let (dy, dx) = at(&t.middle, e, i);
            if t.disk_mask.data()[s * n + i] != 1 {
                return Err(format!("keypoint pixel ({py}, {px}) outside its own disk"));
            }
            let (ey, ex) = ((py as f64 + dy - kps[d].y).abs(), (px as f64 + dx - kps[d].x).abs());
            if ey > offset_tolerance(dy) || ex > offset_tolerance(dx) {
                return Err(format!("middle offset of edge {e} misses by ({ey:e}, {ex:e})"));
            }
            checked += 1;
        }
    }
    // Offsets vanish outside their masks.
    for i in 0..n {
        if t.instance_mask.data()[i] == 0 && (0..2 * NUM_KEYPOINTS).any(|c| t.long.data()[c * n + i] != 0.0) {
            return Err(format!("long offset outside the instance mask at pixel {i}"));
        }
    }
    let mm = t.middle_mask();
    for e in 0..graph.num_edges() {
        for i in 0..n {
            if mm.data()[e * n + i] == 0 && (t.middle.data()[2 * e * n + i] != 0.0 || t.middle.data()[(2 * e + 1) * n + i] != 0.0) {
                return Err(format!("middle offset outside its mask at pixel {i}"));
            }
        }
    }
    Ok(checked)
}
