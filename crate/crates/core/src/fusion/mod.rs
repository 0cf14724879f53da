//! Prediction fusion: from dense network outputs to a [`PanopticMap`].
//!
//! [`parse`] chains the stages, each of which is also exposed on its own:
//!
//! 1. [`refine_offsets`]: long-range offsets are corrected by the short-range
//!    offsets found where they land.
//! 2. [`hough_scores`]: short-range offsets vote with the heatmap probability
//!    as weight, long-range offsets vote with weight one; the two score maps
//!    are summed with configurable weights.
//! 3. [`localize_keypoints`]: local maxima of the fused score, rescored by
//!    local heatmap evidence.
//! 4. [`detect_instances`]: greedy grouping of keypoints into instances by
//!    following middle-range offsets, then [`nms_instances`].
//! 5. [`assign_pixels`]: each pixel joins the instance whose keypoints are
//!    closest to the keypoints its long-range offsets predict.
//! 6. [`fuse_panoptic`]: merge with the semantic prediction.

mod assign;
mod detect;
mod hough;
mod localize;
mod merge;
mod refine;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSpec, PanopticMap};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Point};
use crate::targets::{Dkrg, InstanceTargetMaps, KeypointConfig, NUM_KEYPOINTS};
use crate::tensor::{Shape, TensorMap};

pub use assign::assign_pixels;
pub use detect::{detect_instances, nms_instances};
pub use hough::{heatmap_probabilities, hough_scores, hough_scores_masked};
pub use localize::localize_keypoints;
pub use merge::{fuse_panoptic, semantic_labels};
pub use refine::refine_offsets;

/// Outputs of the four instance heads.
#[derive(Clone, Debug, PartialEq)]
pub struct InstancePredictionMaps {
    /// `(P, H, W)` pre-sigmoid logits.
    pub heatmap_logits: TensorMap<f32>,
    /// `(2P, H, W)`.
    pub short: TensorMap<f32>,
    /// `(2E, H, W)`.
    pub middle: TensorMap<f32>,
    /// `(2P, H, W)`.
    pub long: TensorMap<f32>,
}

impl InstancePredictionMaps {
    /// Converts training targets into the predictions of a perfect network:
    /// heatmap 1/0 becomes logit `+magnitude`/`-magnitude`.
    pub fn from_targets(t: &InstanceTargetMaps, magnitude: f32) -> Self {
        Self {
            heatmap_logits: t.heatmap.map(|v| if v > 0.5 { magnitude } else { -magnitude }),
            short: t.short.clone(),
            middle: t.middle.clone(),
            long: t.long.clone(),
        }
    }

    pub fn height(&self) -> usize {
        self.heatmap_logits.height()
    }

    pub fn width(&self) -> usize {
        self.heatmap_logits.width()
    }

    /// Checks channel counts against `graph` and that all maps share `H×W`.
    pub fn validate(&self, graph: &Dkrg) -> Result<()> {
        let (h, w) = (self.height(), self.width());
        self.heatmap_logits.expect_shape(Shape::new(NUM_KEYPOINTS, h, w), "heatmap logits")?;
        self.short.expect_shape(Shape::new(2 * NUM_KEYPOINTS, h, w), "short-range offsets")?;
        self.middle.expect_shape(Shape::new(2 * graph.num_edges(), h, w), "middle-range offsets")?;
        self.long.expect_shape(Shape::new(2 * NUM_KEYPOINTS, h, w), "long-range offsets")?;
        Ok(())
    }

    pub(crate) fn view(&self) -> MapsView<'_> {
        MapsView {
            logits: &self.heatmap_logits,
            short: &self.short,
            middle: &self.middle,
            long: &self.long,
        }
    }
}

/// Borrowed prediction maps, letting [`parse`] substitute refined long-range
/// offsets without copying the other heads.
#[derive(Clone, Copy)]
pub(crate) struct MapsView<'a> {
    pub logits: &'a TensorMap<f32>,
    pub short: &'a TensorMap<f32>,
    pub middle: &'a TensorMap<f32>,
    pub long: &'a TensorMap<f32>,
}

impl MapsView<'_> {
    pub fn height(&self) -> usize {
        self.logits.height()
    }

    pub fn width(&self) -> usize {
        self.logits.width()
    }

    /// Offset pair `(2c, 2c+1)` of `map` at the nearest pixel to `p`.
    pub fn offset_at(map: &TensorMap<f32>, pair: usize, p: Point) -> Point {
        let (h, w) = (map.height(), map.width());
        let (y, x) = p.nearest_pixel(h, w);
        let i = y * w + x;
        Point::new(map.channel(2 * pair)[i] as f64, map.channel(2 * pair + 1)[i] as f64)
    }
}

/// A localized keypoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    /// Keypoint type in `[0, P)`.
    pub kind: usize,
    pub position: Point,
    /// Confidence in `[0, 1]`.
    pub score: f64,
}

/// A detected instance: one keypoint of every type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub keypoints: [Keypoint; NUM_KEYPOINTS],
    /// Mean of the keypoint scores.
    pub score: f64,
    /// Spanned by the four corner keypoints.
    pub bbox: BBox,
}

impl Instance {
    pub fn new(keypoints: [Keypoint; NUM_KEYPOINTS]) -> Self {
        let score = keypoints.iter().map(|k| k.score).sum::<f64>() / NUM_KEYPOINTS as f64;
        let bbox = BBox::from_points(keypoints[1..].iter().map(|k| &k.position));
        Self { keypoints, score, bbox }
    }
}

/// How localized keypoints are rescored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rescore {
    /// Mean heatmap probability over the disk of `rescore_radius` around the
    /// keypoint. Stands in for an expected-OKS score: it aggregates the local
    /// evidence and is 1 on ideal predictions.
    #[default]
    DiskMeanProbability,
    /// Heatmap probability at the keypoint's own pixel.
    PeakProbability,
}

/// Fusion parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Rounds of long-by-short offset refinement.
    pub refine_iterations: usize,
    /// Weight of the short-range score map in the fused score.
    pub short_weight: f32,
    /// Weight of the long-range score map in the fused score.
    pub long_weight: f32,
    pub localmax_threshold: f32,
    /// Chebyshev radius of the local-maximum window.
    pub localmax_radius: usize,
    /// A keypoint this close to the same-type keypoint of an already
    /// detected instance is rejected.
    pub proximity_radius: f32,
    pub rescore: Rescore,
    pub rescore_radius: f32,
    pub nms_iou: f64,
    pub max_instances: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            refine_iterations: 2,
            short_weight: 1.0,
            long_weight: 0.1,
            localmax_threshold: 0.01,
            localmax_radius: 5,
            proximity_radius: 25.0,
            rescore: Rescore::DiskMeanProbability,
            rescore_radius: 25.0,
            nms_iou: 0.5,
            max_instances: 200,
        }
    }
}

impl FusionConfig {
    /// Defaults with the proximity and rescoring radii matched to a disk
    /// radius other than the default 25.
    pub fn for_radius(radius: f32) -> Self {
        Self {
            proximity_radius: radius,
            rescore_radius: radius,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.localmax_radius < 1 {
            return bad("localmax_radius must be >= 1");
        }
        if !(self.proximity_radius >= 1.0) || !(self.rescore_radius >= 1.0) {
            return bad("proximity_radius and rescore_radius must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.localmax_threshold) || !(0.0..=1.0).contains(&self.nms_iou) {
            return bad("localmax_threshold and nms_iou must be in [0, 1]");
        }
        if !self.short_weight.is_finite() || !self.long_weight.is_finite() {
            return bad("score weights must be finite");
        }
        Ok(())
    }
}

/// The semantic head's output: hard labels or per-class probabilities.
#[derive(Clone, Debug)]
pub enum SemanticInput {
    /// `(1, H, W)` class ids.
    Labels(TensorMap<i32>),
    /// `(C, H, W)` scores; the argmax is taken, ties to the lower class.
    Probabilities(TensorMap<f32>),
}

impl SemanticInput {
    pub fn height(&self) -> usize {
        match self {
            SemanticInput::Labels(t) => t.height(),
            SemanticInput::Probabilities(t) => t.height(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            SemanticInput::Labels(t) => t.width(),
            SemanticInput::Probabilities(t) => t.width(),
        }
    }
}

/// Wall-clock milliseconds spent in each stage of [`parse_timed`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub semantic_ms: f64,
    pub refine_ms: f64,
    pub hough_ms: f64,
    pub localize_ms: f64,
    pub detect_ms: f64,
    pub nms_ms: f64,
    pub assign_ms: f64,
    pub merge_ms: f64,
    pub total_ms: f64,
}

/// Full fusion pipeline.
pub fn parse(
    semantic: &SemanticInput,
    maps: &InstancePredictionMaps,
    spec: &DatasetSpec,
    kcfg: &KeypointConfig,
    fcfg: &FusionConfig,
) -> Result<PanopticMap> {
    parse_timed(semantic, maps, spec, kcfg, fcfg).map(|(m, _)| m)
}

/// [`parse`], also reporting per-stage wall-clock time.
pub fn parse_timed(
    semantic: &SemanticInput,
    maps: &InstancePredictionMaps,
    spec: &DatasetSpec,
    kcfg: &KeypointConfig,
    fcfg: &FusionConfig,
) -> Result<(PanopticMap, StageTimings)> {
    kcfg.validate()?;
    fcfg.validate()?;
    let graph = kcfg.dkrg();
    maps.validate(&graph)?;
    let (h, w) = (maps.height(), maps.width());
    if semantic.height() != h || semantic.width() != w {
        return Err(Error::DimensionMismatch(format!(
            "semantic prediction is {}x{}, instance maps are {h}x{w}",
            semantic.height(),
            semantic.width()
        )));
    }

    let mut t = StageTimings::default();
    let start = Instant::now();
    let mut lap = Instant::now();
    let mut tick = |slot: &mut f64| {
        let now = Instant::now();
        *slot = (now - lap).as_secs_f64() * 1e3;
        lap = now;
    };

    let labels = semantic_labels(semantic, spec)?;
    let thing: Vec<bool> = labels.data().iter().map(|&c| spec.is_thing(c)).collect();
    tick(&mut t.semantic_ms);

    // Refined long-range offsets are only read at thing pixels (votes and
    // assignment) and at keypoint pixels (detection fallback).
    let mut refined = refine::refine_long(maps.view(), fcfg.refine_iterations, Some(&thing));
    tick(&mut t.refine_ms);

    let probs = heatmap_probabilities(&maps.heatmap_logits);
    let scores = hough::vote(
        MapsView {
            long: &refined,
            ..maps.view()
        },
        &probs,
        fcfg,
        Some(&thing),
    );
    tick(&mut t.hough_ms);

    let keypoints = localize::localize(&scores, &probs, fcfg);
    for kp in &keypoints {
        let (y, x) = kp.position.nearest_pixel(h, w);
        let i = y * w + x;
        if !thing[i] {
            for k in 0..NUM_KEYPOINTS {
                let (dy, dx) = refine::refine_one(maps.view(), k, (y, x), fcfg.refine_iterations);
                refined.channel_mut(2 * k)[i] = dy;
                refined.channel_mut(2 * k + 1)[i] = dx;
            }
        }
    }
    let view = MapsView {
        long: &refined,
        ..maps.view()
    };
    tick(&mut t.localize_ms);

    let instances = detect::detect(&keypoints, view, &probs, &graph, fcfg);
    tick(&mut t.detect_ms);

    let instances = nms_instances(&instances, fcfg);
    tick(&mut t.nms_ms);

    let ids = assign::assign(&instances, view, Some(&thing));
    tick(&mut t.assign_ms);

    let out = fuse_panoptic(&labels, &ids, &instances, spec)?;
    tick(&mut t.merge_ms);
    t.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((out, t))
}

#[inline]
pub(crate) fn sigmoid(z: f32) -> f32 {
    1.0 / (1.0 + (-z).exp())
}
