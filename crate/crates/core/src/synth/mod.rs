//! Seeded synthetic scenes standing in for a trained network.
//!
//! [`generate_scene`] paints horizontal stuff bands and thing shapes into a
//! ground-truth [`PanopticMap`]; [`ideal_predictions`] turns it into the
//! outputs a perfect network would emit, and [`perturb`] degrades those
//! with seeded noise.
//!
//! All randomness comes from [`ChaCha8Rng`], whose output is fixed by its
//! algorithm, so a seed reproduces the same scene on every platform.
//! Independent parts of a run draw from separate streams of the same seed.

mod noise;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSpec, PanopticMap};
use crate::error::{Error, Result};
use crate::fusion::{InstancePredictionMaps, SemanticInput};
use crate::targets::{generate_targets, KeypointConfig};
use crate::tensor::{Shape, TensorMap};

pub use noise::{perturb, NoiseConfig};

/// Placement attempts per instance before giving up.
const MAX_TRIES: usize = 1000;
/// Heatmap logit magnitude of ideal predictions.
pub const IDEAL_LOGIT: f32 = 50.0;

/// Random-number stream for `stream` of `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rectangles,
    Ellipses,
    #[default]
    Mixed,
}

/// Scene layout parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub num_instances: usize,
    pub shape_kind: ShapeKind,
    /// Bounding-box side lengths are drawn from `min_extent..=max_extent`.
    pub min_extent: usize,
    pub max_extent: usize,
    /// Number of horizontal stuff strata, each a distinct stuff class.
    pub stuff_bands: usize,
    pub spec: DatasetSpec,
    /// When set, the bounding boxes of any two instances are kept more than
    /// this many pixels apart (Euclidean distance between their nearest
    /// pixels), which also rules out occlusion.
    pub min_separation: Option<f64>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            height: 128,
            width: 128,
            num_instances: 4,
            shape_kind: ShapeKind::Mixed,
            min_extent: 4,
            max_extent: 24,
            stuff_bands: 2,
            spec: DatasetSpec::synthetic(),
            min_separation: None,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.height == 0 || self.width == 0 {
            return bad("scene must be at least 1x1".into());
        }
        if self.min_extent == 0 || self.min_extent > self.max_extent {
            return bad(format!("need 1 <= min_extent <= max_extent, got {}..={}", self.min_extent, self.max_extent));
        }
        if self.num_instances > 0 && self.min_extent > self.height.min(self.width) {
            return bad(format!("min_extent {} does not fit a {}x{} scene", self.min_extent, self.height, self.width));
        }
        let stuff = self.spec.stuff_ids().count();
        if self.stuff_bands == 0 || self.stuff_bands > stuff || self.stuff_bands > self.height {
            return bad(format!(
                "stuff_bands must be in 1..={} (stuff classes and rows), got {}",
                stuff.min(self.height),
                self.stuff_bands
            ));
        }
        if self.num_instances > 0 && self.spec.thing_ids().is_empty() {
            return bad("instances requested but the spec has no thing classes".into());
        }
        if self.min_separation.is_some_and(|s| !(s >= 0.0)) {
            return bad("min_separation must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Placed {
    y0: usize,
    x0: usize,
    y1: usize,
    x1: usize,
}

impl Placed {
    fn gap(&self, o: &Placed) -> f64 {
        let dy = (self.y0 as f64 - o.y1 as f64).max(o.y0 as f64 - self.y1 as f64).max(0.0);
        let dx = (self.x0 as f64 - o.x1 as f64).max(o.x0 as f64 - self.x1 as f64).max(0.0);
        (dy * dy + dx * dx).sqrt()
    }
}

/// Paints a ground-truth scene.
///
/// Rows are split into `stuff_bands` strata of distinct, randomly chosen
/// stuff classes. Instances of random thing classes are then painted in
/// order, later ones occluding earlier ones; instances left without a
/// visible pixel are dropped and ids are renumbered `1..=M` in paint order.
pub fn generate_scene(cfg: &SceneConfig) -> Result<PanopticMap> {
    cfg.validate()?;
    let (h, w) = (cfg.height, cfg.width);
    let mut sem = vec![0i32; h * w];
    let mut inst = vec![0i32; h * w];

    let mut rng = rng_stream(cfg.seed, 0);
    let mut stuff: Vec<u32> = cfg.spec.stuff_ids().collect();
    stuff.shuffle(&mut rng);
    let mut cuts: Vec<usize> = rand::seq::index::sample(&mut rng, h - 1, cfg.stuff_bands - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    cuts.push(h);
    let mut row = 0;
    for (band, &end) in cuts.iter().enumerate() {
        sem[row * w..end * w].fill(stuff[band] as i32);
        row = end;
    }

    let mut rng = rng_stream(cfg.seed, 1);
    let things = cfg.spec.thing_ids();
    let mut placed: Vec<Placed> = Vec::new();
    for n in 0..cfg.num_instances {
        let (ext_h, ext_w) = (cfg.max_extent.min(h), cfg.max_extent.min(w));
        let mut spot = None;
        for _ in 0..MAX_TRIES {
            let eh = rng.random_range(cfg.min_extent..=ext_h);
            let ew = rng.random_range(cfg.min_extent..=ext_w);
            let y0 = rng.random_range(0..=h - eh);
            let x0 = rng.random_range(0..=w - ew);
            let p = Placed {
                y0,
                x0,
                y1: y0 + eh - 1,
                x1: x0 + ew - 1,
            };
            let clear = cfg.min_separation.map_or(true, |s| placed.iter().all(|o| p.gap(o) > s));
            if clear {
                spot = Some(p);
                break;
            }
        }
        let p = spot.ok_or_else(|| {
            Error::GenerationFailure(format!("could not place instance {} of {} after {MAX_TRIES} tries", n + 1, cfg.num_instances))
        })?;
        let class = things[rng.random_range(0..things.len())] as i32;
        let ellipse = match cfg.shape_kind {
            ShapeKind::Rectangles => false,
            ShapeKind::Ellipses => true,
            ShapeKind::Mixed => rng.random_bool(0.5),
        };
        let (cy, cx) = ((p.y0 + p.y1) as f64 / 2.0, (p.x0 + p.x1) as f64 / 2.0);
        let (ry, rx) = ((p.y1 - p.y0 + 1) as f64 / 2.0, (p.x1 - p.x0 + 1) as f64 / 2.0);
        for y in p.y0..=p.y1 {
            for x in p.x0..=p.x1 {
                let inside = !ellipse || {
                    let (dy, dx) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
                    dy * dy + dx * dx <= 1.0
                };
                if inside {
                    sem[y * w + x] = class;
                    inst[y * w + x] = n as i32 + 1;
                }
            }
        }
        placed.push(p);
    }

    // Dense renumbering drops fully occluded instances.
    let mut visible = vec![false; cfg.num_instances + 1];
    for &id in &inst {
        visible[id as usize] = true;
    }
    let mut remap = vec![0i32; cfg.num_instances + 1];
    let mut next = 1;
    for id in 1..=cfg.num_instances {
        if visible[id] {
            remap[id] = next;
            next += 1;
        }
    }
    for id in &mut inst {
        *id = remap[*id as usize];
    }
    PanopticMap::from_planes(h, w, sem, inst)
}

/// What a perfect network would output for `gt`.
///
/// Semantic probabilities are one-hot on the ground-truth class (uniform on
/// ignore pixels); the instance maps are the training targets with the
/// heatmap turned into logits of ±[`IDEAL_LOGIT`].
pub fn ideal_predictions(gt: &PanopticMap, spec: &DatasetSpec, kcfg: &KeypointConfig) -> Result<(SemanticInput, InstancePredictionMaps)> {
    let targets = generate_targets(gt, spec, kcfg)?;
    let c = spec.num_classes();
    let (h, w) = (gt.height(), gt.width());
    let n = h * w;
    let mut probs = TensorMap::<f32>::zeros(Shape::new(c, h, w));
    let data = probs.data_mut();
    for (i, &l) in gt.semantic_plane().iter().enumerate() {
        if spec.is_class(l) {
            data[l as usize * n + i] = 1.0;
        } else {
            for k in 0..c {
                data[k * n + i] = 1.0 / c as f32;
            }
        }
    }
    Ok((SemanticInput::Probabilities(probs), InstancePredictionMaps::from_targets(&targets, IDEAL_LOGIT)))
}
