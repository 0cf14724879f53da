//! Keypoint representation of instances and the training targets derived
//! from ground-truth panoptic maps.
//!
//! Every instance is summarized by [`NUM_KEYPOINTS`] keypoints: its mass
//! center followed by the four corners of its bounding box. Four dense maps
//! are generated from them:
//!
//! * a binary heatmap per keypoint type, 1 inside a disk of radius `R`,
//! * short-range offsets from each disk pixel to its keypoint,
//! * middle-range offsets along the edges of a [`Dkrg`], on source disks,
//! * long-range offsets from every instance pixel to all its keypoints.
//!
//! Offset channel pair `(2k, 2k+1)` stores `(Δy, Δx)` so that the target
//! position equals the pixel position plus the offset.

mod loss;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSpec, PanopticMap};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::tensor::{Shape, TensorMap};

pub use loss::{bootstrapped_ce_loss, heatmap_loss, masked_l1_loss};

/// Keypoints per instance.
pub const NUM_KEYPOINTS: usize = 5;

pub const CENTER: usize = 0;
pub const TOP_LEFT: usize = 1;
pub const TOP_RIGHT: usize = 2;
pub const BOTTOM_LEFT: usize = 3;
pub const BOTTOM_RIGHT: usize = 4;

pub const KEYPOINT_NAMES: [&str; NUM_KEYPOINTS] = ["center", "top_left", "top_right", "bottom_left", "bottom_right"];

/// Shape of the directed keypoint relation graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    /// Mass center linked both ways to each corner.
    #[default]
    Star,
    /// Corners linked both ways around the box outline; the center is isolated.
    Rectangle,
}

/// Directed keypoint relation graph. Edge `e` owns middle-range channels
/// `(2e, 2e+1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dkrg {
    edges: Vec<(usize, usize)>,
}

impl Dkrg {
    pub fn star() -> Self {
        let corners = [TOP_LEFT, TOP_RIGHT, BOTTOM_LEFT, BOTTOM_RIGHT];
        let mut edges: Vec<_> = corners.iter().map(|&c| (CENTER, c)).collect();
        edges.extend(corners.iter().map(|&c| (c, CENTER)));
        Self { edges }
    }

    pub fn rectangle() -> Self {
        let ring = [TOP_LEFT, TOP_RIGHT, BOTTOM_RIGHT, BOTTOM_LEFT];
        let mut edges: Vec<_> = (0..4).map(|i| (ring[i], ring[(i + 1) % 4])).collect();
        edges.extend((0..4).map(|i| (ring[(i + 1) % 4], ring[i])));
        Self { edges }
    }

    pub fn of_kind(kind: GraphKind) -> Self {
        match kind {
            GraphKind::Star => Self::star(),
            GraphKind::Rectangle => Self::rectangle(),
        }
    }

    pub fn from_edges(edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(s, t) in &edges {
            if s >= NUM_KEYPOINTS || t >= NUM_KEYPOINTS || s == t {
                return Err(Error::InvalidConfig(format!("bad graph edge ({s}, {t})")));
            }
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// `(edge index, target type)` for every edge leaving `source`.
    pub fn outgoing(&self, source: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, &(s, _))| s == source)
            .map(|(e, &(_, t))| (e, t))
    }
}

/// Target-generation and loss parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeypointConfig {
    /// Disk radius in pixels.
    pub radius: f32,
    pub graph: GraphKind,
    /// Instances with fewer pixels than this get the small-instance weight.
    pub small_instance_area: usize,
    pub small_instance_weight: f32,
    /// Fraction of pixels kept by the bootstrapped cross-entropy.
    pub topk_fraction: f64,
}

impl Default for KeypointConfig {
    fn default() -> Self {
        Self {
            radius: 25.0,
            graph: GraphKind::Star,
            small_instance_area: 64 * 64,
            small_instance_weight: 3.0,
            topk_fraction: 0.15,
        }
    }
}

impl KeypointConfig {
    pub fn with_radius(radius: f32) -> Self {
        Self {
            radius,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius >= 1.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("radius must be >= 1, got {}", self.radius)));
        }
        if !(self.topk_fraction > 0.0 && self.topk_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!("topk_fraction must be in (0, 1], got {}", self.topk_fraction)));
        }
        Ok(())
    }

    pub fn dkrg(&self) -> Dkrg {
        Dkrg::of_kind(self.graph)
    }
}

/// `[center, top-left, top-right, bottom-left, bottom-right]` of a pixel set
/// given as `(row, column)` pairs.
pub fn instance_keypoints(pixels: &[(usize, usize)]) -> Result<[Point; NUM_KEYPOINTS]> {
    if pixels.is_empty() {
        return Err(Error::EmptyInstance);
    }
    let (mut sy, mut sx) = (0u64, 0u64);
    let (mut y0, mut x0, mut y1, mut x1) = (usize::MAX, usize::MAX, 0, 0);
    for &(y, x) in pixels {
        sy += y as u64;
        sx += x as u64;
        y0 = y0.min(y);
        x0 = x0.min(x);
        y1 = y1.max(y);
        x1 = x1.max(x);
    }
    let n = pixels.len() as f64;
    let p = |y: usize, x: usize| Point::new(y as f64, x as f64);
    Ok([
        Point::new(sy as f64 / n, sx as f64 / n),
        p(y0, x0),
        p(y0, x1),
        p(y1, x0),
        p(y1, x1),
    ])
}

/// Training targets for the four instance heads.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceTargetMaps {
    /// `(P, H, W)`, values in {0, 1}.
    pub heatmap: TensorMap<f32>,
    /// `(2P, H, W)`.
    pub short: TensorMap<f32>,
    /// `(2E, H, W)`.
    pub middle: TensorMap<f32>,
    /// `(2P, H, W)`.
    pub long: TensorMap<f32>,
    /// `(P, H, W)`: where short- and middle-range losses apply.
    pub disk_mask: TensorMap<u8>,
    /// `(1, H, W)`: where the long-range loss applies.
    pub instance_mask: TensorMap<u8>,
    pub graph: Dkrg,
}

impl InstanceTargetMaps {
    /// `(E, H, W)` mask for the middle-range map: each edge inherits the disk
    /// of its source keypoint.
    pub fn middle_mask(&self) -> TensorMap<u8> {
        let (h, w) = (self.heatmap.height(), self.heatmap.width());
        let mut data = Vec::with_capacity(self.graph.num_edges() * h * w);
        for &(s, _) in self.graph.edges() {
            data.extend_from_slice(self.disk_mask.channel(s));
        }
        TensorMap::new(Shape::new(self.graph.num_edges(), h, w), data).expect("sized from disk mask")
    }

    pub fn height(&self) -> usize {
        self.heatmap.height()
    }

    pub fn width(&self) -> usize {
        self.heatmap.width()
    }
}

/// Ground-truth instances with their pixels and keypoints, ascending by id.
pub fn gt_instances(gt: &PanopticMap) -> Result<Vec<(i32, Vec<(usize, usize)>, [Point; NUM_KEYPOINTS])>> {
    let w = gt.width();
    gt.instance_pixels()
        .into_iter()
        .map(|(id, idx)| {
            let pixels: Vec<_> = idx.into_iter().map(|i| (i / w, i % w)).collect();
            let kps = instance_keypoints(&pixels)?;
            Ok((id, pixels, kps))
        })
        .collect()
}

/// Builds heatmap, offset and mask targets from a ground-truth map.
///
/// Where same-type disks of several instances overlap, a pixel belongs to the
/// nearest keypoint (lowest instance id on exact ties). Pixels carrying the
/// ignore label are excluded from every mask.
pub fn generate_targets(gt: &PanopticMap, spec: &DatasetSpec, cfg: &KeypointConfig) -> Result<InstanceTargetMaps> {
    cfg.validate()?;
    gt.validate(spec)?;
    let (h, w) = (gt.height(), gt.width());
    let n = h * w;
    let graph = cfg.dkrg();
    let instances = gt_instances(gt)?;
    let ignored: Vec<bool> = gt.semantic_plane().iter().map(|&c| spec.is_ignore(c)).collect();

    let r = cfg.radius as f64;
    let r2 = r * r;
    let mut owner = vec![u32::MAX; NUM_KEYPOINTS * n];
    let mut best = vec![f64::INFINITY; NUM_KEYPOINTS * n];
    for (j, (_, _, kps)) in instances.iter().enumerate() {
        for (k, kp) in kps.iter().enumerate() {
            let ys = (kp.y - r).ceil().max(0.0) as usize;
            let ye = ((kp.y + r).floor() as usize).min(h - 1);
            let xs = (kp.x - r).ceil().max(0.0) as usize;
            let xe = ((kp.x + r).floor() as usize).min(w - 1);
            for y in ys..=ye {
                let dy = y as f64 - kp.y;
                for x in xs..=xe {
                    let dx = x as f64 - kp.x;
                    let d2 = dy * dy + dx * dx;
                    let i = y * w + x;
                    if d2 <= r2 && !ignored[i] && d2 < best[k * n + i] {
                        best[k * n + i] = d2;
                        owner[k * n + i] = j as u32;
                    }
                }
            }
        }
    }

    let mut heatmap = TensorMap::<f32>::zeros(Shape::new(NUM_KEYPOINTS, h, w));
    let mut disk_mask = TensorMap::<u8>::zeros(Shape::new(NUM_KEYPOINTS, h, w));
    let mut short = TensorMap::<f32>::zeros(Shape::new(2 * NUM_KEYPOINTS, h, w));
    let mut middle = TensorMap::<f32>::zeros(Shape::new(2 * graph.num_edges(), h, w));
    let mut long = TensorMap::<f32>::zeros(Shape::new(2 * NUM_KEYPOINTS, h, w));
    let mut instance_mask = TensorMap::<u8>::zeros(Shape::new(1, h, w));

    {
        let hm = heatmap.data_mut();
        let dm = disk_mask.data_mut();
        let sd = short.data_mut();
        let md = middle.data_mut();
        for k in 0..NUM_KEYPOINTS {
            let out_edges: Vec<_> = graph.outgoing(k).collect();
            for i in 0..n {
                let j = owner[k * n + i];
                if j == u32::MAX {
                    continue;
                }
                let kps = &instances[j as usize].2;
                let (qy, qx) = ((i / w) as f64, (i % w) as f64);
                hm[k * n + i] = 1.0;
                dm[k * n + i] = 1;
                sd[2 * k * n + i] = (kps[k].y - qy) as f32;
                sd[(2 * k + 1) * n + i] = (kps[k].x - qx) as f32;
                for &(e, t) in &out_edges {
                    md[2 * e * n + i] = (kps[t].y - qy) as f32;
                    md[(2 * e + 1) * n + i] = (kps[t].x - qx) as f32;
                }
            }
        }
    }
    {
        let ld = long.data_mut();
        let im = instance_mask.data_mut();
        for (_, pixels, kps) in &instances {
            for &(y, x) in pixels {
                let i = y * w + x;
                im[i] = 1;
                for (k, kp) in kps.iter().enumerate() {
                    ld[2 * k * n + i] = (kp.y - y as f64) as f32;
                    ld[(2 * k + 1) * n + i] = (kp.x - x as f64) as f32;
                }
            }
        }
    }

    Ok(InstanceTargetMaps {
        heatmap,
        short,
        middle,
        long,
        disk_mask,
        instance_mask,
        graph,
    })
}

/// Per-pixel semantic loss weights: `small_instance_weight` on pixels of
/// instances smaller than `small_instance_area`, 1 elsewhere.
pub fn semantic_loss_weights(gt: &PanopticMap, cfg: &KeypointConfig) -> TensorMap<f32> {
    let mut weights = TensorMap::filled(Shape::new(1, gt.height(), gt.width()), 1.0f32);
    let out = weights.data_mut();
    for pixels in gt.instance_pixels().values() {
        if pixels.len() < cfg.small_instance_area {
            for &i in pixels {
                out[i] = cfg.small_instance_weight;
            }
        }
    }
    weights
}
