use rayon::prelude::*;

use super::{Instance, InstancePredictionMaps, MapsView};
use crate::targets::NUM_KEYPOINTS;
use crate::tensor::{Shape, TensorMap};

/// Grid cell edge in pixels for the instance lookup.
const CELL: f64 = 16.0;
/// Guards the pruning bound against rounding in the distance sums.
const SLACK: f64 = 0.05;

/// Instance id per pixel.
///
/// Pixel `q` predicts keypoints `q + long_k(q)`; it joins the instance `j`
/// minimizing `Σ_k ‖(q + long_k(q)) − keypoint_k(j)‖`, ties toward the lower
/// id. Ids are 1-based in list order; with no instances every pixel gets 0.
///
/// The result is exactly the brute-force argmin. Candidates are pruned with
/// the bound `Σ_k ‖a_k − b_k‖ ≥ 5‖mean(a) − mean(b)‖`, so the per-pixel work
/// stays nearly constant as the instance count grows.
pub fn assign_pixels(instances: &[Instance], maps: &InstancePredictionMaps) -> TensorMap<i32> {
    assign(instances, maps.view(), None)
}

pub(crate) fn assign(instances: &[Instance], v: MapsView<'_>, mask: Option<&[bool]>) -> TensorMap<i32> {
    let (h, w) = (v.height(), v.width());
    let mut out = TensorMap::zeros(Shape::new(1, h, w));
    if instances.is_empty() || h == 0 || w == 0 {
        return out;
    }
    let index = Index::new(instances, h, w);
    let n = h * w;
    let long = v.long.data();
    out.data_mut().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut prev: Option<usize> = None;
        for (x, slot) in row.iter_mut().enumerate() {
            let i = y * w + x;
            if mask.is_some_and(|m| !m[i]) {
                continue;
            }
            let pred: [(f64, f64); NUM_KEYPOINTS] = std::array::from_fn(|k| {
                (y as f64 + long[2 * k * n + i] as f64, x as f64 + long[(2 * k + 1) * n + i] as f64)
            });
            let best = index.nearest(&pred, prev);
            prev = Some(best);
            *slot = best as i32 + 1;
        }
    });
    out
}

struct Index {
    kps: Vec<[(f64, f64); NUM_KEYPOINTS]>,
    grid: Vec<Vec<u32>>,
    gh: usize,
    gw: usize,
}

impl Index {
    fn new(instances: &[Instance], h: usize, w: usize) -> Self {
        let kps: Vec<_> = instances
            .iter()
            .map(|inst| std::array::from_fn(|k| (inst.keypoints[k].position.y, inst.keypoints[k].position.x)))
            .collect();
        let gh = (h as f64 / CELL).ceil() as usize;
        let gw = (w as f64 / CELL).ceil() as usize;
        let mut grid = vec![Vec::new(); gh * gw];
        for (j, kp) in kps.iter().enumerate() {
            let (cy, cx) = Self::cell(mean(kp), gh, gw);
            grid[cy * gw + cx].push(j as u32);
        }
        Self { kps, grid, gh, gw }
    }

    fn cell((y, x): (f64, f64), gh: usize, gw: usize) -> (usize, usize) {
        let c = |v: f64, n: usize| ((v / CELL).floor().max(0.0) as usize).min(n - 1);
        (c(y, gh), c(x, gw))
    }

    fn cost(&self, j: usize, pred: &[(f64, f64); NUM_KEYPOINTS]) -> f64 {
        let kp = &self.kps[j];
        let mut s = 0.0;
        for k in 0..NUM_KEYPOINTS {
            let (dy, dx) = (pred[k].0 - kp[k].0, pred[k].1 - kp[k].1);
            s += (dy * dy + dx * dx).sqrt();
        }
        s
    }

    fn nearest(&self, pred: &[(f64, f64); NUM_KEYPOINTS], hint: Option<usize>) -> usize {
        let m = mean(pred);
        let seed = hint.unwrap_or_else(|| {
            let (cy, cx) = Self::cell(m, self.gh, self.gw);
            self.grid[cy * self.gw + cx].first().map_or(0, |&j| j as usize)
        });
        let mut best = (self.cost(seed, pred), seed);
        // Any instance beating `best` has its keypoint mean within this radius of `m`.
        let r = best.0 / NUM_KEYPOINTS as f64 + SLACK;
        let lo = |v: f64| ((v - r) / CELL).floor();
        let hi = |v: f64| ((v + r) / CELL).floor();
        // Clamped like `cell`, so means outside the image are still found.
        let gy = self.gh as f64 - 1.0;
        let gx = self.gw as f64 - 1.0;
        let (y0, y1) = (lo(m.0).clamp(0.0, gy), hi(m.0).clamp(0.0, gy));
        let (x0, x1) = (lo(m.1).clamp(0.0, gx), hi(m.1).clamp(0.0, gx));
        let cells = (y1 - y0 + 1.0) * (x1 - x0 + 1.0);
        let mut consider = |j: usize| {
            if j != best.1 {
                let c = self.cost(j, pred);
                if c < best.0 || (c == best.0 && j < best.1) {
                    best = (c, j);
                }
            }
        };
        if cells > self.kps.len() as f64 {
            (0..self.kps.len()).for_each(&mut consider);
        } else {
            for cy in y0 as usize..=y1 as usize {
                for cx in x0 as usize..=x1 as usize {
                    for &j in &self.grid[cy * self.gw + cx] {
                        consider(j as usize);
                    }
                }
            }
        }
        best.1
    }
}

fn mean(p: &[(f64, f64); NUM_KEYPOINTS]) -> (f64, f64) {
    let (sy, sx) = p.iter().fold((0.0, 0.0), |(a, b), &(y, x)| (a + y, b + x));
    (sy / NUM_KEYPOINTS as f64, sx / NUM_KEYPOINTS as f64)
}
