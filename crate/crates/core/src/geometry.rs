use serde::{Deserialize, Serialize};

/// Sub-pixel image position in `(row, column)` order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub y: f64,
    pub x: f64,
}

impl Point {
    pub const fn new(y: f64, x: f64) -> Self {
        Self { y, x }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let (dy, dx) = (self.y - other.y, self.x - other.x);
        dy * dy + dx * dx
    }

    /// Clamps into `[0, height-1] × [0, width-1]`.
    pub fn clamp_to(&self, height: usize, width: usize) -> Point {
        Point::new(
            self.y.clamp(0.0, height.saturating_sub(1) as f64),
            self.x.clamp(0.0, width.saturating_sub(1) as f64),
        )
    }

    /// Nearest pixel after clamping into the image.
    pub fn nearest_pixel(&self, height: usize, width: usize) -> (usize, usize) {
        let p = self.clamp_to(height, width);
        (p.y.round() as usize, p.x.round() as usize)
    }
}

/// Axis-aligned box spanned by two corner points, `top_left ≤ bottom_right`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub y0: f64,
    pub x0: f64,
    pub y1: f64,
    pub x1: f64,
}

impl BBox {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut b = BBox {
            y0: f64::INFINITY,
            x0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
            x1: f64::NEG_INFINITY,
        };
        for p in points {
            b.y0 = b.y0.min(p.y);
            b.x0 = b.x0.min(p.x);
            b.y1 = b.y1.max(p.y);
            b.x1 = b.x1.max(p.x);
        }
        b
    }

    pub fn area(&self) -> f64 {
        (self.y1 - self.y0).max(0.0) * (self.x1 - self.x0).max(0.0)
    }

    /// Intersection over union. Identical boxes give 1; otherwise a box with
    /// zero area overlaps nothing.
    pub fn iou(&self, other: &BBox) -> f64 {
        if self == other {
            return 1.0;
        }
        let (a, b) = (self.area(), other.area());
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        let ih = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        let iw = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let inter = ih * iw;
        inter / (a + b - inter)
    }
}
