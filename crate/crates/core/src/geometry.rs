//! Axis-aligned boxes in continuous pixel coordinates.
//!
//! Boxes are half-open: `(x1, y1, x2, y2)` covers `[x1, x2) × [y1, y2)` and
//! has area `(x2 - x1) * (y2 - y1)`. Pixel `(px, py)` occupies the unit
//! square starting at `(px, py)`, so an integer box `(10, 10, 30, 30)`
//! contains pixels 10..30 on each axis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid(format!(
                "box ({x1}, {y1}, {x2}, {y2}) has non-finite coordinates"
            )));
        }
        if x1 < 0.0 || y1 < 0.0 {
            return Err(Error::invalid(format!(
                "box ({x1}, {y1}, {x2}, {y2}) has negative coordinates"
            )));
        }
        if !(x1 < x2 && y1 < y2) {
            return Err(Error::invalid(format!(
                "box ({x1}, {y1}, {x2}, {y2}) is empty"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Tight box around an inclusive range of pixel indices.
    pub fn from_pixel_extent(min_x: u32, min_y: u32, max_x: u32, max_y: u32) -> Self {
        debug_assert!(min_x <= max_x && min_y <= max_y);
        Self {
            x1: min_x as f64,
            y1: min_y as f64,
            x2: max_x as f64 + 1.0,
            y2: max_y as f64 + 1.0,
        }
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Whether the center of pixel `(px, py)` lies in the box, edges included.
    pub fn contains_pixel(&self, px: u32, py: u32) -> bool {
        let cx = px as f64 + 0.5;
        let cy = py as f64 + 0.5;
        self.x1 <= cx && cx <= self.x2 && self.y1 <= cy && cy <= self.y2
    }

    /// Whether the pixel's center falls in the half-open interior. This is the
    /// membership rule used when counting an object's pixels.
    pub fn covers_pixel(&self, px: u32, py: u32) -> bool {
        let cx = px as f64 + 0.5;
        let cy = py as f64 + 0.5;
        self.x1 <= cx && cx < self.x2 && self.y1 <= cy && cy < self.y2
    }

    /// Inclusive pixel index range `(x0, y0, x1, y1)` of pixels whose centers
    /// are covered, clipped to a `width × height` raster. `None` if empty.
    pub fn pixel_span(&self, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
        // pixel p is covered iff x1 <= p + 0.5 < x2
        let lo = |a: f64| (a - 0.5).ceil().max(0.0);
        let hi = |b: f64, limit: u32| ((b - 0.5).ceil() - 1.0).min(limit as f64 - 1.0);
        let (x0, y0) = (lo(self.x1), lo(self.y1));
        let (xe, ye) = (hi(self.x2, width), hi(self.y2, height));
        if xe < x0 || ye < y0 {
            return None;
        }
        Some((x0 as u32, y0 as u32, xe as u32, ye as u32))
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl FromStr for BBox {
    type Err = Error;

    /// Parses `x1,y1,x2,y2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("box {s:?}: {e}")))?;
        match parts[..] {
            [x1, y1, x2, y2] => BBox::new(x1, y1, x2, y2),
            _ => Err(Error::invalid(format!(
                "box {s:?} must have exactly four comma-separated values"
            ))),
        }
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    /// Counts unit sub-cells at resolution `res` inside each box.
    fn grid_iou(a: &BBox, b: &BBox, res: f64) -> f64 {
        let extent = a.x2().max(b.x2()).max(a.y2()).max(b.y2());
        let n = (extent * res).ceil() as usize;
        let (mut inter, mut union) = (0usize, 0usize);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = ((i as f64 + 0.5) / res, (j as f64 + 0.5) / res);
                let ina = a.x1() <= x && x < a.x2() && a.y1() <= y && y < a.y2();
                let inb = b.x1() <= x && x < b.x2() && b.y1() <= y && y < b.y2();
                inter += (ina && inb) as usize;
                union += (ina || inb) as usize;
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&b(0., 0., 4., 4.), &b(0., 0., 4., 4.)), 1.0);
        assert_eq!(iou(&b(0., 0., 1., 1.), &b(2., 2., 3., 3.)), 0.0);
        let oracle = grid_iou(&b(0., 0., 2., 2.), &b(1., 1., 3., 3.), 4.0);
        assert!((oracle - 1.0 / 7.0).abs() < 1e-12);
        assert!((iou(&b(0., 0., 2., 2.), &b(1., 1., 3., 3.)) - oracle).abs() < 1e-12);
    }

    #[test]
    fn touching_boxes_do_not_overlap() {
        assert_eq!(iou(&b(0., 0., 2., 2.), &b(2., 0., 4., 2.)), 0.0);
    }

    #[test]
    fn invalid_boxes_rejected() {
        assert!(BBox::new(2.0, 0.0, 2.0, 1.0).is_err());
        assert!(BBox::new(-1.0, 0.0, 2.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
        assert!("1,2,3".parse::<BBox>().is_err());
        assert_eq!("1, 2,3,4".parse::<BBox>().unwrap(), b(1., 2., 3., 4.));
    }

    #[test]
    fn serde_rejects_invalid_box() {
        assert!(serde_json::from_str::<BBox>("[0,0,1,1]").is_ok());
        assert!(serde_json::from_str::<BBox>("[3,0,1,1]").is_err());
    }

    #[test]
    fn pixel_span_matches_covers() {
        let bx = b(2.3, 1.0, 7.6, 4.5);
        let (x0, y0, x1, y1) = bx.pixel_span(20, 20).unwrap();
        for y in 0..20 {
            for x in 0..20 {
                let inside = x >= x0 && x <= x1 && y >= y0 && y <= y1;
                assert_eq!(inside, bx.covers_pixel(x, y), "pixel ({x},{y})");
            }
        }
        assert_eq!(b(30., 30., 40., 40.).pixel_span(20, 20), None);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..50.0f64, 0.0..50.0f64, 0.01..30.0f64, 0.01..30.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let ab = iou(&a, &c);
            prop_assert_eq!(ab, iou(&c, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_self_is_one(a in arb_box()) {
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }
    }
}
