//! Boxes in pixel and normalized space, plus the image and quadrant metadata
//! every stage passes around.
//!
//! Pixel coordinates are continuous with the origin at the top-left corner and
//! y pointing down. A `W x H` image spans the half-open area `[0, W) x [0, H)`,
//! so a box covering the whole frame is `(0, 0, W, H)`.

use alloc::string::String;
use core::fmt;

use crate::error::{Error, Result};

/// Slack allowed on normalized box edges. Absorbs the 6-decimal quantization
/// of label files.
pub const NORM_EPS: f64 = 1e-6;

/// One of the four native-resolution quadrants of a full image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QuadrantTag {
    TL,
    TR,
    BL,
    BR,
}

impl QuadrantTag {
    pub const ALL: [QuadrantTag; 4] = [QuadrantTag::TL, QuadrantTag::TR, QuadrantTag::BL, QuadrantTag::BR];

    pub fn as_str(self) -> &'static str {
        match self {
            QuadrantTag::TL => "TL",
            QuadrantTag::TR => "TR",
            QuadrantTag::BL => "BL",
            QuadrantTag::BR => "BR",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for QuadrantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifies the well an image came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WellKey {
    pub plate_id: u32,
    pub well: String,
}

impl WellKey {
    pub fn new(plate_id: u32, well: impl Into<String>) -> Self {
        Self {
            plate_id,
            well: well.into(),
        }
    }
}

impl fmt::Display for WellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "plate{}_{}", self.plate_id, self.well)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageMeta {
    pub width: u32,
    pub height: u32,
    pub well: Option<WellKey>,
    pub tile: Option<QuadrantTag>,
}

impl ImageMeta {
    /// Geometry-only metadata, not tied to any well.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyDimensions { width, height });
        }
        Ok(Self {
            width,
            height,
            well: None,
            tile: None,
        })
    }

    pub fn with_well(mut self, well: WellKey) -> Self {
        self.well = Some(well);
        self
    }

    pub fn with_tile(mut self, tile: QuadrantTag) -> Self {
        self.tile = Some(tile);
        self
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    /// Full-frame box in pixel space.
    pub fn frame(&self) -> BBoxPx {
        BBoxPx {
            x_min: 0.0,
            y_min: 0.0,
            x_max: self.width as f64,
            y_max: self.height as f64,
        }
    }
}

/// Axis-aligned box in pixel space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBoxPx {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBoxPx {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if !b.is_valid() {
            return Err(Error::InvalidBox("requires x_min < x_max and y_min < y_max"));
        }
        Ok(b)
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        if self.is_valid() {
            self.width() * self.height()
        } else {
            0.0
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Clamps every edge into `[0, width] x [0, height]`. May yield an
    /// invalid box if `self` lies entirely outside.
    pub fn clamp_to(&self, width: f64, height: f64) -> Self {
        Self {
            x_min: self.x_min.clamp(0.0, width),
            y_min: self.y_min.clamp(0.0, height),
            x_max: self.x_max.clamp(0.0, width),
            y_max: self.y_max.clamp(0.0, height),
        }
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let b = Self {
            x_min: self.x_min.max(other.x_min),
            y_min: self.y_min.max(other.y_min),
            x_max: self.x_max.min(other.x_max),
            y_max: self.y_max.min(other.y_max),
        };
        b.is_valid().then_some(b)
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }
}

/// Intersection over union. Disjoint or touching boxes give 0.
pub fn iou(a: &BBoxPx, b: &BBoxPx) -> f64 {
    let inter = match a.intersection(b) {
        Some(i) => i.area(),
        None => return 0.0,
    };
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Box as center and size, each a fraction of the image width or height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

impl NormBBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox("non-finite component"));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox("degenerate: w or h <= 0"));
        }
        if w > 1.0 + NORM_EPS || h > 1.0 + NORM_EPS {
            return Err(Error::InvalidBox("w or h exceeds 1"));
        }
        let inside = |c: f64, s: f64| c - s / 2.0 >= -NORM_EPS && c + s / 2.0 <= 1.0 + NORM_EPS;
        if !inside(cx, w) || !inside(cy, h) {
            return Err(Error::InvalidBox("edge outside the unit square"));
        }
        Ok(Self { cx, cy, w, h })
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Corners in the unit square, unclamped.
    pub fn corners(&self) -> BBoxPx {
        BBoxPx {
            x_min: self.cx - self.w / 2.0,
            y_min: self.cy - self.h / 2.0,
            x_max: self.cx + self.w / 2.0,
            y_max: self.cy + self.h / 2.0,
        }
    }

    /// IoU computed directly on normalized corners. IoU is invariant under
    /// per-axis scaling, so this agrees with the pixel-space value.
    pub fn iou(&self, other: &NormBBox) -> f64 {
        iou(&self.corners(), &other.corners())
    }
}

/// Pixel box to normalized box. The box must lie inside the image.
pub fn to_norm(b: &BBoxPx, meta: &ImageMeta) -> Result<NormBBox> {
    if !b.is_valid() {
        return Err(Error::InvalidBox("requires x_min < x_max and y_min < y_max"));
    }
    let (w, h) = (meta.width as f64, meta.height as f64);
    let checks = [
        ("x_min", b.x_min, w),
        ("y_min", b.y_min, h),
        ("x_max", b.x_max, w),
        ("y_max", b.y_max, h),
    ];
    for (coord, value, limit) in checks {
        if !(0.0..=limit).contains(&value) {
            return Err(Error::BoxOutOfBounds { coord, value, limit });
        }
    }
    NormBBox::new(
        (b.x_min + b.x_max) / (2.0 * w),
        (b.y_min + b.y_max) / (2.0 * h),
        (b.x_max - b.x_min) / w,
        (b.y_max - b.y_min) / h,
    )
}

/// Normalized box to pixel box, clamped to the image.
pub fn to_px(b: &NormBBox, meta: &ImageMeta) -> Result<BBoxPx> {
    let (w, h) = (meta.width as f64, meta.height as f64);
    let out = BBoxPx {
        x_min: (b.cx - b.w / 2.0) * w,
        y_min: (b.cy - b.h / 2.0) * h,
        x_max: (b.cx + b.w / 2.0) * w,
        y_max: (b.cy + b.h / 2.0) * h,
    }
    .clamp_to(w, h);
    if !out.is_valid() {
        return Err(Error::InvalidBox("degenerate after clamping"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annotation {
    pub class_id: usize,
    pub bbox: NormBBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub class_id: usize,
    pub bbox: NormBBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(class_id: usize, bbox: NormBBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::ConfidenceOutOfRange(confidence));
        }
        Ok(Self {
            class_id,
            bbox,
            confidence,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta(w: u32, h: u32) -> ImageMeta {
        ImageMeta::new(w, h).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn full_frame_normalizes_to_unit() {
        let n = to_norm(&BBoxPx::new(0.0, 0.0, 1344.0, 1024.0).unwrap(), &meta(1344, 1024)).unwrap();
        assert_eq!((n.cx(), n.cy(), n.w(), n.h()), (0.5, 0.5, 1.0, 1.0));
    }

    #[test]
    fn quadrant_box_normalizes_to_quarter() {
        let n = to_norm(&BBoxPx::new(0.0, 0.0, 672.0, 512.0).unwrap(), &meta(1344, 1024)).unwrap();
        assert_eq!((n.cx(), n.cy(), n.w(), n.h()), (0.25, 0.25, 0.5, 0.5));
    }

    #[test]
    fn cell_box_normalizes() {
        // cx = 697/1344, cy = 537/1024, w = 75/672, h = 75/512
        let n = to_norm(&BBoxPx::new(311.0, 231.0, 386.0, 306.0).unwrap(), &meta(672, 512)).unwrap();
        assert!(close(n.cx(), 0.518601, 1e-6));
        assert!(close(n.cy(), 0.524414, 1e-6));
        assert!(close(n.w(), 0.111607, 1e-6));
        assert!(close(n.h(), 0.146484, 1e-6));
    }

    #[test]
    fn out_of_bounds_names_coordinate() {
        let err = to_norm(&BBoxPx::new(10.0, 0.0, 700.0, 20.0).unwrap(), &meta(672, 512)).unwrap_err();
        assert!(matches!(err, Error::BoxOutOfBounds { coord: "x_max", .. }));
    }

    #[test]
    fn to_px_examples() {
        let b = to_px(&NormBBox::new(0.5, 0.5, 1.0, 1.0).unwrap(), &meta(100, 100)).unwrap();
        assert_eq!(b, BBoxPx::new(0.0, 0.0, 100.0, 100.0).unwrap());

        let b = to_px(&NormBBox::new(0.5, 0.5, 0.074405, 0.078125).unwrap(), &meta(672, 512)).unwrap();
        assert!(close(b.x_min, 311.0, 672e-6));
        assert!(close(b.y_min, 236.0, 512e-6));
        assert!(close(b.x_max, 361.0, 672e-6));
        assert!(close(b.y_max, 276.0, 512e-6));
    }

    #[test]
    fn degenerate_norm_box_rejected() {
        assert!(NormBBox::new(0.5, 0.5, 0.0, 0.1).is_err());
        assert!(NormBBox::new(0.5, 0.5, 0.1, -0.1).is_err());
        assert!(NormBBox::new(0.99, 0.5, 0.1, 0.1).is_err());
        assert!(NormBBox::new(f64::NAN, 0.5, 0.1, 0.1).is_err());
    }

    #[test]
    fn iou_examples() {
        let a = BBoxPx::new(10.0, 10.0, 20.0, 20.0).unwrap();
        assert_eq!(iou(&a, &a), 1.0);
        let a = BBoxPx::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = BBoxPx::new(1.0, 1.0, 3.0, 3.0).unwrap();
        assert!(close(iou(&a, &b), 1.0 / 7.0, 1e-15));
        let a = BBoxPx::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = BBoxPx::new(5.0, 5.0, 6.0, 6.0).unwrap();
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn confidence_range_checked() {
        let b = NormBBox::new(0.5, 0.5, 0.1, 0.1).unwrap();
        assert!(Detection::new(0, b, 1.2).is_err());
        assert!(Detection::new(0, b, -0.01).is_err());
        assert!(Detection::new(0, b, 1.0).is_ok());
    }

    fn px_box(w: u32, h: u32) -> impl Strategy<Value = BBoxPx> {
        let (w, h) = (w as f64, h as f64);
        (0.0..w - 1.0, 0.0..h - 1.0, 0.001f64..1.0, 0.001f64..1.0).prop_map(move |(x, y, fw, fh)| {
            let x_max = x + (w - x) * fw;
            let y_max = y + (h - y) * fh;
            BBoxPx::new(x, y, x_max.max(x + 1e-3), y_max.max(y + 1e-3)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn norm_round_trip(b in px_box(1344, 1024)) {
            let m = meta(1344, 1024);
            let back = to_px(&to_norm(&b, &m).unwrap(), &m).unwrap();
            prop_assert!(close(back.x_min, b.x_min, 1e-6 * 1344.0));
            prop_assert!(close(back.x_max, b.x_max, 1e-6 * 1344.0));
            prop_assert!(close(back.y_min, b.y_min, 1e-6 * 1024.0));
            prop_assert!(close(back.y_max, b.y_max, 1e-6 * 1024.0));
        }

        #[test]
        fn iou_properties(a in px_box(200, 200), b in px_box(200, 200)) {
            let ab = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert_eq!(iou(&a, &a), 1.0);
            prop_assert_eq!(ab == 0.0, a.intersection(&b).is_none());
        }
    }
}
