//! Ground-truth boxes from an external instance segmentation of the bright
//! field channel.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::Result;
use crate::geom::{to_norm, Annotation, BBoxPx, ImageMeta};
use crate::raster::Plane;

/// Pixel value = instance id, 0 = background. Ids need not be contiguous.
pub type InstanceMask = Plane<u32>;

pub const DEFAULT_MARGIN_FRAC: f64 = 0.02;
pub const DEFAULT_MIN_AREA_PX: u64 = 9;
pub const DEFAULT_MAX_AREA_FRAC: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBox {
    pub instance_id: u32,
    pub bbox: BBoxPx,
    pub area_px: u64,
}

/// One tight box per distinct nonzero label, sorted by instance id.
///
/// Instances are identified by label value alone: disconnected pixels that
/// share a label produce a single box.
pub fn instances_to_boxes(mask: &InstanceMask) -> Vec<CellBox> {
    // (min_x, min_y, max_x, max_y, count)
    let mut acc: BTreeMap<u32, (u32, u32, u32, u32, u64)> = BTreeMap::new();
    for y in 0..mask.height() {
        let row = mask.row(y);
        let mut x = 0usize;
        while x < row.len() {
            let label = row[x];
            if label == 0 {
                x += 1;
                continue;
            }
            // consume the run of equal labels in one map lookup
            let start = x;
            while x < row.len() && row[x] == label {
                x += 1;
            }
            let (x0, x1) = (start as u32, (x - 1) as u32);
            let e = acc.entry(label).or_insert((x0, y, x1, y, 0));
            e.0 = e.0.min(x0);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x1);
            e.3 = e.3.max(y);
            e.4 += (x - start) as u64;
        }
    }
    acc.into_iter()
        .map(|(instance_id, (x0, y0, x1, y1, n))| CellBox {
            instance_id,
            bbox: BBoxPx {
                x_min: x0 as f64,
                y_min: y0 as f64,
                x_max: x1 as f64 + 1.0,
                y_max: y1 as f64 + 1.0,
            },
            area_px: n,
        })
        .collect()
}

/// Grows width and height by `margin_frac` (half on each side) about the
/// center, then clamps to the image.
pub fn expand_box(b: &BBoxPx, margin_frac: f64, bounds: &ImageMeta) -> BBoxPx {
    let margin_frac = margin_frac.max(0.0);
    let dx = b.width() * margin_frac / 2.0;
    let dy = b.height() * margin_frac / 2.0;
    BBoxPx {
        x_min: b.x_min - dx,
        y_min: b.y_min - dy,
        x_max: b.x_max + dx,
        y_max: b.y_max + dy,
    }
    .clamp_to(bounds.width as f64, bounds.height as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub too_small: usize,
    pub too_large: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.too_small + self.too_large
    }
}

/// Drops segmentation debris (fewer than `min_area_px` pixels) and boxes
/// covering more than `max_area_frac` of the image. A box failing both tests
/// is counted as too small.
pub fn filter_boxes(
    boxes: &[CellBox],
    min_area_px: u64,
    max_area_frac: f64,
    meta: &ImageMeta,
) -> (Vec<CellBox>, DropCounts) {
    let max_area = max_area_frac * meta.area();
    let mut drops = DropCounts::default();
    let kept = boxes
        .iter()
        .filter(|c| {
            if c.area_px < min_area_px {
                drops.too_small += 1;
                false
            } else if c.bbox.area() > max_area {
                drops.too_large += 1;
                false
            } else {
                true
            }
        })
        .copied()
        .collect();
    (kept, drops)
}

/// Every box gets the plate-level class: labels are weak, inherited from the
/// well rather than assigned per cell.
pub fn boxes_to_annotations(boxes: &[CellBox], class_id: usize, meta: &ImageMeta) -> Result<Vec<Annotation>> {
    boxes
        .iter()
        .map(|c| {
            Ok(Annotation {
                class_id,
                bbox: to_norm(&c.bbox, meta)?,
            })
        })
        .collect()
}

/// Thresholds for turning a mask into annotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskImportParams {
    pub margin_frac: f64,
    pub min_area_px: u64,
    pub max_area_frac: f64,
}

impl Default for MaskImportParams {
    fn default() -> Self {
        Self {
            margin_frac: DEFAULT_MARGIN_FRAC,
            min_area_px: DEFAULT_MIN_AREA_PX,
            max_area_frac: DEFAULT_MAX_AREA_FRAC,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskImport {
    pub annotations: Vec<Annotation>,
    pub instances: usize,
    pub dropped: DropCounts,
}

/// The whole chain: boxes, filter, expand, normalize.
pub fn import_mask(mask: &InstanceMask, class_id: usize, meta: &ImageMeta, params: &MaskImportParams) -> Result<MaskImport> {
    let boxes = instances_to_boxes(mask);
    let (kept, dropped) = filter_boxes(&boxes, params.min_area_px, params.max_area_frac, meta);
    let expanded: Vec<CellBox> = kept
        .iter()
        .map(|c| CellBox {
            bbox: expand_box(&c.bbox, params.margin_frac, meta),
            ..*c
        })
        .collect();
    Ok(MaskImport {
        annotations: boxes_to_annotations(&expanded, class_id, meta)?,
        instances: boxes.len(),
        dropped,
    })
}
