//! 2x2 quadrant tiling at native resolution with annotation remapping.
//!
//! Ground-truth boxes crossing an internal cut line are dropped by default;
//! boxes touching the outer image border are kept.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{to_norm, to_px, Annotation, BBoxPx, ImageMeta, QuadrantTag};
use crate::raster::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileSpec {
    pub tag: QuadrantTag,
    pub offset_x: u32,
    pub offset_y: u32,
    pub width: u32,
    pub height: u32,
}

impl TileSpec {
    pub fn rect(&self) -> BBoxPx {
        BBoxPx {
            x_min: self.offset_x as f64,
            y_min: self.offset_y as f64,
            x_max: (self.offset_x + self.width) as f64,
            y_max: (self.offset_y + self.height) as f64,
        }
    }

    /// Metadata of the tile image, inheriting the parent's well.
    pub fn meta(&self, parent: &ImageMeta) -> ImageMeta {
        ImageMeta {
            width: self.width,
            height: self.height,
            well: parent.well.clone(),
            tile: Some(self.tag),
        }
    }
}

/// What to do with a box cut by an internal quadrant border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BorderPolicy {
    #[default]
    Drop,
    /// Keep the part of the box inside each quadrant it overlaps.
    Clip,
}

/// The four quadrants in TL, TR, BL, BR order. Both dimensions must be even.
pub fn quadrants(meta: &ImageMeta) -> Result<[TileSpec; 4]> {
    let (w, h) = (meta.width, meta.height);
    if w == 0 || h == 0 || w % 2 != 0 || h % 2 != 0 {
        return Err(Error::OddDimensions { width: w, height: h });
    }
    let (tw, th) = (w / 2, h / 2);
    Ok(QuadrantTag::ALL.map(|tag| {
        let (col, row) = match tag {
            QuadrantTag::TL => (0, 0),
            QuadrantTag::TR => (1, 0),
            QuadrantTag::BL => (0, 1),
            QuadrantTag::BR => (1, 1),
        };
        TileSpec {
            tag,
            offset_x: col * tw,
            offset_y: row * th,
            width: tw,
            height: th,
        }
    }))
}

/// Where a full-image pixel box ends up after cutting at the midlines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Inside(QuadrantTag),
    Straddles,
}

/// Locates `b` relative to the cut lines at `W/2` and `H/2`. Edges within
/// `1e-6 * dimension` of a cut count as touching it, which absorbs the
/// quantization of normalized coordinates.
pub fn locate(b: &BBoxPx, meta: &ImageMeta) -> Placement {
    let side = |lo: f64, hi: f64, dim: u32| -> Option<u32> {
        let cut = dim as f64 / 2.0;
        let tol = 1e-6 * dim as f64;
        if hi <= cut + tol {
            Some(0)
        } else if lo >= cut - tol {
            Some(1)
        } else {
            None
        }
    };
    match (side(b.x_min, b.x_max, meta.width), side(b.y_min, b.y_max, meta.height)) {
        (Some(0), Some(0)) => Placement::Inside(QuadrantTag::TL),
        (Some(_), Some(0)) => Placement::Inside(QuadrantTag::TR),
        (Some(0), Some(_)) => Placement::Inside(QuadrantTag::BL),
        (Some(_), Some(_)) => Placement::Inside(QuadrantTag::BR),
        _ => Placement::Straddles,
    }
}

fn to_tile_local(b: &BBoxPx, tile: &TileSpec, parent: &ImageMeta) -> Result<crate::geom::NormBBox> {
    let local = b
        .translate(-(tile.offset_x as f64), -(tile.offset_y as f64))
        .clamp_to(tile.width as f64, tile.height as f64);
    to_norm(&local, &tile.meta(parent))
}

/// Annotations of the full image expressed in `tile` coordinates.
///
/// Under [`BorderPolicy::Drop`] a box is kept iff it lies wholly inside the
/// tile; the second value counts boxes that overlap this tile but cross a cut
/// line. Boxes entirely in other tiles are ignored.
pub fn remap_annotations(
    annos: &[Annotation],
    meta: &ImageMeta,
    tile: &TileSpec,
    policy: BorderPolicy,
) -> Result<(Vec<Annotation>, usize)> {
    let rect = tile.rect();
    let mut kept = Vec::new();
    let mut dropped = 0;
    for a in annos {
        let b = to_px(&a.bbox, meta)?;
        match locate(&b, meta) {
            Placement::Inside(tag) if tag == tile.tag => kept.push(Annotation {
                class_id: a.class_id,
                bbox: to_tile_local(&b, tile, meta)?,
            }),
            Placement::Inside(_) => {}
            Placement::Straddles => {
                let Some(part) = b.intersection(&rect) else {
                    continue;
                };
                match policy {
                    BorderPolicy::Drop => dropped += 1,
                    BorderPolicy::Clip => kept.push(Annotation {
                        class_id: a.class_id,
                        bbox: to_tile_local(&part, tile, meta)?,
                    }),
                }
            }
        }
    }
    Ok((kept, dropped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiledAnnotations {
    pub tiles: [(TileSpec, Vec<Annotation>); 4],
    /// Boxes crossing a cut line, each counted once.
    pub straddling: usize,
}

impl TiledAnnotations {
    pub fn kept(&self) -> usize {
        self.tiles.iter().map(|(_, a)| a.len()).sum()
    }
}

/// Tiles a whole annotation set in one pass.
pub fn tile_annotations(annos: &[Annotation], meta: &ImageMeta, policy: BorderPolicy) -> Result<TiledAnnotations> {
    let specs = quadrants(meta)?;
    let mut tiles: [(TileSpec, Vec<Annotation>); 4] = specs.map(|s| (s, Vec::new()));
    let mut straddling = 0;
    for a in annos {
        let b = to_px(&a.bbox, meta)?;
        match locate(&b, meta) {
            Placement::Inside(tag) => {
                let (spec, list) = &mut tiles[tag.index()];
                list.push(Annotation {
                    class_id: a.class_id,
                    bbox: to_tile_local(&b, spec, meta)?,
                });
            }
            Placement::Straddles => {
                straddling += 1;
                if policy == BorderPolicy::Clip {
                    for (spec, list) in tiles.iter_mut() {
                        if let Some(part) = b.intersection(&spec.rect()) {
                            list.push(Annotation {
                                class_id: a.class_id,
                                bbox: to_tile_local(&part, spec, meta)?,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(TiledAnnotations { tiles, straddling })
}

/// Pixel-exact copy of a tile region.
pub fn crop<P: Copy>(img: &Plane<P>, tile: &TileSpec) -> Result<Plane<P>> {
    img.region(tile.offset_x, tile.offset_y, tile.width, tile.height)
        .ok_or(Error::TileOutOfBounds {
            tag: tile.tag,
            x: tile.offset_x,
            y: tile.offset_y,
            width: tile.width,
            height: tile.height,
            image_width: img.width(),
            image_height: img.height(),
        })
}
