//! Pure, allocation-only building blocks of a microscopy detection pipeline:
//! box geometry, channel compositing, instance-mask import, quadrant tiling,
//! darknet labels, stratified splits, detection evaluation and a synthetic
//! plate generator with a mock detector.
//!
//! Builds without `std` (`default-features = false`); IO and file formats
//! live in the companion `cellquad` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod classes;
pub mod error;
pub mod eval;
pub mod geom;
pub mod labels;
pub mod maskimport;
pub mod raster;
pub mod record;
pub mod rng;
pub mod split;
pub mod synth;
pub mod tiler;

pub use classes::ClassSet;
pub use error::{Error, Result};
pub use geom::{iou, to_norm, to_px, Annotation, BBoxPx, Detection, ImageMeta, NormBBox, QuadrantTag, WellKey};
pub use record::PlateRecord;
