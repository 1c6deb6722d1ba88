use alloc::string::String;

use crate::geom::QuadrantTag;

/// Everything that can go wrong inside the pure pipeline stages.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("box coordinate {coord}={value} outside [0, {limit}]")]
    BoxOutOfBounds {
        coord: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("invalid box: {0}")]
    InvalidBox(&'static str),
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("class id {class_id} out of range for {class_count} classes")]
    ClassOutOfRange { class_id: usize, class_count: usize },
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("class set must not be empty")]
    EmptyClassSet,
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
    #[error("invalid class name {0:?}")]
    InvalidClassName(String),
    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: u32,
        left_height: u32,
        right_width: u32,
        right_height: u32,
    },
    #[error("sample buffer holds {found} values, expected {expected}")]
    SampleCount { expected: usize, found: usize },
    #[error("image is empty")]
    EmptyImage,
    #[error("percentiles must satisfy 0 <= low < high <= 100, got ({low}, {high})")]
    InvalidPercentiles { low: f64, high: f64 },
    #[error("cannot split {width}x{height} into quadrants: dimensions must be even")]
    OddDimensions { width: u32, height: u32 },
    #[error("tile {tag:?} at ({x}, {y}) size {width}x{height} exceeds {image_width}x{image_height} image")]
    TileOutOfBounds {
        tag: QuadrantTag,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
        image_width: u32,
        image_height: u32,
    },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("fold index {index} out of range for {k} folds")]
    FoldIndexOutOfRange { index: usize, k: usize },
    #[error("class {class:?} has {count} records, fewer than {k} folds")]
    ClassTooSmall { class: String, count: usize, k: usize },
    #[error("class {class:?} has no training records left after the validation split")]
    EmptyClassAfterSplit { class: String },
    #[error("fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("record plate {plate} well {well} is not assigned to any fold")]
    UnassignedRecord { plate: u32, well: String },
    #[error("class {0:?} is not present in the class set")]
    UnknownClass(String),
    #[error("line {line}: {kind}")]
    LabelLine { line: usize, kind: LabelErrorKind },
    #[error("placed only {placed} of {requested} cells; lower the density or relax the overlap limit")]
    PlacementFailed { placed: usize, requested: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("class sets differ: {0}")]
    ClassSetMismatch(String),
}

/// Reason a darknet label line was rejected.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabelErrorKind {
    #[error("expected 5 fields, found {0}")]
    FieldCount(usize),
    #[error("cannot parse field {field} ({text:?})")]
    Parse { field: usize, text: String },
    #[error("class id {class_id} out of range for {class_count} classes")]
    ClassRange { class_id: usize, class_count: usize },
    #[error("degenerate box (w or h <= 0)")]
    Degenerate,
    #[error("box outside the unit square")]
    OutOfBounds,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
