//! File formats, image IO, reports and the pipeline commands built on
//! `cellquad-core`.

pub mod config;
pub mod detections;
pub mod error;
pub mod fsutil;
pub mod imageio;
pub mod manifest;
pub mod overlay;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
