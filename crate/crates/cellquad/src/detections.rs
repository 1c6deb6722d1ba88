//! Detection exchange file: one JSON array of
//! `{image, width, height, detections: [{class_id, confidence, cx, cy, w, h}]}`.
//!
//! Reals are written with six decimals, so rewriting a parsed file is
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use cellquad_core::eval::{DetectionEntry, DetectionFile};
use cellquad_core::{Detection, NormBBox};
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    image: String,
    width: u32,
    height: u32,
    detections: Vec<RawDetection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    class_id: u64,
    confidence: f64,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

pub fn parse_detections(text: &str, class_count: usize) -> Result<DetectionFile> {
    let raw: Vec<RawEntry> = serde_json::from_str(text).map_err(|e| Error::Data(format!("detections: {e}")))?;
    let mut entries = Vec::with_capacity(raw.len());
    for e in raw {
        if e.width == 0 || e.height == 0 {
            return Err(Error::Data(format!("detections: image {:?} has zero size", e.image)));
        }
        let mut dets = Vec::with_capacity(e.detections.len());
        for (i, d) in e.detections.into_iter().enumerate() {
            let fail = |what: String| Error::Data(format!("detections: image {:?} detection {i}: {what}", e.image));
            if d.class_id >= class_count as u64 {
                return Err(fail(format!("unknown class id {} ({class_count} classes)", d.class_id)));
            }
            let bbox = NormBBox::new(d.cx, d.cy, d.w, d.h).map_err(|err| fail(err.to_string()))?;
            let det = Detection::new(d.class_id as usize, bbox, d.confidence).map_err(|err| fail(err.to_string()))?;
            dets.push(det);
        }
        entries.push(DetectionEntry {
            image: e.image,
            width: e.width,
            height: e.height,
            detections: dets,
        });
    }
    Ok(DetectionFile { entries })
}

pub fn read_detections(path: &Path, class_count: usize) -> Result<DetectionFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text, class_count).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn detections_text(file: &DetectionFile) -> String {
    if file.entries.is_empty() {
        return "[]\n".to_string();
    }
    let mut out = String::from("[\n");
    for (i, e) in file.entries.iter().enumerate() {
        let image = serde_json::to_string(&e.image).expect("string serialization");
        let _ = write!(out, "  {{\"image\": {image}, \"width\": {}, \"height\": {}, \"detections\": [", e.width, e.height);
        for (j, d) in e.detections.iter().enumerate() {
            let b = &d.bbox;
            let _ = write!(
                out,
                "{}\n    {{\"class_id\": {}, \"confidence\": {:.6}, \"cx\": {:.6}, \"cy\": {:.6}, \"w\": {:.6}, \"h\": {:.6}}}",
                if j == 0 { "" } else { "," },
                d.class_id,
                d.confidence,
                b.cx(),
                b.cy(),
                b.w(),
                b.h()
            );
        }
        if !e.detections.is_empty() {
            out.push_str("\n  ");
        }
        out.push_str("]}");
        out.push_str(if i + 1 == file.entries.len() { "\n" } else { ",\n" });
    }
    out.push_str("]\n");
    out
}

pub fn write_detections(file: &DetectionFile, path: &Path) -> Result<()> {
    crate::fsutil::write_file(path, detections_text(file).as_bytes())
}
