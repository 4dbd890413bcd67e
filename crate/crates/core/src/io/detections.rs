//! Per-frame candidate boxes as JSON:
//! `{"frames":[{"index":0,"boxes":[{"x":..,"y":..,"w":..,"h":..,"score":..}]}]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{BBox, DetectionSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionsFile {
    pub frames: Vec<DetectionSet>,
}

pub(crate) fn validate_box(frame: u64, b: &BBox) -> Result<()> {
    let fail = |message: String| Err(Error::Validation { frame, message });
    if [b.x_min, b.y_min, b.w, b.h, b.score]
        .iter()
        .any(|v| !v.is_finite())
    {
        return fail("box fields must be finite".into());
    }
    if b.w <= 0.0 || b.h <= 0.0 {
        return fail(format!("box size must be positive, got {}x{}", b.w, b.h));
    }
    if !(0.0..=1.0).contains(&b.score) {
        return fail(format!("score {} outside [0, 1]", b.score));
    }
    Ok(())
}

pub fn validate_sets(frames: &[DetectionSet]) -> Result<()> {
    let mut previous: Option<u64> = None;
    for set in frames {
        if previous.is_some_and(|p| set.index <= p) {
            return Err(Error::Validation {
                frame: set.index,
                message: "frame indices must be strictly increasing".into(),
            });
        }
        previous = Some(set.index);
        for b in &set.boxes {
            validate_box(set.index, b)?;
        }
    }
    Ok(())
}

pub(crate) fn json_error(text: &str, err: &serde_json::Error) -> Error {
    // serde_json reports 1-based line/column; convert to a byte offset.
    let line_start: usize = text
        .split_inclusive('\n')
        .take(err.line().saturating_sub(1))
        .map(str::len)
        .sum();
    Error::format(line_start + err.column().saturating_sub(1), err.to_string())
}

pub fn parse_detections(text: &str) -> Result<Vec<DetectionSet>> {
    let file: DetectionsFile = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
    validate_sets(&file.frames)?;
    Ok(file.frames)
}

pub fn render_detections(frames: &[DetectionSet]) -> String {
    let file = DetectionsFile {
        frames: frames.to_vec(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("detections serialize");
    out.push('\n');
    out
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionSet>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text)
}

pub fn write_detections(path: impl AsRef<Path>, frames: &[DetectionSet]) -> Result<()> {
    validate_sets(frames)?;
    let path = path.as_ref();
    std::fs::write(path, render_detections(frames)).map_err(|e| Error::io(path, e))
}
