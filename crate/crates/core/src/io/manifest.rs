//! Sequence manifest: camera block, frame list and optional ground truth.
//!
//! ```json
//! {
//!   "camera": {"fx": 700.0, "fy": 700.0, "cx": 640.0, "cy": 360.0,
//!              "width": 1280, "height": 720, "baseline_m": 0.12,
//!              "mount_height_m": 1.45,
//!              "rotation": [1,0,0, 0,-1,0, 0,0,1], "translation": [0,0,0]},
//!   "frames": [{"index": 0, "disparity_path": "disparity/000000.pfm",
//!               "image_path": "image/000000.pfm",
//!               "detections": [{"x":..,"y":..,"w":..,"h":..,"score":..}],
//!               "gt_box": {"x":..,"y":..,"w":..,"h":..,"score":1.0}}],
//!   "detections_path": "detections.json",
//!   "ground_truth_height_m": 3.5
//! }
//! ```
//!
//! Paths are relative to the manifest's directory. When both inline and
//! external detections exist for a frame, the external file wins.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::detection::{BBox, DetectionSet};
use crate::error::{Error, Result};
use crate::geometry::{CameraRig, Intrinsics};
use crate::io::detections::{json_error, read_detections, validate_box};

pub const CAMERA_FIELDS: [&str; 10] = [
    "fx",
    "fy",
    "cx",
    "cy",
    "width",
    "height",
    "baseline_m",
    "mount_height_m",
    "rotation",
    "translation",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraBlock {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub baseline_m: f64,
    pub mount_height_m: f64,
    /// Row-major world-to-camera rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl CameraBlock {
    pub fn to_rig(&self) -> Result<CameraRig> {
        CameraRig::new(
            Intrinsics {
                fx: self.fx,
                fy: self.fy,
                cx: self.cx,
                cy: self.cy,
                width: self.width,
                height: self.height,
            },
            self.baseline_m,
            self.mount_height_m,
            Matrix3::from_row_slice(&self.rotation),
            Vector3::from_row_slice(&self.translation),
        )
    }
}

impl From<&CameraRig> for CameraBlock {
    fn from(rig: &CameraRig) -> Self {
        let k = rig.intrinsics();
        let r = rig.rotation();
        let mut rotation = [0.0; 9];
        for (i, slot) in rotation.iter_mut().enumerate() {
            *slot = r[(i / 3, i % 3)];
        }
        let t = rig.translation();
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            baseline_m: rig.baseline_m(),
            mount_height_m: rig.mount_height_m(),
            rotation,
            translation: [t.x, t.y, t.z],
        }
    }
}

/// Parses a camera block from JSON, reporting every missing field at once.
pub fn camera_from_value(value: &Value) -> Result<CameraRig> {
    let Some(obj) = value.as_object() else {
        return Err(Error::Config("camera block must be an object".into()));
    };
    let missing: Vec<&str> = CAMERA_FIELDS
        .iter()
        .copied()
        .filter(|f| !obj.contains_key(*f))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "missing camera fields: {}",
            missing.join(", ")
        )));
    }
    let block: CameraBlock = serde_json::from_value(value.clone())
        .map_err(|e| Error::Config(format!("invalid camera block: {e}")))?;
    block.to_rig()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: u64,
    pub disparity_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<BBox>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_box: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub camera: CameraBlock,
    pub frames: Vec<FrameEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_height_m: Option<f64>,
}

impl Manifest {
    pub fn rig(&self) -> Result<CameraRig> {
        self.camera.to_rig()
    }

    fn validate(&self) -> Result<()> {
        self.rig()?;
        let mut previous: Option<u64> = None;
        for f in &self.frames {
            if previous.is_some_and(|p| f.index <= p) {
                return Err(Error::Validation {
                    frame: f.index,
                    message: "frame indices must be strictly increasing".into(),
                });
            }
            previous = Some(f.index);
            for b in f.detections.iter().flatten().chain(f.gt_box.iter()) {
                validate_box(f.index, b)?;
            }
        }
        if let Some(h) = self.ground_truth_height_m {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Config(format!(
                    "ground_truth_height_m must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Parses and validates a manifest without touching the file system.
pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let value: Value = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
    let Some(obj) = value.as_object() else {
        return Err(Error::format(0, "manifest must be a JSON object"));
    };
    match obj.get("camera") {
        Some(camera) => {
            camera_from_value(camera)?;
        }
        None => {
            return Err(Error::Config(format!(
                "missing camera block (fields: {})",
                CAMERA_FIELDS.join(", ")
            )))
        }
    }
    let manifest: Manifest = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("invalid manifest: {e}")))?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn render_manifest(manifest: &Manifest) -> String {
    let mut out = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    out.push('\n');
    out
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    manifest.validate()?;
    let path = path.as_ref();
    std::fs::write(path, render_manifest(manifest)).map_err(|e| Error::io(path, e))
}

/// A validated manifest with its files located and detections merged.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub base_dir: PathBuf,
    pub rig: CameraRig,
    pub detections: BTreeMap<u64, DetectionSet>,
}

impl LoadedManifest {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn frame(&self, index: u64) -> Option<&FrameEntry> {
        self.manifest
            .frames
            .binary_search_by_key(&index, |f| f.index)
            .ok()
            .map(|i| &self.manifest.frames[i])
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "referenced file {} does not exist",
            path.display()
        )))
    }
}

/// Reads a manifest, checks every referenced file exists and merges
/// inline and external detections.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<LoadedManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = parse_manifest(&text)?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    for f in &manifest.frames {
        require_file(&base_dir.join(&f.disparity_path))?;
        if let Some(image) = &f.image_path {
            require_file(&base_dir.join(image))?;
        }
    }
    let mut detections: BTreeMap<u64, DetectionSet> = manifest
        .frames
        .iter()
        .filter_map(|f| {
            f.detections.as_ref().map(|boxes| {
                (
                    f.index,
                    DetectionSet {
                        index: f.index,
                        boxes: boxes.clone(),
                    },
                )
            })
        })
        .collect();
    if let Some(external) = &manifest.detections_path {
        let external_path = base_dir.join(external);
        require_file(&external_path)?;
        for set in read_detections(&external_path)? {
            if manifest
                .frames
                .binary_search_by_key(&set.index, |f| f.index)
                .is_err()
            {
                return Err(Error::Validation {
                    frame: set.index,
                    message: "detections reference a frame missing from the manifest".into(),
                });
            }
            detections.insert(set.index, set);
        }
    }
    let rig = manifest.rig()?;
    Ok(LoadedManifest {
        manifest,
        base_dir,
        rig,
        detections,
    })
}
