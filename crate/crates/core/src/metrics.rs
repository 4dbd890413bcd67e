//! Box-centre and height error metrics, with corpus-level averaging.

use serde::{Deserialize, Serialize};

use crate::detection::BBox;
use crate::error::{Error, Result};

/// Centre point distance and its normalisations by the ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxMetrics {
    /// Centre distance in pixels.
    pub cpd: f64,
    /// CPD over ground-truth area (px^-1).
    pub rcpda: f64,
    /// CPD over ground-truth diagonal.
    pub rcpdh: f64,
}

/// Signed height error (m) and its magnitude as a percentage of the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightMetrics {
    pub he: f64,
    pub her: f64,
}

pub fn box_metrics(pred: &BBox, gt: &BBox) -> Result<BoxMetrics> {
    if !(gt.w > 0.0 && gt.h > 0.0) {
        return Err(Error::Domain(format!(
            "ground-truth box must have positive size, got {}x{}",
            gt.w, gt.h
        )));
    }
    let (px, py) = pred.center();
    let (gx, gy) = gt.center();
    let cpd = (px - gx).hypot(py - gy);
    Ok(BoxMetrics {
        cpd,
        rcpda: cpd / (gt.w * gt.h),
        rcpdh: cpd / gt.w.hypot(gt.h),
    })
}

pub fn height_metrics(predicted: f64, truth: f64) -> Result<HeightMetrics> {
    if truth.is_nan() || truth <= 0.0 {
        return Err(Error::Domain(format!(
            "ground-truth height must be positive, got {truth}"
        )));
    }
    let he = predicted - truth;
    Ok(HeightMetrics {
        he,
        her: he.abs() / truth * 100.0,
    })
}

/// Corpus averages: mean |HE|, mean HER and mean box metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub scenes: usize,
    pub mean_abs_he: f64,
    pub mean_her: f64,
}

pub fn aggregate_heights(per_scene: &[HeightMetrics]) -> Result<CorpusSummary> {
    if per_scene.is_empty() {
        return Err(Error::Domain("nothing to aggregate".into()));
    }
    let n = per_scene.len() as f64;
    Ok(CorpusSummary {
        scenes: per_scene.len(),
        mean_abs_he: per_scene.iter().map(|m| m.he.abs()).sum::<f64>() / n,
        mean_her: per_scene.iter().map(|m| m.her).sum::<f64>() / n,
    })
}

pub fn aggregate_boxes(per_frame: &[BoxMetrics]) -> Result<BoxMetrics> {
    if per_frame.is_empty() {
        return Err(Error::Domain("nothing to aggregate".into()));
    }
    let n = per_frame.len() as f64;
    Ok(BoxMetrics {
        cpd: per_frame.iter().map(|m| m.cpd).sum::<f64>() / n,
        rcpda: per_frame.iter().map(|m| m.rcpda).sum::<f64>() / n,
        rcpdh: per_frame.iter().map(|m| m.rcpdh).sum::<f64>() / n,
    })
}
