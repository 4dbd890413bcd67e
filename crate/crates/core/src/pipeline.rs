//! End-to-end scene estimation.
//!
//! Stage 1 picks an anchor box per frame with the detection filter and fills
//! the gaps with a tracker. Stage 2 lifts each framed box to 3D, filters the
//! points by depth and takes the lowest-N mean height. The per-frame heights
//! are Kalman-smoothed in frame order and averaged into the scene height.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::config::{CenterRegion, DepthFilterMode, PipelineConfig, TrackerKind};
use crate::detection::{extend_bbox, filter_candidates, BBox, DetectionSet};
use crate::error::{Error, Result};
use crate::geometry::{disparity_to_depth, extract_frustum_points, CameraRig, DisparityMap};
use crate::io::manifest::LoadedManifest;
use crate::io::pfm::{read_intensity, read_pfm};
use crate::io::results::{ResultRow, ResultsTable};
use crate::metrics::{aggregate_heights, height_metrics, CorpusSummary, HeightMetrics};
use crate::spatial_filter::{depth_filter, kde_mode, mean_depth};
use crate::synthetic::SyntheticScene;
use crate::temporal_filter::{average_lowest, HeightSeries};
use crate::tracking::{
    fill_gaps, linear_interpolation_tracker, IntensityImage, IntensitySource, NccTemplateTracker,
    TrackedSequence,
};

/// Anything the pipeline can read a scene from.
pub trait SceneSource: IntensitySource + Sync {
    fn rig(&self) -> &CameraRig;
    /// Frame indices in increasing order.
    fn frame_indices(&self) -> Vec<u64>;
    fn detections(&self, frame: u64) -> Option<DetectionSet>;
    fn disparity(&self, frame: u64) -> Result<DisparityMap>;
    fn ground_truth_height(&self) -> Option<f64> {
        None
    }
}

impl IntensitySource for LoadedManifest {
    fn intensity(&self, frame: u64) -> Result<Option<IntensityImage>> {
        match self.frame(frame).and_then(|f| f.image_path.as_deref()) {
            Some(p) => read_intensity(self.resolve(p)).map(Some),
            None => Ok(None),
        }
    }
}

impl SceneSource for LoadedManifest {
    fn rig(&self) -> &CameraRig {
        &self.rig
    }

    fn frame_indices(&self) -> Vec<u64> {
        self.manifest.frames.iter().map(|f| f.index).collect()
    }

    fn detections(&self, frame: u64) -> Option<DetectionSet> {
        self.detections.get(&frame).cloned()
    }

    fn disparity(&self, frame: u64) -> Result<DisparityMap> {
        let entry = self
            .frame(frame)
            .ok_or_else(|| Error::Config(format!("frame {frame} is not in the manifest")))?;
        read_pfm(self.resolve(&entry.disparity_path))
    }

    fn ground_truth_height(&self) -> Option<f64> {
        self.manifest.ground_truth_height_m
    }
}

impl IntensitySource for SyntheticScene {
    fn intensity(&self, frame: u64) -> Result<Option<IntensityImage>> {
        self.render_frame(frame).map(|f| Some(f.intensity))
    }
}

impl SceneSource for SyntheticScene {
    fn rig(&self) -> &CameraRig {
        SyntheticScene::rig(self)
    }

    fn frame_indices(&self) -> Vec<u64> {
        (0..self.frame_count() as u64).collect()
    }

    fn detections(&self, frame: u64) -> Option<DetectionSet> {
        SyntheticScene::detections(self)
            .get(frame as usize)
            .cloned()
    }

    fn disparity(&self, frame: u64) -> Result<DisparityMap> {
        self.render_frame(frame).map(|f| f.disparity)
    }

    fn ground_truth_height(&self) -> Option<f64> {
        Some(self.ground_truth().scene_height_m)
    }
}

/// Why a frame produced no height sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    /// No anchor and no tracked box covers the frame.
    NoBox,
    EmptyExtraction,
    EmptyAfterFilter,
    NoSample,
    /// Any other per-frame failure, with its message.
    Failed(String),
}

impl SkipReason {
    pub fn code(&self) -> &'static str {
        match self {
            SkipReason::NoBox => "no_box",
            SkipReason::EmptyExtraction => "empty_extraction",
            SkipReason::EmptyAfterFilter => "empty_after_filter",
            SkipReason::NoSample => "no_sample",
            SkipReason::Failed(_) => "failed",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::Failed(m) => write!(f, "failed: {m}"),
            other => f.write_str(other.code()),
        }
    }
}

impl From<Error> for SkipReason {
    fn from(e: Error) -> Self {
        match e {
            Error::EmptyExtraction => SkipReason::EmptyExtraction,
            Error::EmptyAfterFilter => SkipReason::EmptyAfterFilter,
            Error::NoSample => SkipReason::NoSample,
            other => SkipReason::Failed(other.to_string()),
        }
    }
}

/// Stage-2 output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameHeight {
    pub h_df: f64,
    pub depth_center: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneEstimate {
    pub series: HeightSeries,
    /// Selected (unextended) box for every estimated frame.
    pub boxes: BTreeMap<u64, BBox>,
    pub n_points: BTreeMap<u64, usize>,
    pub skipped: Vec<(u64, SkipReason)>,
    /// True when the configured tracker could not run and interpolation was used.
    pub tracker_fallback: bool,
}

impl SceneEstimate {
    pub fn scene_height(&self) -> f64 {
        self.series.scene_height
    }

    pub fn to_results_table(&self) -> ResultsTable {
        let rows = self
            .series
            .frames
            .iter()
            .zip(&self.series.filtered)
            .map(|(&(k, h_df), &(_, h_tf))| ResultRow {
                frame_index: k,
                h_df,
                h_tf,
                bbox: self.boxes[&k],
                n_points: self.n_points[&k],
            })
            .collect();
        ResultsTable {
            rows,
            scene_height_m: self.series.scene_height,
        }
    }
}

/// Stage 1: anchors from the filter rule, gaps filled by the configured tracker.
pub fn select_boxes(
    source: &dyn SceneSource,
    config: &PipelineConfig,
) -> Result<(TrackedSequence, bool)> {
    let rig = source.rig();
    let frames = source.frame_indices();
    let rule = config.filter_rule();
    let anchors: BTreeMap<u64, BBox> = frames
        .iter()
        .filter_map(|&k| {
            let dets = source.detections(k)?;
            filter_candidates(&dets, rig.width(), rig.height(), &rule).map(|b| (k, b))
        })
        .collect();
    let images: &dyn IntensitySource = source;
    let mut interpolation = linear_interpolation_tracker();
    match config.tracker {
        TrackerKind::Interpolation => Ok((
            fill_gaps(&anchors, &frames, images, &mut interpolation)?,
            false,
        )),
        TrackerKind::Ncc => {
            let mut ncc =
                NccTemplateTracker::new(config.ncc_search_radius, config.ncc_min_correlation);
            match fill_gaps(&anchors, &frames, images, &mut ncc) {
                Err(Error::TrackerUnavailable(_)) => Ok((
                    fill_gaps(&anchors, &frames, images, &mut interpolation)?,
                    true,
                )),
                other => other.map(|seq| (seq, false)),
            }
        }
    }
}

/// Stage 2 for a single frame.
pub fn estimate_frame(
    source: &dyn SceneSource,
    frame: u64,
    bbox: &BBox,
    config: &PipelineConfig,
) -> Result<FrameHeight> {
    let rig = source.rig();
    let depth = disparity_to_depth(&source.disparity(frame)?, rig)?;
    let extended = extend_bbox(bbox, config.extension_px, rig.height());
    let cloud = extract_frustum_points(&extended, &depth, rig, frame)?;
    let depths: Vec<f64> = match config.center_region {
        CenterRegion::Extended => cloud.points.iter().map(|p| p.z_cam).collect(),
        CenterRegion::Box => extract_frustum_points(bbox, &depth, rig, frame)?
            .points
            .iter()
            .map(|p| p.z_cam)
            .collect(),
    };
    let (filtered, depth_center) = match config.depth_filter {
        DepthFilterMode::Kde => {
            let c = kde_mode(&depths, config.kde_bandwidth)?;
            (depth_filter(&cloud, c, config.sigma)?, c)
        }
        DepthFilterMode::Mean => {
            let c = mean_depth(&depths)?;
            (depth_filter(&cloud, c, config.sigma)?, c)
        }
        DepthFilterMode::Off => {
            let c = mean_depth(&depths)?;
            (cloud, c)
        }
    };
    Ok(FrameHeight {
        h_df: average_lowest(&filtered, config.n_lowest)?,
        depth_center,
        n_points: filtered.len(),
    })
}

type FrameOutcome = std::result::Result<(BBox, FrameHeight), SkipReason>;

pub fn run_scene(source: &dyn SceneSource, config: &PipelineConfig) -> Result<SceneEstimate> {
    config.validate()?;
    let frames = source.frame_indices();
    let (tracked, tracker_fallback) = match select_boxes(source, config) {
        Ok(t) => t,
        Err(Error::NoDevice) => (TrackedSequence::default(), false),
        Err(e) => return Err(e),
    };
    let outcomes: Vec<(u64, FrameOutcome)> = frames
        .par_iter()
        .map(|&k| {
            let outcome = match tracked.get(k) {
                None => Err(SkipReason::NoBox),
                Some(b) => estimate_frame(source, k, b, config)
                    .map(|h| (*b, h))
                    .map_err(SkipReason::from),
            };
            (k, outcome)
        })
        .collect();
    let mut raw = Vec::new();
    let mut boxes = BTreeMap::new();
    let mut n_points = BTreeMap::new();
    let mut skipped = Vec::new();
    for (k, outcome) in outcomes {
        match outcome {
            Ok((b, h)) => {
                raw.push((k, h.h_df));
                boxes.insert(k, b);
                n_points.insert(k, h.n_points);
            }
            Err(reason) => skipped.push((k, reason)),
        }
    }
    if raw.is_empty() {
        return Err(Error::NoSceneEstimate);
    }
    Ok(SceneEstimate {
        series: HeightSeries::from_raw(raw, &config.kalman_params())?,
        boxes,
        n_points,
        skipped,
        tracker_fallback,
    })
}

/// Outcome of one scene in a corpus run.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneOutcome {
    pub name: String,
    /// Scene height, or the error message when the scene failed.
    pub estimate: std::result::Result<f64, String>,
    pub truth: Option<f64>,
    pub metrics: Option<HeightMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub scenes: Vec<SceneOutcome>,
    /// Aggregate over scenes with both an estimate and a ground truth.
    pub summary: Option<CorpusSummary>,
}

pub fn run_corpus(scenes: &[(String, &dyn SceneSource)], config: &PipelineConfig) -> CorpusReport {
    let outcomes: Vec<SceneOutcome> = scenes
        .iter()
        .map(|(name, source)| {
            let estimate = run_scene(*source, config)
                .map(|e| e.scene_height())
                .map_err(|e| e.to_string());
            let truth = source.ground_truth_height();
            let metrics = match (&estimate, truth) {
                (Ok(h), Some(t)) => height_metrics(*h, t).ok(),
                _ => None,
            };
            SceneOutcome {
                name: name.clone(),
                estimate,
                truth,
                metrics,
            }
        })
        .collect();
    let scored: Vec<HeightMetrics> = outcomes.iter().filter_map(|o| o.metrics).collect();
    CorpusReport {
        summary: aggregate_heights(&scored).ok(),
        scenes: outcomes,
    }
}
