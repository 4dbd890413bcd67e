//! Synthetic stereo scenes with exact ground truth.
//!
//! A scene is a front-facing horizontal bar (an axis-aligned slab in world
//! coordinates) above a ground plane, in front of a distant background. Each
//! frame places the bar at one depth of the trajectory. Pixels whose square
//! footprint overlaps the projected bar face take the bar depth along the
//! pixel-centre ray; other pixels see the ground plane or the background,
//! whichever is nearer.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{BBox, DetectionSet};
use crate::error::{Error, Result};
use crate::geometry::{pixel_span, CameraRig, DisparityMap};
use crate::io::detections::{json_error, write_detections};
use crate::io::manifest::{write_manifest, CameraBlock, FrameEntry, Manifest};
use crate::io::pfm::{write_intensity, write_pfm};
use crate::tracking::IntensityImage;

pub const BACKGROUND_DEPTH_M: f64 = 500.0;
pub const BAR_INTENSITY: f32 = 0.2;
pub const BACKDROP_INTENSITY: f32 = 0.8;
pub const TRUE_BOX_SCORE: f64 = 0.9;

const PIXEL_SALT: u64 = 0x7069_7865_6c73;
const DETECTION_SALT: u64 = 0x6465_7465_6374;
const DROPOUT_SALT: u64 = 0x6472_6f70;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub camera: CameraBlock,
    /// Clearance of the bar's lower edge above the ground (m).
    pub bar_height_m: f64,
    pub bar_thickness_m: f64,
    /// World x interval `[left, right]` covered by the bar (m).
    pub bar_x_extent_m: [f64; 2],
    /// Bar depth (world z) for each frame; frame indices are `0..len`.
    pub depth_trajectory: Vec<f64>,
    /// Gaussian disparity noise std (px).
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub spurious_fraction: f64,
    #[serde(default)]
    pub detection_dropout: f64,
    #[serde(default)]
    pub decoy_boxes: usize,
    #[serde(default)]
    pub seed: u64,
}

/// `n` depths spaced evenly from `start` to `end` inclusive.
pub fn linear_trajectory(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl SceneSpec {
    /// Noiseless 3.5 m bar, 0.3 m thick, spanning x in [-0.5, 3.5] m.
    pub fn new(rig: &CameraRig, depth_trajectory: Vec<f64>) -> Self {
        Self {
            camera: CameraBlock::from(rig),
            bar_height_m: 3.5,
            bar_thickness_m: 0.3,
            bar_x_extent_m: [-0.5, 3.5],
            depth_trajectory,
            noise: 0.0,
            spurious_fraction: 0.0,
            detection_dropout: 0.0,
            decoy_boxes: 0,
            seed: 0,
        }
    }

    pub fn rig(&self) -> Result<CameraRig> {
        self.camera.to_rig()
    }

    pub fn validate(&self) -> Result<()> {
        self.rig()?;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.bar_height_m.is_finite() && self.bar_height_m > 0.0) {
            return bad(format!(
                "bar_height_m must be positive, got {}",
                self.bar_height_m
            ));
        }
        if !(self.bar_thickness_m.is_finite() && self.bar_thickness_m > 0.0) {
            return bad(format!(
                "bar_thickness_m must be positive, got {}",
                self.bar_thickness_m
            ));
        }
        let [x0, x1] = self.bar_x_extent_m;
        if !(x0.is_finite() && x1.is_finite() && x0 < x1) {
            return bad(format!(
                "bar_x_extent_m must be an increasing interval, got [{x0}, {x1}]"
            ));
        }
        if self.depth_trajectory.is_empty() {
            return bad("depth_trajectory is empty".into());
        }
        if let Some(z) = self
            .depth_trajectory
            .iter()
            .find(|z| !(z.is_finite() && **z > 0.0))
        {
            return bad(format!("trajectory depths must be positive, got {z}"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        for (name, f) in [
            ("spurious_fraction", self.spurious_fraction),
            ("detection_dropout", self.detection_dropout),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} must lie in [0, 1], got {f}"));
            }
        }
        Ok(())
    }
}

pub fn parse_scene_spec(text: &str) -> Result<SceneSpec> {
    let spec: SceneSpec = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => Error::Config(e.to_string()),
        _ => json_error(text, &e),
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn render_scene_spec(spec: &SceneSpec) -> String {
    let mut out = serde_json::to_string_pretty(spec).expect("scene spec serializes");
    out.push('\n');
    out
}

pub fn read_scene_spec(path: impl AsRef<Path>) -> Result<SceneSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene_spec(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Projected bar extent clipped to the image, for frames where it is visible.
    pub boxes: BTreeMap<u64, BBox>,
    /// Exact lower-edge height per visible frame.
    pub lower_edge_m: BTreeMap<u64, f64>,
    pub scene_height_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbKind {
    Dropout,
    Decoys,
    Noise,
}

impl FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dropout" => Ok(Self::Dropout),
            "decoys" => Ok(Self::Decoys),
            "noise" => Ok(Self::Noise),
            other => Err(Error::Usage(format!(
                "unknown perturbation {other:?}; expected dropout, decoys or noise"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub disparity: DisparityMap,
    pub intensity: IntensityImage,
}

/// Projected bar face for one frame.
#[derive(Debug, Clone)]
struct BarFace {
    depth: f64,
    quad: [(f64, f64); 4],
    /// Edge normals of `quad`, used for the separating-axis test.
    normals: [(f64, f64); 4],
}

impl BarFace {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let xs = self.quad.map(|p| p.0);
        let ys = self.quad.map(|p| p.1);
        let min = |a: [f64; 4]| a.into_iter().fold(f64::INFINITY, f64::min);
        let max = |a: [f64; 4]| a.into_iter().fold(f64::NEG_INFINITY, f64::max);
        (min(xs), min(ys), max(xs), max(ys))
    }

    /// True when the pixel square `[u-0.5, u+0.5] x [v-0.5, v+0.5]` and the
    /// face overlap with positive area.
    fn covers(&self, u: f64, v: f64) -> bool {
        let square = [
            (u - 0.5, v - 0.5),
            (u + 0.5, v - 0.5),
            (u + 0.5, v + 0.5),
            (u - 0.5, v + 0.5),
        ];
        let axes = [(1.0, 0.0), (0.0, 1.0)].into_iter().chain(self.normals);
        for (ax, ay) in axes {
            let project = |pts: &[(f64, f64); 4]| {
                pts.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
                        let d = x * ax + y * ay;
                        (lo.min(d), hi.max(d))
                    })
            };
            let (a0, a1) = project(&self.quad);
            let (b0, b1) = project(&square);
            if a1 <= b0 || b1 <= a0 {
                return false;
            }
        }
        true
    }
}

/// Camera ray through a pixel centre in world coordinates, parameterised by camera depth.
struct Ray {
    origin: Point3<f64>,
    direction: Vector3<f64>,
}

impl Ray {
    fn through(rig: &CameraRig, u: f64, v: f64) -> Self {
        let origin = rig.camera_to_world(&Point3::origin());
        let k = rig.intrinsics();
        let dc = Point3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        Self {
            origin,
            direction: rig.camera_to_world(&dc) - origin,
        }
    }

    fn hit_z(&self, z_w: f64) -> Option<f64> {
        positive_hit((z_w - self.origin.z) / self.direction.z)
    }

    fn hit_y(&self, y_w: f64) -> Option<f64> {
        positive_hit((y_w - self.origin.y) / self.direction.y)
    }
}

fn positive_hit(s: f64) -> Option<f64> {
    (s.is_finite() && s > 0.0).then_some(s)
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    spec: SceneSpec,
    rig: CameraRig,
    faces: Vec<Option<BarFace>>,
    truth: GroundTruth,
    detections: Vec<DetectionSet>,
    withheld: BTreeSet<u64>,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let rig = spec.rig()?;
    let (w, h) = (rig.width() as f64, rig.height() as f64);
    let mut faces = Vec::with_capacity(spec.depth_trajectory.len());
    let mut truth = GroundTruth {
        boxes: BTreeMap::new(),
        lower_edge_m: BTreeMap::new(),
        scene_height_m: spec.bar_height_m,
    };
    for (k, &z) in spec.depth_trajectory.iter().enumerate() {
        let face = bar_face(spec, &rig, z);
        let visible = face.as_ref().and_then(|f| {
            let (x0, y0, x1, y1) = f.bounds();
            BBox::new(x0, y0, x1 - x0, y1 - y0, TRUE_BOX_SCORE).clamp_to(w, h)
        });
        if let Some(b) = visible {
            truth.boxes.insert(k as u64, b);
            truth.lower_edge_m.insert(k as u64, spec.bar_height_m);
        }
        faces.push(face.filter(|_| visible.is_some()));
    }
    if truth.boxes.is_empty() {
        return Err(Error::Config(
            "degenerate scene: the bar is never visible".into(),
        ));
    }
    let withheld = dropout_frames(spec);
    let detections = (0..spec.depth_trajectory.len() as u64)
        .map(|k| frame_detections(spec, &rig, &truth, &withheld, k))
        .collect();
    Ok(SyntheticScene {
        spec: spec.clone(),
        rig,
        faces,
        truth,
        detections,
        withheld,
    })
}

fn bar_face(spec: &SceneSpec, rig: &CameraRig, z: f64) -> Option<BarFace> {
    let [x0, x1] = spec.bar_x_extent_m;
    let y0 = spec.bar_height_m - rig.mount_height_m();
    let y1 = y0 + spec.bar_thickness_m;
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let mut quad = [(0.0, 0.0); 4];
    for (slot, (x, y)) in quad.iter_mut().zip(corners) {
        let (u, v, _) = rig.project_world_to_pixel(&Point3::new(x, y, z)).ok()?;
        *slot = (u, v);
    }
    let normals = std::array::from_fn(|i| {
        let (a, b) = (quad[i], quad[(i + 1) % 4]);
        (b.1 - a.1, a.0 - b.0)
    });
    Some(BarFace {
        depth: z,
        quad,
        normals,
    })
}

fn dropout_frames(spec: &SceneSpec) -> BTreeSet<u64> {
    let n = spec.depth_trajectory.len();
    let count = (spec.detection_dropout * n as f64).round() as usize;
    let mut order: Vec<u64> = (0..n as u64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ DROPOUT_SALT);
    order.shuffle(&mut rng);
    order.into_iter().take(count).collect()
}

/// Distractor placement, one per filter-rule branch.
#[derive(Debug, Clone, Copy)]
enum Decoy {
    Left,
    Top,
    Bottom,
}

fn frame_detections(
    spec: &SceneSpec,
    rig: &CameraRig,
    truth: &GroundTruth,
    withheld: &BTreeSet<u64>,
    frame: u64,
) -> DetectionSet {
    let (w, h) = (rig.width() as f64, rig.height() as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ DETECTION_SALT);
    rng.set_stream(frame);
    let true_box = truth.boxes.get(&frame).copied();
    let (tx, ty, t_bottom) = match &true_box {
        Some(b) => (b.center().0, b.center().1, b.y_max()),
        None => (w / 2.0, h / 3.0, h / 3.0),
    };
    let mut boxes = Vec::with_capacity(spec.decoy_boxes + 1);
    if let Some(b) = true_box.filter(|_| !withheld.contains(&frame)) {
        boxes.push(b);
    }
    let kinds = [Decoy::Left, Decoy::Top, Decoy::Bottom];
    for i in 0..spec.decoy_boxes {
        let bw: f64 = rng.random_range(30.0..120.0);
        let bh: f64 = rng.random_range(12.0..40.0);
        let score = rng.random_range(0.91..0.99);
        let (cx, cy) = match kinds[i % 3] {
            Decoy::Left => (
                rng.random_range(0.05..0.25) * tx,
                ty + rng.random_range(-20.0..20.0),
            ),
            Decoy::Top => (rng.random_range(0.45..0.75) * tx, bh / 2.0),
            Decoy::Bottom => (
                tx + rng.random_range(0.3..0.7) * (w - tx),
                t_bottom + rng.random_range(20.0..120.0),
            ),
        };
        let bw = bw.min(w);
        let bh = bh.min(h);
        let x = (cx - bw / 2.0).clamp(0.0, w - bw);
        let y = match kinds[i % 3] {
            Decoy::Top => 0.0,
            _ => (cy - bh / 2.0).clamp(0.0, h - bh),
        };
        boxes.push(BBox::new(x, y, bw, bh, score));
    }
    DetectionSet {
        index: frame,
        boxes,
    }
}

/// Intensity image with pixel centres inside `bbox` dark and the rest light.
pub fn render_box_intensity(width: usize, height: usize, bbox: &BBox) -> IntensityImage {
    let mut img = IntensityImage::filled(width, height, BACKDROP_INTENSITY);
    for v in pixel_span(bbox.y_min, bbox.h, height) {
        for u in pixel_span(bbox.x_min, bbox.w, width) {
            img.set(u, v, BAR_INTENSITY);
        }
    }
    img
}

impl SyntheticScene {
    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn rig(&self) -> &CameraRig {
        &self.rig
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn detections(&self) -> &[DetectionSet] {
        &self.detections
    }

    /// Frames whose true detection was withheld.
    pub fn withheld_frames(&self) -> &BTreeSet<u64> {
        &self.withheld
    }

    pub fn frame_count(&self) -> usize {
        self.spec.depth_trajectory.len()
    }

    /// Rebuilds the scene with one knob changed; the ground truth is unaffected.
    pub fn perturb(&self, kind: PerturbKind, magnitude: f64) -> Result<SyntheticScene> {
        let mut spec = self.spec.clone();
        match kind {
            PerturbKind::Dropout => spec.detection_dropout = magnitude,
            PerturbKind::Noise => spec.noise = magnitude,
            PerturbKind::Decoys => {
                if !(magnitude >= 0.0 && magnitude.fract() == 0.0) {
                    return Err(Error::Usage(format!(
                        "decoy count must be a non-negative integer, got {magnitude}"
                    )));
                }
                spec.decoy_boxes = magnitude as usize;
            }
        }
        generate_scene(&spec)
    }

    pub fn render_frame(&self, frame: u64) -> Result<RenderedFrame> {
        let Some(face) = self.faces.get(frame as usize) else {
            return Err(Error::Config(format!("frame {frame} is outside the scene")));
        };
        let face = face.as_ref();
        let rig = &self.rig;
        let (w, h) = (rig.width(), rig.height());
        let k = rig.intrinsics();
        let focal_baseline = k.fx * rig.baseline_m();
        let (bu, bv) = match face {
            Some(f) => {
                let (x0, y0, x1, y1) = f.bounds();
                (
                    pixel_range(x0 - 0.5, x1 + 0.5, w),
                    pixel_range(y0 - 0.5, y1 + 0.5, h),
                )
            }
            None => (0..0, 0..0),
        };
        let ground_y = -rig.mount_height_m();
        let noise = (self.spec.noise > 0.0)
            .then(|| Normal::new(0.0, self.spec.noise).expect("validated std"));
        let spurious = self.spec.spurious_fraction;
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed ^ PIXEL_SALT);
        rng.set_stream(frame);

        let mut disparity = vec![0f32; w * h];
        let mut intensity = vec![BACKDROP_INTENSITY; w * h];
        for v in 0..h {
            for u in 0..w {
                let ray = Ray::through(rig, u as f64, v as f64);
                let mut depth = BACKGROUND_DEPTH_M;
                if let Some(s) = ray.hit_y(ground_y) {
                    depth = depth.min(s);
                }
                if let Some(f) = face {
                    if bu.contains(&u) && bv.contains(&v) && f.covers(u as f64, v as f64) {
                        if let Some(s) = ray.hit_z(f.depth) {
                            if s <= depth {
                                depth = s;
                                intensity[v * w + u] = BAR_INTENSITY;
                            }
                        }
                    }
                }
                let mut d = focal_baseline / depth;
                if let Some(n) = &noise {
                    d += n.sample(&mut rng);
                }
                if spurious > 0.0 && rng.random::<f64>() < spurious {
                    d = rng.random_range(0.5..=focal_baseline);
                }
                disparity[v * w + u] = d as f32;
            }
        }
        Ok(RenderedFrame {
            disparity: DisparityMap::new(w, h, disparity)?,
            intensity: IntensityImage::new(w, h, intensity)?,
        })
    }

    /// Writes the scene as a manifest-rooted directory and returns the manifest path.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        for sub in ["disparity", "image"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let frames: Vec<u64> = (0..self.frame_count() as u64).collect();
        let chunk = rayon::current_num_threads().max(1);
        let mut entries = Vec::with_capacity(frames.len());
        for batch in frames.chunks(chunk) {
            let rendered: Vec<RenderedFrame> = batch
                .par_iter()
                .map(|&k| self.render_frame(k))
                .collect::<Result<_>>()?;
            for (&k, frame) in batch.iter().zip(&rendered) {
                let disparity_path = format!("disparity/{k:06}.pfm");
                let image_path = format!("image/{k:06}.pfm");
                write_pfm(dir.join(&disparity_path), &frame.disparity)?;
                write_intensity(dir.join(&image_path), &frame.intensity)?;
                entries.push(FrameEntry {
                    index: k,
                    disparity_path,
                    image_path: Some(image_path),
                    detections: None,
                    gt_box: self.truth.boxes.get(&k).copied(),
                });
            }
        }
        write_detections(dir.join("detections.json"), &self.detections)?;
        let manifest = Manifest {
            camera: self.spec.camera.clone(),
            frames: entries,
            detections_path: Some("detections.json".into()),
            ground_truth_height_m: Some(self.truth.scene_height_m),
        };
        let path = dir.join("manifest.json");
        write_manifest(&path, &manifest)?;
        Ok(path)
    }
}

/// Pixel indices whose centres fall in `[lo, hi]`, clipped to `[0, limit)`.
fn pixel_range(lo: f64, hi: f64, limit: usize) -> std::ops::Range<usize> {
    let start = lo.ceil().max(0.0);
    let end = (hi.floor() + 1.0).min(limit as f64);
    if end > start {
        start as usize..end as usize
    } else {
        0..0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{filter_candidates, FilterRule};
    use crate::geometry::{disparity_to_depth, extract_frustum_points};

    fn scene(z: Vec<f64>) -> SyntheticScene {
        generate_scene(&SceneSpec::new(&CameraRig::reference(), z)).unwrap()
    }

    #[test]
    fn lower_edge_projects_where_expected() {
        let s = scene(vec![10.0]);
        let b = s.ground_truth().boxes[&0];
        assert!((b.y_max() - 216.5).abs() < 1e-9, "{b:?}");
        assert!((b.x_min - 605.0).abs() < 1e-9);
        assert!((b.w - 280.0).abs() < 1e-9);
        assert!((b.h - 21.0).abs() < 1e-9);
    }

    #[test]
    fn bar_pixels_carry_the_analytic_disparity() {
        let s = scene(vec![10.0]);
        let f = s.render_frame(0).unwrap();
        assert_eq!(f.disparity.get(700, 200), (700.0f64 * 0.12 / 10.0) as f32);
        assert_eq!(f.intensity.get(700, 200), BAR_INTENSITY);
        // Sky above the bar sees the background.
        assert_eq!(
            f.disparity.get(700, 100),
            (84.0 / BACKGROUND_DEPTH_M) as f32
        );
        assert_eq!(f.intensity.get(700, 100), BACKDROP_INTENSITY);
        // Ground below the horizon: depth = H_m * fy / (v - cy).
        let d = f64::from(f.disparity.get(100, 500));
        let depth = 84.0 / d;
        assert!((depth - 1.45 * 700.0 / 140.0).abs() < 1e-5, "{depth}");
    }

    #[test]
    fn noiseless_lift_recovers_the_bar_height_within_quantisation() {
        for z in [10.0, 25.0, 70.0] {
            let s = scene(vec![z]);
            let f = s.render_frame(0).unwrap();
            let depth = disparity_to_depth(&f.disparity, s.rig()).unwrap();
            let cloud =
                extract_frustum_points(&s.ground_truth().boxes[&0], &depth, s.rig(), 0).unwrap();
            let min_y = cloud
                .points
                .iter()
                .map(|p| p.y_w_prime)
                .fold(f64::INFINITY, f64::min);
            assert!((min_y - 3.5).abs() <= z / 700.0 + 1e-9, "z={z}: {min_y}");
        }
    }

    #[test]
    fn ground_pixels_lift_to_zero_height() {
        let s = scene(vec![10.0]);
        let f = s.render_frame(0).unwrap();
        let depth = disparity_to_depth(&f.disparity, s.rig()).unwrap();
        let ground = BBox::new(0.0, 400.0, 1280.0, 320.0, 1.0);
        let cloud = extract_frustum_points(&ground, &depth, s.rig(), 0).unwrap();
        for p in &cloud.points {
            assert!(p.y_w_prime.abs() <= p.z_cam / 700.0, "{p:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = SceneSpec::new(&CameraRig::reference(), linear_trajectory(40.0, 20.0, 3));
        spec.noise = 0.25;
        spec.spurious_fraction = 0.01;
        spec.decoy_boxes = 3;
        spec.detection_dropout = 0.3;
        spec.seed = 9;
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&spec).unwrap();
        assert_eq!(a.detections(), b.detections());
        assert!(a
            .render_frame(2)
            .unwrap()
            .disparity
            .bit_eq(&b.render_frame(2).unwrap().disparity));
        spec.seed = 10;
        let c = generate_scene(&spec).unwrap();
        assert!(!a
            .render_frame(2)
            .unwrap()
            .disparity
            .bit_eq(&c.render_frame(2).unwrap().disparity));
    }

    #[test]
    fn perturbations() {
        let base = scene(linear_trajectory(70.0, 10.0, 60));
        let same = base.perturb(PerturbKind::Dropout, 0.0).unwrap();
        assert_eq!(same.detections(), base.detections());
        let dropped = base.perturb(PerturbKind::Dropout, 0.5).unwrap();
        assert_eq!(dropped.withheld_frames().len(), 30);
        let withheld = dropped
            .detections()
            .iter()
            .filter(|d| d.boxes.is_empty())
            .count();
        assert_eq!(withheld, 30);
        assert_eq!(dropped.ground_truth(), base.ground_truth());
        let decoyed = base.perturb(PerturbKind::Decoys, 3.0).unwrap();
        assert!(decoyed.detections().iter().all(|d| d.boxes.len() == 4));
        assert!(matches!(
            "blur".parse::<PerturbKind>(),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn decoys_exercise_every_rule_branch() {
        let mut spec = SceneSpec::new(&CameraRig::reference(), linear_trajectory(70.0, 10.0, 60));
        spec.decoy_boxes = 3;
        spec.detection_dropout = 0.5;
        spec.seed = 3;
        let s = generate_scene(&spec).unwrap();
        for set in s.detections() {
            let pick = filter_candidates(set, 1280, 720, &FilterRule::default());
            if s.withheld_frames().contains(&set.index) {
                assert_eq!(pick, None, "frame {}", set.index);
            } else {
                assert_eq!(pick, Some(s.ground_truth().boxes[&set.index]));
            }
        }
    }

    #[test]
    fn invisible_bar_is_degenerate() {
        let mut spec = SceneSpec::new(&CameraRig::reference(), vec![10.0]);
        spec.bar_x_extent_m = [100.0, 101.0];
        assert!(matches!(generate_scene(&spec), Err(Error::Config(_))));
        spec.bar_x_extent_m = [1.0, 0.0];
        assert!(matches!(generate_scene(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn box_intensity_marks_pixel_centres() {
        let img = render_box_intensity(10, 10, &BBox::new(2.0, 3.0, 3.0, 2.0, 1.0));
        let dark: Vec<(usize, usize)> = (0..10)
            .flat_map(|v| (0..10).map(move |u| (u, v)))
            .filter(|&(u, v)| img.get(u, v) == BAR_INTENSITY)
            .collect();
        assert_eq!(dark, vec![(2, 3), (3, 3), (4, 3), (2, 4), (3, 4), (4, 4)]);
    }

    #[test]
    fn spec_json_round_trips() {
        let spec = SceneSpec::new(&CameraRig::reference(), vec![10.0, 9.5]);
        let text = render_scene_spec(&spec);
        assert_eq!(parse_scene_spec(&text).unwrap(), spec);
        assert!(matches!(
            parse_scene_spec("{\"camera\": "),
            Err(Error::Format { .. })
        ));
    }
}
