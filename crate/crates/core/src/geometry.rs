//! Pinhole stereo camera model and the coordinate chain used to lift a
//! bounding box into a world-frame point cloud.
//!
//! Frames: the camera frame is x-right, y-down, z-forward; the world frame is
//! x-right, y-up, z-forward with its origin at the camera centre. Heights above
//! the road are world y plus the rig's mounting height. Integer pixel
//! coordinates denote pixel centres.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::detection::BBox;
use crate::error::{Error, Result};

const ORTHOGONALITY_TOL: f64 = 1e-9;

/// Focal lengths, principal point and image size, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// A rectified stereo rig: left-camera intrinsics, extrinsics `[R|T]`
/// mapping world to camera coordinates, baseline and mounting height.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    intrinsics: Intrinsics,
    baseline_m: f64,
    mount_height_m: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Camera-to-world rotation that flips the y axis.
pub fn y_flip() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0))
}

impl CameraRig {
    pub fn new(
        intrinsics: Intrinsics,
        baseline_m: f64,
        mount_height_m: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        } = intrinsics;
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "image size must be non-zero, got {width}x{height}"
            )));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::Config(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        if !(baseline_m.is_finite() && baseline_m > 0.0) {
            return Err(Error::Config(format!(
                "baseline_m must be positive, got {baseline_m}"
            )));
        }
        if !(mount_height_m.is_finite() && mount_height_m >= 0.0) {
            return Err(Error::Config(format!(
                "mount_height_m must be non-negative, got {mount_height_m}"
            )));
        }
        if rotation
            .iter()
            .chain(translation.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config("extrinsics must be finite".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.iter().any(|v| v.abs() > ORTHOGONALITY_TOL) {
            return Err(Error::Config("rotation is not orthogonal".into()));
        }
        Ok(Self {
            intrinsics,
            baseline_m,
            mount_height_m,
            rotation,
            translation,
        })
    }

    /// Rig with the default y-flipping extrinsics and zero translation.
    pub fn with_default_extrinsics(
        intrinsics: Intrinsics,
        baseline_m: f64,
        mount_height_m: f64,
    ) -> Result<Self> {
        Self::new(
            intrinsics,
            baseline_m,
            mount_height_m,
            y_flip(),
            Vector3::zeros(),
        )
    }

    /// 1280x720 rig with fx=fy=700, centred principal point, 0.12 m baseline
    /// mounted 1.45 m above the road.
    pub fn reference() -> Self {
        Self::with_default_extrinsics(
            Intrinsics {
                fx: 700.0,
                fy: 700.0,
                cx: 640.0,
                cy: 360.0,
                width: 1280,
                height: 720,
            },
            0.12,
            1.45,
        )
        .expect("reference rig is valid")
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn baseline_m(&self) -> f64 {
        self.baseline_m
    }

    pub fn mount_height_m(&self) -> f64 {
        self.mount_height_m
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Depth of a point with the given disparity; `None` for invalid disparity.
    pub fn depth_from_disparity(&self, disparity: f64) -> Option<f64> {
        is_valid_disparity(disparity).then(|| self.baseline_m * self.intrinsics.fx / disparity)
    }

    /// Back-projects pixel `(u, v)` at camera depth `z_c`.
    pub fn pixel_to_camera(&self, u: f64, v: f64, z_c: f64) -> Result<Point3<f64>> {
        if !(z_c.is_finite() && z_c > 0.0) {
            return Err(Error::Domain(format!(
                "camera depth must be positive, got {z_c}"
            )));
        }
        let k = &self.intrinsics;
        Ok(Point3::new(
            z_c * (u - k.cx) / k.fx,
            z_c * (v - k.cy) / k.fy,
            z_c,
        ))
    }

    /// `R^T (p_c - T)`.
    pub fn camera_to_world(&self, p_c: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (p_c.coords - self.translation))
    }

    /// `R p_w + T`.
    pub fn world_to_camera(&self, p_w: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p_w.coords + self.translation)
    }

    /// Height above the road for a world-frame y.
    pub fn apply_mount_height(&self, y_w: f64) -> f64 {
        y_w + self.mount_height_m
    }

    /// Projects a camera-frame point to `(u, v, z_c)`.
    pub fn project_camera(&self, p_c: &Point3<f64>) -> Result<(f64, f64, f64)> {
        let z_c = p_c.z;
        if z_c.is_nan() || z_c <= 0.0 {
            return Err(Error::Domain(format!(
                "point is not in front of the camera (z_c={z_c})"
            )));
        }
        let k = &self.intrinsics;
        Ok((k.fx * p_c.x / z_c + k.cx, k.fy * p_c.y / z_c + k.cy, z_c))
    }

    /// Projects a world point (plain world frame, without mounting offset).
    pub fn project_world_to_pixel(&self, p_w: &Point3<f64>) -> Result<(f64, f64, f64)> {
        self.project_camera(&self.world_to_camera(p_w))
    }

    /// Projects a [`WorldPoint`], undoing the mounting-height offset first.
    pub fn project_world_point(&self, p: &WorldPoint) -> Result<(f64, f64, f64)> {
        self.project_world_to_pixel(&Point3::new(
            p.x_w,
            p.y_w_prime - self.mount_height_m,
            p.z_w,
        ))
    }

    /// Lifts pixel `(u, v)` with camera depth `z` all the way to a world point
    /// carrying height above the road.
    pub fn lift_pixel(&self, u: f64, v: f64, z: f64) -> Result<WorldPoint> {
        let p_c = self.pixel_to_camera(u, v, z)?;
        let p_w = self.camera_to_world(&p_c);
        Ok(WorldPoint {
            x_w: p_w.x,
            y_w_prime: self.apply_mount_height(p_w.y),
            z_w: p_w.z,
            z_cam: z,
        })
    }

    fn check_dims(&self, width: usize, height: usize, what: &str) -> Result<()> {
        if width != self.width() || height != self.height() {
            return Err(Error::Config(format!(
                "{what} is {width}x{height} but the rig expects {}x{}",
                self.width(),
                self.height()
            )));
        }
        Ok(())
    }
}

/// A disparity is valid iff it is finite and strictly positive.
pub fn is_valid_disparity(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

/// Per-pixel disparity in pixels, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if width.checked_mul(height) != Some(values.len()) {
            return Err(Error::Config(format!(
                "disparity grid has {} values, expected {width}x{height}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.values[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: f32) {
        self.values[v * self.width + u] = value;
    }

    /// Bitwise equality, so NaN payloads compare as stored.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Metric depth in metres; invalid pixels are stored as NaN.
#[derive(Debug, Clone)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let z = self.values[v * self.width + u];
        (!z.is_nan()).then_some(z)
    }

    /// Raw grid with NaN for invalid pixels.
    pub fn raw(&self) -> &[f64] {
        &self.values
    }
}

pub fn disparity_to_depth(d: &DisparityMap, rig: &CameraRig) -> Result<DepthMap> {
    rig.check_dims(d.width, d.height, "disparity map")?;
    let values = d
        .values
        .iter()
        .map(|&v| rig.depth_from_disparity(f64::from(v)).unwrap_or(f64::NAN))
        .collect();
    Ok(DepthMap {
        width: d.width,
        height: d.height,
        values,
    })
}

/// A lifted point: world coordinates with y measured from the road, plus the
/// camera-frame depth it was lifted from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint {
    pub x_w: f64,
    pub y_w_prime: f64,
    pub z_w: f64,
    pub z_cam: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DevicePointCloud {
    pub points: Vec<WorldPoint>,
    pub source_frame: u64,
}

impl DevicePointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Integer pixel centres in `[lo, lo + extent)`, clipped to `[0, limit)`.
pub(crate) fn pixel_span(lo: f64, extent: f64, limit: usize) -> std::ops::Range<usize> {
    let start = lo.ceil().max(0.0);
    let end = (lo + extent).ceil().min(limit as f64);
    if end.is_nan() || end <= start {
        return 0..0;
    }
    start as usize..end as usize
}

/// Lifts every pixel centre inside `bbox` that has a valid depth.
pub fn extract_frustum_points(
    bbox: &BBox,
    depth: &DepthMap,
    rig: &CameraRig,
    frame: u64,
) -> Result<DevicePointCloud> {
    rig.check_dims(depth.width, depth.height, "depth map")?;
    let us = pixel_span(bbox.x_min, bbox.w, depth.width);
    let vs = pixel_span(bbox.y_min, bbox.h, depth.height);
    let mut points = Vec::with_capacity(us.len() * vs.len());
    for v in vs {
        for u in us.clone() {
            if let Some(z) = depth.get(u, v) {
                points.push(rig.lift_pixel(u as f64, v as f64, z)?);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyExtraction);
    }
    Ok(DevicePointCloud {
        points,
        source_frame: frame,
    })
}
