//! Per-frame height from the lowest points, then scalar Kalman smoothing
//! across the scene.

use crate::error::{Error, Result};
use crate::geometry::DevicePointCloud;

/// Raw and filtered per-frame heights plus the scene height.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightSeries {
    /// `(frame_index, h_df)` in frame order.
    pub frames: Vec<(u64, f64)>,
    /// `(frame_index, h_tf)`, same indices as `frames`.
    pub filtered: Vec<(u64, f64)>,
    pub scene_height: f64,
}

impl HeightSeries {
    /// Smooths `frames` and averages the result.
    pub fn from_raw(frames: Vec<(u64, f64)>, params: &KalmanParams) -> Result<Self> {
        let raw: Vec<f64> = frames.iter().map(|&(_, h)| h).collect();
        let smoothed = kalman_smooth(&raw, params)?;
        let scene_height = scene_height(&smoothed)?;
        let filtered = frames
            .iter()
            .zip(smoothed)
            .map(|(&(k, _), h)| (k, h))
            .collect();
        Ok(Self {
            frames,
            filtered,
            scene_height,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    /// Process-noise variance.
    pub q: f64,
    /// Measurement-noise variance.
    pub r: f64,
    /// Initial estimate covariance.
    pub p0: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            q: 1e-3,
            r: 1e-2,
            p0: 1.0,
        }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kalman_q", self.q),
            ("kalman_r", self.r),
            ("kalman_p0", self.p0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Mean `y'` of the `n` lowest points.
pub fn average_lowest(cloud: &DevicePointCloud, n: usize) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::NoSample);
    }
    if n == 0 {
        return Err(Error::Config("n_lowest must be at least 1".into()));
    }
    let mut ys: Vec<f64> = cloud.points.iter().map(|p| p.y_w_prime).collect();
    ys.sort_by(f64::total_cmp);
    let take = n.min(ys.len());
    Ok(ys[..take].iter().sum::<f64>() / take as f64)
}

/// Scalar Kalman filter with identity transition and observation, seeded
/// with the first measurement.
pub fn kalman_smooth(series: &[f64], params: &KalmanParams) -> Result<Vec<f64>> {
    params.validate()?;
    let Some((&first, rest)) = series.split_first() else {
        return Err(Error::NoSample);
    };
    let mut x = first;
    let mut p = params.p0;
    let mut out = Vec::with_capacity(series.len());
    out.push(x);
    for &z in rest {
        let prior = p + params.q;
        let gain = prior / (prior + params.r);
        x += gain * (z - x);
        p = (1.0 - gain) * prior;
        out.push(x);
    }
    Ok(out)
}

/// Mean of the filtered per-frame heights.
pub fn scene_height(filtered: &[f64]) -> Result<f64> {
    if filtered.is_empty() {
        return Err(Error::NoSceneEstimate);
    }
    Ok(filtered.iter().sum::<f64>() / filtered.len() as f64)
}
