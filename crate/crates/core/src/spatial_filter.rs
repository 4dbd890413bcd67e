//! Depth-interval denoising of a lifted point cloud.
//!
//! The interval centre is the mode of a Gaussian kernel density estimate over
//! the points' camera depths; only points within `sigma` of it are kept.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::DevicePointCloud;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Kernel contributions beyond this many bandwidths are below 3e-18 of the
/// peak and are skipped when scanning for the mode.
const KERNEL_CUTOFF: f64 = 9.0;

/// Coarse scan step in bandwidths.
const COARSE_STEP: f64 = 0.1;
/// Upper bound on coarse grid size; wider data get a proportionally larger step.
const MAX_COARSE_POINTS: f64 = 4e6;

/// Gaussian KDE settings. Bandwidth is in metres of depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeConfig {
    pub bandwidth: f64,
}

impl KdeConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(Self { bandwidth })
    }

    /// Coarsest refinement grid step.
    pub fn refinement_step(&self) -> f64 {
        self.bandwidth / 100.0
    }
}

/// Closed depth interval `[center - radius, center + radius]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthInterval {
    pub center: f64,
    pub radius: f64,
}

impl DepthInterval {
    pub fn contains(&self, z: f64) -> bool {
        z >= self.center - self.radius && z <= self.center + self.radius
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(())
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Domain(
            "kernel density needs at least one sample".into(),
        ));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    Ok(())
}

/// Gaussian kernel density estimate at `x`.
pub fn kde_density(x: f64, samples: &[f64], h: f64) -> Result<f64> {
    check_samples(samples)?;
    check_bandwidth(h)?;
    let sum: f64 = samples
        .iter()
        .map(|&s| {
            let t = (x - s) / h;
            (-0.5 * t * t).exp()
        })
        .sum();
    Ok(sum * INV_SQRT_2PI / (h * samples.len() as f64))
}

/// Sorted distinct sample values with multiplicities.
struct WeightedSamples {
    values: Vec<f64>,
    counts: Vec<f64>,
    total: f64,
    h: f64,
}

impl WeightedSamples {
    fn new(samples: &[f64], h: f64) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut values: Vec<f64> = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        for s in sorted {
            match values.last() {
                Some(&last) if last == s => *counts.last_mut().unwrap() += 1.0,
                _ => {
                    values.push(s);
                    counts.push(1.0);
                }
            }
        }
        Self {
            values,
            counts,
            total: samples.len() as f64,
            h,
        }
    }

    fn density(&self, x: f64) -> f64 {
        let reach = KERNEL_CUTOFF * self.h;
        let lo = self.values.partition_point(|&v| v < x - reach);
        let hi = self.values.partition_point(|&v| v <= x + reach);
        let sum: f64 = self.values[lo..hi]
            .iter()
            .zip(&self.counts[lo..hi])
            .map(|(&v, &c)| {
                let t = (x - v) / self.h;
                c * (-0.5 * t * t).exp()
            })
            .sum();
        sum * INV_SQRT_2PI / (self.h * self.total)
    }

    /// Best point of a `2*half_steps + 1` grid centred on `center`; ties go
    /// to the smaller abscissa.
    fn grid_argmax(&self, center: f64, step: f64, half_steps: i64) -> (f64, f64) {
        let mut best = (center, self.density(center));
        for i in -half_steps..=half_steps {
            let x = center + i as f64 * step;
            let d = self.density(x);
            if d > best.1 || (d == best.1 && x < best.0) {
                best = (x, d);
            }
        }
        best
    }

    /// Refines around a coarse grid point: `±2·coarse` at `coarse/100`, then
    /// two further levels each 100 times finer.
    fn refine(&self, start: f64, coarse: f64) -> (f64, f64) {
        let mut step = coarse / 100.0;
        let (mut x, mut d) = self.grid_argmax(start, step, 200);
        for _ in 0..2 {
            let next = self.grid_argmax(x, step / 100.0, 100);
            if next.1 > d || (next.1 == d && next.0 < x) {
                (x, d) = next;
            }
            step /= 100.0;
        }
        (x, d)
    }
}

/// Depth of maximum kernel density.
///
/// The density is scanned over the data range on a grid of step `h/10`.
/// Between grid points the density can exceed its grid value by at most
/// `φ(0)·step²/(8h³)` (a bound on the kernel's curvature), so every grid
/// local maximum within that margin of the best is refined on successively
/// finer grids down to `h/10^7`. Equal densities resolve to the smaller depth.
pub fn kde_mode(samples: &[f64], h: f64) -> Result<f64> {
    check_samples(samples)?;
    check_bandwidth(h)?;
    let ws = WeightedSamples::new(samples, h);
    if ws.values.len() == 1 {
        return Ok(ws.values[0]);
    }
    let lo = ws.values[0];
    let hi = ws.values[ws.values.len() - 1];
    let step = (COARSE_STEP * h).max((hi - lo) / MAX_COARSE_POINTS);
    let n = ((hi - lo) / step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| (lo + i as f64 * step).min(hi)).collect();
    let densities: Vec<f64> = if n > 256 {
        grid.par_iter().map(|&x| ws.density(x)).collect()
    } else {
        grid.iter().map(|&x| ws.density(x)).collect()
    };
    let best = densities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = INV_SQRT_2PI * step * step / (8.0 * h * h * h) + 1e-12 * best;

    let mut winner: Option<(f64, f64)> = None;
    for i in 0..n {
        let d = densities[i];
        let peak = (i == 0 || densities[i - 1] <= d) && (i + 1 == n || densities[i + 1] <= d);
        if !peak || d < best - margin {
            continue;
        }
        let local = ws.refine(grid[i], step);
        winner = match winner {
            Some(w) if w.1 > local.1 || (w.1 == local.1 && w.0 <= local.0) => Some(w),
            _ => Some(local),
        };
    }
    Ok(winner.expect("the best grid point is a candidate").0)
}

/// Arithmetic mean of the samples; the naive interval centre.
pub fn mean_depth(samples: &[f64]) -> Result<f64> {
    check_samples(samples)?;
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Keeps the points whose camera depth lies in `[center - sigma, center + sigma]`.
pub fn depth_filter(cloud: &DevicePointCloud, center: f64, sigma: f64) -> Result<DevicePointCloud> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Domain(format!(
            "interval radius must be positive, got {sigma}"
        )));
    }
    let interval = DepthInterval {
        center,
        radius: sigma,
    };
    let points: Vec<_> = cloud
        .points
        .iter()
        .filter(|p| interval.contains(p.z_cam))
        .copied()
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok(DevicePointCloud {
        points,
        source_frame: cloud.source_frame,
    })
}
