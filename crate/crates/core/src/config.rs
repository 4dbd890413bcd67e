//! Pipeline hyperparameters and their JSON form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{FilterRule, TrafficSide};
use crate::error::{Error, Result};
use crate::io::detections::json_error;
use crate::temporal_filter::KalmanParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    #[default]
    Interpolation,
    Ncc,
}

/// How the depth interval centre is chosen, or whether the interval is applied at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthFilterMode {
    #[default]
    Kde,
    /// Mean depth as the centre (ablation baseline).
    Mean,
    /// Keep every extracted point.
    Off,
}

/// Which points the depth-interval centre is estimated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterRegion {
    /// Points inside the selected box before the lower-boundary extension.
    #[default]
    Box,
    /// Points inside the extended box.
    Extended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Lower-boundary pixel extension.
    #[serde(rename = "M")]
    pub extension_px: f64,
    pub sigma: f64,
    pub kde_bandwidth: f64,
    pub n_lowest: usize,
    pub kalman_q: f64,
    pub kalman_r: f64,
    pub kalman_p0: f64,
    pub traffic_side: TrafficSide,
    pub top_margin: f64,
    pub tracker: TrackerKind,
    pub ncc_search_radius: usize,
    pub ncc_min_correlation: f64,
    pub depth_filter: DepthFilterMode,
    pub center_region: CenterRegion,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            extension_px: 20.0,
            sigma: 0.6,
            kde_bandwidth: 2.5,
            n_lowest: 10,
            kalman_q: 1e-3,
            kalman_r: 1e-2,
            kalman_p0: 1.0,
            traffic_side: TrafficSide::Right,
            top_margin: 0.0,
            tracker: TrackerKind::Interpolation,
            ncc_search_radius: 8,
            ncc_min_correlation: 0.5,
            depth_filter: DepthFilterMode::Kde,
            center_region: CenterRegion::Box,
        }
    }
}

/// Parameters accepted by [`PipelineConfig::set_param`].
pub const SWEEP_PARAMS: [&str; 6] = [
    "M",
    "sigma",
    "kde_bandwidth",
    "n_lowest",
    "kalman_q",
    "kalman_r",
];

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.extension_px.is_finite() && self.extension_px >= 0.0) {
            return Err(Error::Config(format!(
                "M must be non-negative, got {}",
                self.extension_px
            )));
        }
        positive("sigma", self.sigma)?;
        positive("kde_bandwidth", self.kde_bandwidth)?;
        if self.n_lowest == 0 {
            return Err(Error::Config("n_lowest must be at least 1".into()));
        }
        self.kalman_params().validate()?;
        if !self.top_margin.is_finite() {
            return Err(Error::Config("top_margin must be finite".into()));
        }
        if !(-1.0..=1.0).contains(&self.ncc_min_correlation) {
            return Err(Error::Config(format!(
                "ncc_min_correlation must lie in [-1, 1], got {}",
                self.ncc_min_correlation
            )));
        }
        Ok(())
    }

    pub fn filter_rule(&self) -> FilterRule {
        FilterRule {
            traffic_side: self.traffic_side,
            top_margin: self.top_margin,
        }
    }

    pub fn kalman_params(&self) -> KalmanParams {
        KalmanParams {
            q: self.kalman_q,
            r: self.kalman_r,
            p0: self.kalman_p0,
        }
    }

    /// Sets one sweepable parameter by name.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "M" => self.extension_px = value,
            "sigma" => self.sigma = value,
            "kde_bandwidth" => self.kde_bandwidth = value,
            "n_lowest" => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Config(format!(
                        "n_lowest must be a positive integer, got {value}"
                    )));
                }
                self.n_lowest = value as usize;
            }
            "kalman_q" => self.kalman_q = value,
            "kalman_r" => self.kalman_r = value,
            _ => {
                return Err(Error::Usage(format!(
                    "unknown parameter {name:?}; valid names: {}",
                    SWEEP_PARAMS.join(", ")
                )))
            }
        }
        self.validate()
    }
}

pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let config: PipelineConfig = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => Error::Config(e.to_string()),
        _ => json_error(text, &e),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn render_config(config: &PipelineConfig) -> String {
    let mut out = serde_json::to_string_pretty(config).expect("config serializes");
    out.push('\n');
    out
}

pub fn read_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
