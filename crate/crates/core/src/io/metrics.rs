//! Metrics document: `{"height":{"he":..,"her":..},"box":{"cpd":..,"rcpda":..,"rcpdh":..}}`.
//! The `box` member is present only when ground-truth boxes were available.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::detections::json_error;
use crate::metrics::{BoxMetrics, HeightMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub height: HeightMetrics,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoxMetrics>,
}

pub fn render_metrics(report: &MetricsReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("metrics serialize");
    out.push('\n');
    out
}

pub fn parse_metrics(text: &str) -> Result<MetricsReport> {
    serde_json::from_str(text).map_err(|e| json_error(text, &e))
}

pub fn write_metrics(path: impl AsRef<Path>, report: &MetricsReport) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_metrics(report)).map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<MetricsReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trips_with_and_without_box() {
        let mut report = MetricsReport {
            height: HeightMetrics {
                he: 0.08000000000000007,
                her: 2.2857142857142874,
            },
            bbox: None,
        };
        let text = render_metrics(&report);
        assert!(!text.contains("box"));
        assert_eq!(parse_metrics(&text).unwrap(), report);
        report.bbox = Some(BoxMetrics {
            cpd: 5.0,
            rcpda: 0.5,
            rcpdh: 5.0 / 29f64.sqrt(),
        });
        let text = render_metrics(&report);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["box"]["cpd"], 5.0);
        assert_eq!(value["height"]["he"], 0.08000000000000007);
        assert_eq!(render_metrics(&parse_metrics(&text).unwrap()), text);
    }
}
