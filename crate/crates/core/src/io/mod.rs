//! On-disk formats: PFM rasters, JSON detections/manifests/metrics and the CSV results table.

pub mod detections;
pub mod manifest;
pub mod metrics;
pub mod pfm;
pub mod results;

pub use detections::{parse_detections, read_detections, render_detections, write_detections};
pub use manifest::{
    parse_manifest, read_manifest, render_manifest, write_manifest, LoadedManifest, Manifest,
};
pub use metrics::{read_metrics, write_metrics, MetricsReport};
pub use pfm::{read_intensity, read_pfm, write_intensity, write_pfm};
pub use results::{
    parse_results, read_results, render_results, write_results, ResultRow, ResultsTable,
};
