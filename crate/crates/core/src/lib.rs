//! Stereo height-limit estimation.
//!
//! Given per-frame disparity maps and candidate detections of an overhead
//! height-limit device, pick one device box per frame, fill detection gaps by
//! tracking, lift each box to a world-frame point cloud, reject off-device
//! depths and report per-frame and per-scene clearance heights.
//!
//! ```no_run
//! use shle::{io::read_manifest, pipeline::run_scene, PipelineConfig};
//!
//! let scene = read_manifest("scene/manifest.json")?;
//! let estimate = run_scene(&scene, &PipelineConfig::default())?;
//! println!("{:.3} m", estimate.scene_height());
//! # Ok::<(), shle::Error>(())
//! ```

pub mod config;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod spatial_filter;
pub mod synthetic;
pub mod temporal_filter;
pub mod tracking;

pub use config::{CenterRegion, DepthFilterMode, PipelineConfig, TrackerKind};
pub use detection::{BBox, DetectionSet, TrafficSide};
pub use error::{Error, Result};
pub use geometry::{CameraRig, DepthMap, DevicePointCloud, DisparityMap, Intrinsics, WorldPoint};
pub use pipeline::{run_corpus, run_scene, SceneEstimate, SceneSource, SkipReason};
pub use temporal_filter::{HeightSeries, KalmanParams};
