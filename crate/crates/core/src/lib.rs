//! 3D multi-object tracking from paired box detections.
//!
//! A paired detector emits, for every object it sees at frame `t`, both the
//! object's box at `t` and its box at `t − 1`. The pipeline here:
//!
//! - [`association`] matches each pair's previous-frame box to live tracks by 3D IoU,
//! - [`tracker`] turns pairs into velocity samples, smooths them over a sliding
//!   window, coasts through missed frames and fuses predictions with detections,
//! - [`metrics`] scores the output with 3D CLEAR and sAMOTA/AMOTA/AMOTP,
//! - [`simgen`] produces synthetic pair streams with exact ground truth,
//! - [`detio`] reads and writes the pair, pose and KITTI tracking formats.

pub mod association;
pub mod cli;
pub mod detio;
pub mod geometry;
pub mod metrics;
pub mod simgen;
pub mod tracker;

pub use association::{associate, build_cost_matrix, AssociationMethod, Assignment};
pub use detio::{BoxPair, FrameRecord, GtBox, TrackRow};
pub use geometry::{iou_3d, transform_box, Dims, EgoPose, OrientedBox3D, Vec3};
pub use metrics::{evaluate, EvalConfig, MetricsReport};
pub use simgen::{generate, ScenarioSpec};
pub use tracker::{run_sequence, Tracker, TrackerConfig};
