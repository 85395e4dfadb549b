//! Track lifecycle driven by paired detections.
//!
//! Each matched pair yields a velocity sample `(current − previous) / dt`. A
//! track keeps its last `window` samples and uses their mean as its velocity,
//! both to coast through missed frames and to predict the box that is fused
//! with the next detection.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{associate, AssociationMethod};
use crate::detio::{BoxPair, FrameRecord, TrackRow};
use crate::geometry::{angle_diff, normalize_angle, transform_box, Dims, GeometryError, OrientedBox3D, Vec3};

/// Weight of the previous value in the per-track score moving average.
pub const SCORE_EMA_DECAY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("time step must be positive, got {0}")]
    InvalidDt(f64),
    #[error("velocity window is empty")]
    EmptyWindow,
    #[error("frame {got} does not follow frame {last}")]
    FrameOrder { last: u64, got: u64 },
    #[error("invalid tracker config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocitySample {
    /// m/s
    pub velocity: Vec3,
    /// rad/s
    pub yaw_rate: f64,
}

/// The `capacity` most recent velocity samples, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityWindow {
    capacity: usize,
    samples: VecDeque<VelocitySample>,
}

impl VelocityWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be at least 1");
        Self { capacity, samples: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, sample: VelocitySample) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn samples(&self) -> impl Iterator<Item = &VelocitySample> {
        self.samples.iter()
    }
}

/// Finite-difference velocity of a box pair.
pub fn velocity_from_pair(pair: &BoxPair, dt: f64) -> Result<VelocitySample, TrackerError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(TrackerError::InvalidDt(dt));
    }
    Ok(VelocitySample {
        velocity: (pair.current.center - pair.previous.center) * (1.0 / dt),
        yaw_rate: angle_diff(pair.current.yaw, pair.previous.yaw) / dt,
    })
}

/// Boxcar mean of the window.
///
/// Uses a running mean, so a window of identical samples returns that sample
/// bit-for-bit.
pub fn smoothed_velocity(window: &VelocityWindow) -> Result<VelocitySample, TrackerError> {
    let mut samples = window.samples();
    let first = *samples.next().ok_or(TrackerError::EmptyWindow)?;
    let mut mean = first;
    for (k, s) in samples.enumerate() {
        let n = (k + 2) as f64;
        mean.velocity = mean.velocity + (s.velocity - mean.velocity) * (1.0 / n);
        mean.yaw_rate += (s.yaw_rate - mean.yaw_rate) / n;
    }
    Ok(mean)
}

fn advance(b: &OrientedBox3D, v: &VelocitySample, dt: f64) -> OrientedBox3D {
    OrientedBox3D {
        center: b.center + v.velocity * dt,
        dims: b.dims,
        yaw: normalize_angle(b.yaw + v.yaw_rate * dt),
    }
}

/// Convex blend of a predicted and a detected box; `alpha` weights the detection.
/// Yaw is interpolated along the shorter arc.
pub fn fuse(prediction: &OrientedBox3D, detection: &OrientedBox3D, alpha: f64) -> OrientedBox3D {
    if alpha == 1.0 {
        return *detection;
    }
    if alpha == 0.0 {
        return *prediction;
    }
    let beta = 1.0 - alpha;
    let (p, d) = (prediction, detection);
    OrientedBox3D {
        center: d.center * alpha + p.center * beta,
        dims: Dims::new(
            alpha * d.dims.h + beta * p.dims.h,
            alpha * d.dims.w + beta * p.dims.w,
            alpha * d.dims.l + beta * p.dims.l,
        ),
        yaw: normalize_angle(p.yaw + alpha * angle_diff(d.yaw, p.yaw)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Coasting,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u64,
    /// World-frame box at `last_frame`.
    pub state_box: OrientedBox3D,
    pub window: VelocityWindow,
    pub hits: u32,
    pub consecutive_misses: u32,
    pub status: TrackStatus,
    pub score: f64,
    pub last_frame: u64,
}

/// Moves the track's state box forward by its smoothed velocity.
pub fn predict(track: &Track, dt: f64) -> Result<OrientedBox3D, TrackerError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(TrackerError::InvalidDt(dt));
    }
    let v = smoothed_velocity(&track.window)?;
    Ok(advance(&track.state_box, &v, dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Velocity window length N, in frames.
    #[serde(alias = "window_n")]
    pub window: usize,
    pub iou_threshold: f64,
    pub min_hits: u32,
    pub max_misses: u32,
    /// Detection weight in the prediction/detection blend.
    pub alpha: f64,
    pub score_threshold: f64,
    pub method: AssociationMethod,
    /// Blend dimensions like centers; otherwise take the detection's dimensions.
    pub blend_dims: bool,
    /// Report coasting tracks with their predicted boxes.
    pub emit_coasting: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            window: 5,
            iou_threshold: 0.01,
            min_hits: 3,
            max_misses: 2,
            alpha: 0.5,
            score_threshold: 0.0,
            method: AssociationMethod::Greedy,
            blend_dims: true,
            emit_coasting: true,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let fail = |m: String| Err(TrackerError::Config(m));
        if self.window < 1 {
            return fail(format!("window must be >= 1, got {}", self.window));
        }
        if self.min_hits < 1 {
            return fail(format!("min_hits must be >= 1, got {}", self.min_hits));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return fail(format!("iou_threshold must be in (0, 1], got {}", self.iou_threshold));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return fail(format!("score_threshold must be in [0, 1], got {}", self.score_threshold));
        }
        Ok(())
    }

    /// Parses a config file body: a JSON object, or `key = value` lines with
    /// `#` comments. Keys are the field names of this struct.
    pub fn parse(text: &str) -> Result<Self, TrackerError> {
        let trimmed = text.trim_start();
        let value = if trimmed.starts_with('{') {
            serde_json::from_str::<serde_json::Value>(text).map_err(|e| TrackerError::Config(e.to_string()))?
        } else {
            let mut map = serde_json::Map::new();
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, val) = line
                    .split_once('=')
                    .ok_or_else(|| TrackerError::Config(format!("line {}: expected key = value", idx + 1)))?;
                let val = val.trim();
                let json = serde_json::from_str::<serde_json::Value>(val)
                    .unwrap_or_else(|_| serde_json::Value::String(val.trim_matches('"').to_string()));
                map.insert(key.trim().to_string(), json);
            }
            serde_json::Value::Object(map)
        };
        let config: TrackerConfig =
            serde_json::from_value(value).map_err(|e| TrackerError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for TrackerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "window={} iou_threshold={} min_hits={} max_misses={} alpha={} score_threshold={} method={} blend_dims={} emit_coasting={}",
            self.window,
            self.iou_threshold,
            self.min_hits,
            self.max_misses,
            self.alpha,
            self.score_threshold,
            self.method,
            self.blend_dims,
            self.emit_coasting
        )
    }
}

/// Single-sequence tracker state.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
    last_timestamp: Option<f64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate()?;
        Ok(Self { config, tracks: Vec::new(), next_id: 0, last_frame: None, last_timestamp: None })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live (non-dead) tracks in creation order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advances the tracker by one frame and returns the rows to report for it.
    pub fn step(&mut self, frame: &FrameRecord) -> Result<Vec<TrackRow>, TrackerError> {
        if let Some(last) = self.last_frame {
            if frame.frame_index != last + 1 {
                return Err(TrackerError::FrameOrder { last, got: frame.frame_index });
            }
        }
        let dt = match self.last_timestamp {
            Some(t) => {
                let dt = frame.timestamp - t;
                if !(dt > 0.0) {
                    return Err(TrackerError::InvalidDt(dt));
                }
                Some(dt)
            }
            None => None,
        };
        let cfg = self.config;

        let pairs: Vec<BoxPair> =
            frame.pairs.iter().filter(|p| p.score >= cfg.score_threshold).copied().collect();
        let track_boxes: Vec<OrientedBox3D> = self.tracks.iter().map(|t| t.state_box).collect();
        let assignment = associate(&pairs, &track_boxes, cfg.iou_threshold, cfg.method);

        for m in &assignment.matches {
            let pair = &pairs[m.pair];
            let track = &mut self.tracks[m.track];
            if let Some(dt) = dt {
                track.window.push(velocity_from_pair(pair, dt)?);
            }
            let prediction = match dt {
                Some(dt) if !track.window.is_empty() => predict(track, dt)?,
                _ => pair.current,
            };
            let mut fused = fuse(&prediction, &pair.current, cfg.alpha);
            if !cfg.blend_dims {
                fused.dims = pair.current.dims;
            }
            track.state_box = fused;
            track.hits += 1;
            track.consecutive_misses = 0;
            track.score = SCORE_EMA_DECAY * track.score + (1.0 - SCORE_EMA_DECAY) * pair.score;
            track.last_frame = frame.frame_index;
            track.status = match track.status {
                TrackStatus::Tentative if track.hits >= cfg.min_hits => TrackStatus::Confirmed,
                TrackStatus::Tentative => TrackStatus::Tentative,
                _ => TrackStatus::Confirmed,
            };
        }

        for &j in &assignment.unmatched_tracks {
            let track = &mut self.tracks[j];
            if let Some(dt) = dt {
                if !track.window.is_empty() {
                    track.state_box = predict(track, dt)?;
                }
            }
            track.consecutive_misses += 1;
            track.last_frame = frame.frame_index;
            track.status = match track.status {
                TrackStatus::Tentative => TrackStatus::Dead,
                _ if track.consecutive_misses > cfg.max_misses => TrackStatus::Dead,
                _ => TrackStatus::Coasting,
            };
        }
        self.tracks.retain(|t| t.status != TrackStatus::Dead);

        for &i in &assignment.unmatched_pairs {
            let pair = &pairs[i];
            let mut window = VelocityWindow::new(cfg.window);
            if let Some(dt) = dt {
                window.push(velocity_from_pair(pair, dt)?);
            }
            let status = if 1 >= cfg.min_hits { TrackStatus::Confirmed } else { TrackStatus::Tentative };
            self.tracks.push(Track {
                track_id: self.next_id,
                state_box: pair.current,
                window,
                hits: 1,
                consecutive_misses: 0,
                status,
                score: pair.score,
                last_frame: frame.frame_index,
            });
            self.next_id += 1;
        }

        self.last_frame = Some(frame.frame_index);
        self.last_timestamp = Some(frame.timestamp);

        Ok(self
            .tracks
            .iter()
            .filter(|t| match t.status {
                TrackStatus::Confirmed => true,
                TrackStatus::Coasting => cfg.emit_coasting,
                _ => false,
            })
            .map(|t| TrackRow {
                frame_index: frame.frame_index,
                track_id: t.track_id,
                bbox: t.state_box,
                score: t.score,
            })
            .collect())
    }
}

/// Re-expresses a sensor-frame record in the world frame using its ego pose.
pub fn to_world_frame(frame: &FrameRecord) -> Result<FrameRecord, TrackerError> {
    let pose = &frame.ego_pose;
    let pairs = frame
        .pairs
        .iter()
        .map(|p| {
            Ok(BoxPair {
                current: transform_box(pose, &p.current)?,
                previous: transform_box(pose, &p.previous)?,
                score: p.score,
            })
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;
    Ok(FrameRecord { pairs, ..frame.clone() })
}

/// Runs a fresh tracker over one sequence's frames.
pub fn run_sequence(
    frames: &[FrameRecord],
    config: &TrackerConfig,
    sensor_frame: bool,
) -> Result<Vec<TrackRow>, TrackerError> {
    let mut tracker = Tracker::new(*config)?;
    let mut rows = Vec::new();
    for frame in frames {
        if sensor_frame {
            rows.extend(tracker.step(&to_world_frame(frame)?)?);
        } else {
            rows.extend(tracker.step(frame)?);
        }
    }
    Ok(rows)
}
