//! Synthetic scenarios: exact ground-truth trajectories rendered into noisy,
//! dropout-corrupted box-pair streams, standing in for a paired detector.

pub mod rng;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detio::{BoxPair, FrameRecord, GtBox, ObjectClass};
use crate::geometry::{normalize_angle, transform_box, Dims, EgoPose, GeometryError, OrientedBox3D, Vec3};
use rng::SimRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Spec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How a body moves, starting from its pose at frame 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MotionProfile {
    /// Fixed world velocity (m/s); heading stays put.
    ConstantVelocity { velocity: [f64; 3] },
    /// Constant speed along the heading while the heading turns at `yaw_rate`.
    Turn { speed: f64, yaw_rate: f64 },
    /// Consecutive segments, each lasting `frames` frames. The last segment
    /// continues past its end; the first one extends backwards before frame 0.
    Piecewise { segments: Vec<Segment> },
}

impl Default for MotionProfile {
    fn default() -> Self {
        MotionProfile::ConstantVelocity { velocity: [0.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub frames: u64,
    pub motion: MotionProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    /// Centroid at frame 0, meters.
    pub center: [f64; 3],
    /// `[h, w, l]`, meters.
    pub dims: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub motion: MotionProfile,
    #[serde(default)]
    pub start_frame: u64,
    /// Last frame (inclusive) the vehicle exists; defaults to the end of the scenario.
    #[serde(default)]
    pub end_frame: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EgoSpec {
    pub position: [f64; 3],
    pub yaw: f64,
    pub motion: MotionProfile,
}

/// Per-box Gaussian noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Meters, applied independently to x, y and z.
    pub center: f64,
    /// Radians.
    pub yaw: f64,
    /// Meters, applied independently to h, w and l.
    pub dims: f64,
}

fn default_sequence_id() -> String {
    "0000".into()
}

fn default_score_range() -> [f64; 2] {
    [0.7, 1.0]
}

fn default_fp_score_range() -> [f64; 2] {
    [0.1, 0.6]
}

fn default_fp_extent() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default = "default_sequence_id")]
    pub sequence_id: String,
    pub num_frames: u64,
    /// Hz.
    pub frame_rate: f64,
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub ego: EgoSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Probability that a single detection is missing.
    #[serde(default)]
    pub dropout_prob: f64,
    /// Expected number of false-positive pairs per frame (Poisson).
    #[serde(default)]
    pub false_positive_rate: f64,
    /// Probability that a pair's previous box belongs to a different object.
    #[serde(default)]
    pub pairing_error_prob: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Score range for true detections.
    #[serde(default = "default_score_range")]
    pub score_range: [f64; 2],
    #[serde(default = "default_fp_score_range")]
    pub fp_score_range: [f64; 2],
    /// False positives are placed within ±this many meters of the ego, in x and y.
    #[serde(default = "default_fp_extent")]
    pub fp_extent: f64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::Spec(m));
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return fail(format!("frame_rate must be positive, got {}", self.frame_rate));
        }
        for (name, p) in [
            ("dropout_prob", self.dropout_prob),
            ("pairing_error_prob", self.pairing_error_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return fail(format!("false_positive_rate must be >= 0, got {}", self.false_positive_rate));
        }
        for (name, s) in [("noise.center", self.noise.center), ("noise.yaw", self.noise.yaw), ("noise.dims", self.noise.dims)] {
            if !(s >= 0.0 && s.is_finite()) {
                return fail(format!("{name} must be >= 0, got {s}"));
            }
        }
        for (name, [lo, hi]) in [("score_range", self.score_range), ("fp_score_range", self.fp_score_range)] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return fail(format!("{name} must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]"));
            }
        }
        if !(self.fp_extent > 0.0 && self.fp_extent.is_finite()) {
            return fail(format!("fp_extent must be positive, got {}", self.fp_extent));
        }
        for (k, v) in self.vehicles.iter().enumerate() {
            OrientedBox3D::new(Vec3::from(v.center), Dims::new(v.dims[0], v.dims[1], v.dims[2]), v.yaw)
                .map_err(|e| SimError::Spec(format!("vehicle {k}: {e}")))?;
            if let Some(end) = v.end_frame {
                if end < v.start_frame {
                    return fail(format!("vehicle {k}: end_frame {end} before start_frame {}", v.start_frame));
                }
            }
            validate_profile(&v.motion).map_err(|m| SimError::Spec(format!("vehicle {k}: {m}")))?;
        }
        validate_profile(&self.ego.motion).map_err(|m| SimError::Spec(format!("ego: {m}")))?;
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }
}

fn validate_profile(p: &MotionProfile) -> Result<(), String> {
    let finite = |xs: &[f64]| xs.iter().all(|v| v.is_finite());
    match p {
        MotionProfile::ConstantVelocity { velocity } if !finite(velocity) => Err("non-finite velocity".into()),
        MotionProfile::Turn { speed, yaw_rate } if !finite(&[*speed, *yaw_rate]) => Err("non-finite turn".into()),
        MotionProfile::Piecewise { segments } => {
            if segments.is_empty() {
                return Err("piecewise profile needs at least one segment".into());
            }
            for s in segments {
                if matches!(s.motion, MotionProfile::Piecewise { .. }) {
                    return Err("piecewise segments cannot nest".into());
                }
                validate_profile(&s.motion)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Planar kinematic state of a body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematic {
    pub position: Vec3,
    pub yaw: f64,
}

/// State after `frames` frames (possibly fractional or negative) of `profile`.
pub fn integrate(profile: &MotionProfile, start: Kinematic, frames: f64, frame_rate: f64) -> Kinematic {
    match profile {
        MotionProfile::ConstantVelocity { velocity } => Kinematic {
            position: Vec3::new(
                start.position.x + velocity[0] * frames / frame_rate,
                start.position.y + velocity[1] * frames / frame_rate,
                start.position.z + velocity[2] * frames / frame_rate,
            ),
            yaw: start.yaw,
        },
        MotionProfile::Turn { speed, yaw_rate } => {
            let t = frames / frame_rate;
            let yaw = start.yaw + yaw_rate * t;
            let (dx, dy) = if *yaw_rate == 0.0 {
                (speed * t * start.yaw.cos(), speed * t * start.yaw.sin())
            } else {
                let r = speed / yaw_rate;
                (r * (yaw.sin() - start.yaw.sin()), -r * (yaw.cos() - start.yaw.cos()))
            };
            Kinematic {
                position: Vec3::new(start.position.x + dx, start.position.y + dy, start.position.z),
                yaw: normalize_angle(yaw),
            }
        }
        MotionProfile::Piecewise { segments } => {
            if frames <= 0.0 {
                return integrate(&segments[0].motion, start, frames, frame_rate);
            }
            let mut state = start;
            let mut elapsed = 0.0;
            for (k, seg) in segments.iter().enumerate() {
                let len = seg.frames as f64;
                let last = k + 1 == segments.len();
                if last || frames <= elapsed + len {
                    return integrate(&seg.motion, state, frames - elapsed, frame_rate);
                }
                state = integrate(&seg.motion, state, len, frame_rate);
                elapsed += len;
            }
            state
        }
    }
}

/// Generated scenario. `frames` holds world-frame pairs; `sensor_frames` holds
/// the same detections in each frame's sensor coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub gt: Vec<GtBox>,
    pub frames: Vec<FrameRecord>,
    pub sensor_frames: Vec<FrameRecord>,
}

impl Scenario {
    pub fn poses(&self) -> Vec<EgoPose> {
        self.frames.iter().map(|f| f.ego_pose).collect()
    }
}

fn vehicle_box(spec: &ScenarioSpec, v: &VehicleSpec, frame: f64) -> OrientedBox3D {
    let start = Kinematic { position: Vec3::from(v.center), yaw: v.yaw };
    let k = integrate(&v.motion, start, frame, spec.frame_rate);
    OrientedBox3D {
        center: k.position,
        dims: Dims::new(v.dims[0], v.dims[1], v.dims[2]),
        yaw: normalize_angle(k.yaw),
    }
}

fn present(v: &VehicleSpec, frame: u64, num_frames: u64) -> bool {
    frame >= v.start_frame && frame <= v.end_frame.unwrap_or(num_frames.saturating_sub(1))
}

pub fn ego_pose_at(spec: &ScenarioSpec, frame: f64) -> EgoPose {
    let start = Kinematic { position: Vec3::from(spec.ego.position), yaw: spec.ego.yaw };
    let k = integrate(&spec.ego.motion, start, frame, spec.frame_rate);
    EgoPose::from_yaw(k.yaw, k.position)
}

fn perturb(rng: &mut SimRng, b: &OrientedBox3D, noise: &NoiseSpec) -> OrientedBox3D {
    let n = [
        rng.gaussian(noise.center),
        rng.gaussian(noise.center),
        rng.gaussian(noise.center),
        rng.gaussian(noise.dims),
        rng.gaussian(noise.dims),
        rng.gaussian(noise.dims),
        rng.gaussian(noise.yaw),
    ];
    // keep sizes positive under heavy noise
    let floor = 0.05;
    OrientedBox3D {
        center: Vec3::new(b.center.x + n[0], b.center.y + n[1], b.center.z + n[2]),
        dims: Dims::new(
            (b.dims.h + n[3]).max(floor),
            (b.dims.w + n[4]).max(floor),
            (b.dims.l + n[5]).max(floor),
        ),
        yaw: normalize_angle(b.yaw + n[6]),
    }
}

/// Renders a scenario. Deterministic in `spec` (including `rng_seed`).
///
/// Per frame and per present vehicle, in vehicle order, the stream draws:
/// dropout, pairing-error, partner, score, then 7 noise values for the current
/// box and 7 for the previous box. All draws happen whether or not they are
/// used. False positives follow, drawn from a Poisson count.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, SimError> {
    spec.validate()?;
    let mut rng = SimRng::new(spec.rng_seed);
    let dt = spec.dt();
    let mut gt = Vec::new();
    let mut frames = Vec::new();
    let mut sensor_frames = Vec::new();

    for k in 0..spec.num_frames {
        let pose = ego_pose_at(spec, k as f64);
        let to_sensor = pose.inverse();
        let now = k as f64;

        let prev_present: Vec<usize> = (0..spec.vehicles.len())
            .filter(|&i| k > 0 && present(&spec.vehicles[i], k - 1, spec.num_frames))
            .collect();

        let mut sensor_pairs = Vec::new();
        for (i, v) in spec.vehicles.iter().enumerate() {
            if !present(v, k, spec.num_frames) {
                continue;
            }
            let current_gt = vehicle_box(spec, v, now);
            gt.push(GtBox { frame_index: k, gt_id: i as u64, bbox: current_gt, object_class: ObjectClass::Car });

            let dropped = rng.uniform() < spec.dropout_prob;
            let mispaired = rng.uniform() < spec.pairing_error_prob;
            let partner_draw = rng.uniform();
            let score = rng.uniform_in(spec.score_range[0], spec.score_range[1]);

            let others: Vec<usize> = prev_present.iter().copied().filter(|&j| j != i).collect();
            let previous_gt = if mispaired && !others.is_empty() {
                let j = others[((partner_draw * others.len() as f64) as usize).min(others.len() - 1)];
                vehicle_box(spec, &spec.vehicles[j], now - 1.0)
            } else {
                vehicle_box(spec, v, now - 1.0)
            };

            let cur = perturb(&mut rng, &transform_box(&to_sensor, &current_gt)?, &spec.noise);
            let prev = perturb(&mut rng, &transform_box(&to_sensor, &previous_gt)?, &spec.noise);
            if !dropped {
                sensor_pairs.push(BoxPair { current: cur, previous: prev, score });
            }
        }

        for _ in 0..rng.poisson(spec.false_positive_rate) {
            let x = rng.uniform_in(-spec.fp_extent, spec.fp_extent);
            let y = rng.uniform_in(-spec.fp_extent, spec.fp_extent);
            let yaw = rng.uniform_in(-std::f64::consts::PI, std::f64::consts::PI);
            let speed = rng.uniform_in(0.0, 15.0);
            let scale = rng.uniform_in(0.9, 1.1);
            let score = rng.uniform_in(spec.fp_score_range[0], spec.fp_score_range[1]);
            let dims = Dims::new(1.5 * scale, 1.6 * scale, 3.9 * scale);
            let current = OrientedBox3D { center: Vec3::new(x, y, 0.75 * scale), dims, yaw };
            let step = Vec3::new(yaw.cos(), yaw.sin(), 0.0) * (speed * dt);
            let previous = OrientedBox3D { center: current.center - step, ..current };
            sensor_pairs.push(BoxPair { current, previous, score });
        }

        let world_pairs = sensor_pairs
            .iter()
            .map(|p| {
                Ok(BoxPair {
                    current: transform_box(&pose, &p.current)?,
                    previous: transform_box(&pose, &p.previous)?,
                    score: p.score,
                })
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;

        let record = |pairs| FrameRecord {
            sequence_id: spec.sequence_id.clone(),
            frame_index: k,
            timestamp: k as f64 / spec.frame_rate,
            ego_pose: pose,
            pairs,
        };
        frames.push(record(world_pairs));
        sensor_frames.push(record(sensor_pairs));
    }

    Ok(Scenario { gt, frames, sensor_frames })
}
