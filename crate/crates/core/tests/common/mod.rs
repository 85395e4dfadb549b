//! Reference implementations the library is checked against. Each one is
//! deliberately naive: sampling, enumeration, or a hand-written fixture.
#![allow(dead_code)]

use pairtrack::detio::{GtBox, ObjectClass, TrackRow};
use pairtrack::geometry::{Dims, OrientedBox3D, Vec3};
use pairtrack::metrics::{clear_metrics, EvalConfig, SequenceInput};
use pairtrack::simgen::{EgoSpec, MotionProfile, NoiseSpec, ScenarioSpec, VehicleSpec};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Uniform(ChaCha8Rng);

impl Uniform {
    pub fn new(seed: u64) -> Self {
        Uniform(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }
}

pub fn boxed(x: f64, y: f64, z: f64, h: f64, w: f64, l: f64, yaw: f64) -> OrientedBox3D {
    OrientedBox3D::new(Vec3::new(x, y, z), Dims::new(h, w, l), yaw).unwrap()
}

pub fn car(x: f64, y: f64) -> OrientedBox3D {
    boxed(x, y, 0.0, 1.5, 1.6, 4.0, 0.0)
}

/// Box with centers in ±5 m (z in ±1 m so that most pairs overlap vertically),
/// dims in [1, 5] m and uniform yaw.
pub fn random_box(u: &mut Uniform) -> OrientedBox3D {
    let pi = std::f64::consts::PI;
    boxed(
        u.range(-5.0, 5.0),
        u.range(-5.0, 5.0),
        u.range(-1.0, 1.0),
        u.range(1.0, 5.0),
        u.range(1.0, 5.0),
        u.range(1.0, 5.0),
        u.range(-pi, pi),
    )
}

/// Monte-Carlo 3D IoU: sample the smaller box uniformly and count hits in the other.
pub fn monte_carlo_iou(a: &OrientedBox3D, b: &OrientedBox3D, samples: usize, seed: u64) -> f64 {
    let va = a.dims.h * a.dims.w * a.dims.l;
    let vb = b.dims.h * b.dims.w * b.dims.l;
    let (src, dst, vs) = if va <= vb { (a, b, va) } else { (b, a, vb) };
    let (ss, sc) = src.yaw.sin_cos();
    let (ds, dc) = dst.yaw.sin_cos();
    let mut u = Uniform::new(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let lx = (u.next() - 0.5) * src.dims.l;
        let ly = (u.next() - 0.5) * src.dims.w;
        let lz = (u.next() - 0.5) * src.dims.h;
        let x = src.center.x + sc * lx - ss * ly;
        let y = src.center.y + ss * lx + sc * ly;
        let z = src.center.z + lz;
        let dx = x - dst.center.x;
        let dy = y - dst.center.y;
        let along = dc * dx + ds * dy;
        let across = -ds * dx + dc * dy;
        if (z - dst.center.z).abs() <= 0.5 * dst.dims.h
            && along.abs() <= 0.5 * dst.dims.l
            && across.abs() <= 0.5 * dst.dims.w
        {
            hits += 1;
        }
    }
    let inter = vs * hits as f64 / samples as f64;
    inter / (va + vb - inter)
}

/// Best total weight over all partial one-to-one matchings, using only
/// entries at or above `threshold`.
pub fn brute_force_best(weights: &[Vec<f64>], threshold: f64) -> f64 {
    fn go(row: usize, weights: &[Vec<f64>], used: &mut Vec<bool>, threshold: f64) -> f64 {
        if row == weights.len() {
            return 0.0;
        }
        let mut best = go(row + 1, weights, used, threshold);
        for j in 0..used.len() {
            let w = weights[row][j];
            if !used[j] && w >= threshold && w > 0.0 {
                used[j] = true;
                best = best.max(w + go(row + 1, weights, used, threshold));
                used[j] = false;
            }
        }
        best
    }
    let cols = weights.first().map_or(0, |r| r.len());
    go(0, weights, &mut vec![false; cols], threshold)
}

pub fn gt(frame: u64, id: u64, bbox: OrientedBox3D) -> GtBox {
    GtBox { frame_index: frame, gt_id: id, bbox, object_class: ObjectClass::Car }
}

pub fn hyp(frame: u64, id: u64, bbox: OrientedBox3D, score: f64) -> TrackRow {
    TrackRow { frame_index: frame, track_id: id, bbox, score }
}

pub fn gt_as_results(boxes: &[GtBox]) -> Vec<TrackRow> {
    boxes.iter().map(|g| hyp(g.frame_index, g.gt_id, g.bbox, 1.0)).collect()
}

/// Ten frames, three parked cars (ids 1, 2, 3 at x = 0, 20, 40):
/// - car 1 is followed by hypothesis 10; at frame 5 the box is 0.8 m long,
/// - car 2 by hypothesis 20, missing at frames 3 and 4,
/// - car 3 by hypothesis 30 up to frame 5, then by hypothesis 31,
/// - hypothesis 99 at frame 7 covers nothing.
pub fn clear_fixture() -> SequenceInput {
    let mut g = Vec::new();
    let mut h = Vec::new();
    for f in 0..10 {
        g.push(gt(f, 1, car(0.0, 0.0)));
        g.push(gt(f, 2, car(20.0, 0.0)));
        g.push(gt(f, 3, car(40.0, 0.0)));
        h.push(hyp(f, 10, if f == 5 { car(0.8, 0.0) } else { car(0.0, 0.0) }, 1.0));
        if f != 3 && f != 4 {
            h.push(hyp(f, 20, car(20.0, 0.0), 1.0));
        }
        h.push(hyp(f, if f <= 5 { 30 } else { 31 }, car(40.0, 0.0), 1.0));
        if f == 7 {
            h.push(hyp(f, 99, car(100.0, 0.0), 1.0));
        }
    }
    SequenceInput { sequence_id: "0000".into(), gt: g, hyp: h }
}

/// Hand-computed values for [`clear_fixture`].
pub struct ClearExpected {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub frags: usize,
    pub num_gt: usize,
    pub mota: f64,
    pub motp: f64,
    pub mt: f64,
    pub ml: f64,
}

pub fn clear_fixture_expected() -> ClearExpected {
    // 30 GT boxes; 2 misses; 1 FP; 1 switch (car 3: 30 -> 31).
    // A 0.8 m shift along a 4 m box leaves 3.2/4.8 = 2/3 IoU; the other 27 matches are exact.
    // Car 2 goes matched -> lost -> matched once; it is matched 8/10 = 80% (mostly tracked).
    ClearExpected {
        tp: 28,
        fp: 1,
        fn_: 2,
        ids: 1,
        frags: 1,
        num_gt: 30,
        mota: 100.0 * (1.0 - 4.0 / 30.0),
        motp: 100.0 * (27.0 + 2.0 / 3.0) / 28.0,
        mt: 100.0,
        ml: 0.0,
    }
}

/// Twenty frames, three cars, scored hypotheses: a confident track with one
/// swap, a weak intermittent track, a car that is never found, and scattered
/// low-score false positives.
pub fn samota_fixture() -> SequenceInput {
    let mut g = Vec::new();
    let mut h = Vec::new();
    for f in 0..20u64 {
        g.push(gt(f, 1, car(0.0, 0.0)));
        g.push(gt(f, 2, car(20.0, 0.0)));
        if f >= 5 {
            g.push(gt(f, 3, car(40.0, 0.0)));
        }
        let id = if f < 12 { 10 } else { 11 };
        h.push(hyp(f, id, car(0.2 * (f % 3) as f64, 0.0), 0.95 - 0.01 * f as f64));
        if f % 4 != 0 {
            h.push(hyp(f, 20, car(20.0, 0.3), 0.4 + 0.02 * f as f64));
        }
        if f % 5 == 2 {
            h.push(hyp(f, 90 + f, car(60.0 + f as f64, 5.0), 0.3 + 0.01 * f as f64));
        }
        if (8..14).contains(&f) {
            h.push(hyp(f, 30, car(41.5, 0.0), 0.5));
        }
    }
    SequenceInput { sequence_id: "0001".into(), gt: g, hyp: h }
}

/// sAMOTA / AMOTA / AMOTP (percent) by trying every distinct score threshold.
pub fn exhaustive_samota(seq: &SequenceInput, cfg: &EvalConfig) -> (f64, f64, f64) {
    let mut taus: Vec<f64> = seq.hyp.iter().map(|r| r.score).collect();
    taus.sort_by(|a, b| b.total_cmp(a));
    taus.dedup();
    // (tp, errors, motp fraction) per threshold
    let runs: Vec<(usize, usize, f64)> = taus
        .iter()
        .map(|&tau| {
            let filtered = SequenceInput {
                sequence_id: seq.sequence_id.clone(),
                gt: seq.gt.clone(),
                hyp: seq.hyp.iter().filter(|r| r.score >= tau).copied().collect(),
            };
            let c = clear_metrics(&[filtered], cfg).unwrap();
            (c.true_positives, c.false_positives + c.misses + c.id_switches, c.motp / 100.0)
        })
        .collect();
    let g = seq.gt.len() as f64;
    let l = cfg.recall_points;
    let (mut s, mut a, mut p) = (0.0, 0.0, 0.0);
    for k in 1..=l {
        let r = k as f64 / l as f64;
        // highest threshold whose recall tp/G reaches k/L (compared as integers)
        let Some(&(_, e, motp)) = runs.iter().find(|(tp, _, _)| tp * l >= k * seq.gt.len()) else {
            continue;
        };
        let e = e as f64;
        s += (1.0 - (e - (1.0 - r) * g) / (r * g)).clamp(0.0, 1.0);
        a += (1.0 - e / g).max(0.0);
        p += motp;
    }
    let scale = 100.0 / l as f64;
    (s * scale, a * scale, p * scale)
}

pub fn vehicle(center: [f64; 3], velocity: [f64; 3]) -> VehicleSpec {
    VehicleSpec {
        center,
        dims: [1.5, 1.6, 3.9],
        yaw: velocity[1].atan2(velocity[0]),
        motion: MotionProfile::ConstantVelocity { velocity },
        start_frame: 0,
        end_frame: None,
    }
}

/// Five cars in separate lanes, moving at different speeds, seen from a
/// moving, turning ego vehicle.
pub fn five_car_scenario(seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        sequence_id: "0000".into(),
        num_frames: 100,
        frame_rate: 10.0,
        vehicles: vec![
            vehicle([0.0, 0.0, 0.8], [8.0, 0.0, 0.0]),
            vehicle([10.0, 6.0, 0.8], [12.0, 0.0, 0.0]),
            vehicle([-5.0, -6.0, 0.8], [5.0, 0.0, 0.0]),
            vehicle([30.0, 12.0, 0.8], [-6.0, 0.0, 0.0]),
            VehicleSpec {
                center: [0.0, -20.0, 0.8],
                dims: [1.6, 1.8, 4.5],
                yaw: 0.0,
                motion: MotionProfile::Turn { speed: 6.0, yaw_rate: 0.03 },
                start_frame: 0,
                end_frame: None,
            },
        ],
        ego: EgoSpec { position: [0.0, 0.0, 0.0], yaw: 0.1, motion: MotionProfile::Turn { speed: 7.0, yaw_rate: 0.02 } },
        noise: NoiseSpec::default(),
        dropout_prob: 0.0,
        false_positive_rate: 0.0,
        pairing_error_prob: 0.0,
        rng_seed: seed,
        score_range: [0.7, 1.0],
        fp_score_range: [0.1, 0.6],
        fp_extent: 40.0,
    }
}
