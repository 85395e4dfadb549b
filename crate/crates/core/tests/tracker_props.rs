mod common;

use common::{boxed, five_car_scenario};
use pairtrack::detio::{BoxPair, FrameRecord};
use pairtrack::geometry::{EgoPose, Vec3};
use pairtrack::simgen::{generate, NoiseSpec};
use pairtrack::tracker::{
    predict, run_sequence, smoothed_velocity, Track, TrackStatus, Tracker, TrackerConfig, VelocitySample,
    VelocityWindow,
};
use proptest::prelude::*;

fn noisy_frames(seed: u64, dropout: f64) -> Vec<FrameRecord> {
    let mut spec = five_car_scenario(seed);
    spec.num_frames = 40;
    spec.noise = NoiseSpec { center: 0.15, yaw: 0.02, dims: 0.05 };
    spec.dropout_prob = dropout;
    spec.false_positive_rate = 0.5;
    spec.pairing_error_prob = 0.05;
    generate(&spec).unwrap().frames
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lifecycle_bounds_hold(seed in any::<u64>(), dropout in 0.0..0.5f64, window in 1usize..10, max_misses in 0u32..4) {
        let cfg = TrackerConfig { window, max_misses, ..TrackerConfig::default() };
        let mut tracker = Tracker::new(cfg).unwrap();
        for frame in noisy_frames(seed, dropout) {
            tracker.step(&frame).unwrap();
            for t in tracker.tracks() {
                prop_assert!(t.window.len() <= window);
                prop_assert!(t.consecutive_misses <= max_misses);
                prop_assert!(t.status != TrackStatus::Dead);
            }
        }
    }

    #[test]
    fn tracking_is_deterministic(seed in any::<u64>()) {
        let frames = noisy_frames(seed, 0.2);
        let cfg = TrackerConfig::default();
        prop_assert_eq!(run_sequence(&frames, &cfg, false).unwrap(), run_sequence(&frames, &cfg, false).unwrap());
    }

    #[test]
    fn full_detection_weight_reports_raw_boxes(seed in any::<u64>()) {
        let frames = noisy_frames(seed, 0.0);
        let cfg = TrackerConfig { alpha: 1.0, min_hits: 1, emit_coasting: false, ..TrackerConfig::default() };
        let mut tracker = Tracker::new(cfg).unwrap();
        for frame in &frames {
            for row in tracker.step(frame).unwrap() {
                prop_assert!(frame.pairs.iter().any(|p| p.current == row.bbox));
            }
        }
    }

    #[test]
    fn predictions_compose(vx in -20.0..20.0f64, vy in -20.0..20.0f64, w in -0.5..0.5f64, dt1 in 0.01..0.5f64, dt2 in 0.01..0.5f64) {
        let mut window = VelocityWindow::new(3);
        window.push(VelocitySample { velocity: Vec3::new(vx, vy, 0.0), yaw_rate: w });
        let mut track = Track {
            track_id: 0,
            state_box: boxed(1.0, 2.0, 0.5, 1.5, 1.6, 3.9, 0.3),
            window,
            hits: 3,
            consecutive_misses: 0,
            status: TrackStatus::Confirmed,
            score: 1.0,
            last_frame: 0,
        };
        let direct = predict(&track, dt1 + dt2).unwrap();
        track.state_box = predict(&track, dt1).unwrap();
        let stepped = predict(&track, dt2).unwrap();
        let (a, b) = (direct.to_params(), stepped.to_params());
        for k in 0..7 {
            prop_assert!((a[k] - b[k]).abs() < 1e-9, "param {}: {} vs {}", k, a[k], b[k]);
        }
    }
}

#[test]
fn noise_free_constant_velocity_is_recovered_exactly() {
    let v = Vec3::new(7.5, -2.0, 0.0);
    let dt = 0.1;
    let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
    for k in 0..30u64 {
        let at = |n: f64| boxed(v.x * n * dt, v.y * n * dt, 0.8, 1.5, 1.6, 3.9, 0.0);
        let frame = FrameRecord {
            sequence_id: "0000".into(),
            frame_index: k,
            timestamp: k as f64 * dt,
            ego_pose: EgoPose::identity(),
            pairs: vec![BoxPair { current: at(k as f64), previous: at(k as f64 - 1.0), score: 0.9 }],
        };
        let rows = tracker.step(&frame).unwrap();
        if k >= 2 {
            assert_eq!(rows.len(), 1);
            let c = rows[0].bbox.center;
            assert!((c.x - v.x * k as f64 * dt).abs() < 1e-9 && (c.y - v.y * k as f64 * dt).abs() < 1e-9);
        }
        if k >= 1 {
            let est = smoothed_velocity(&tracker.tracks()[0].window).unwrap();
            assert!((est.velocity - v).norm() < 1e-9, "frame {k}: {:?}", est.velocity);
            assert!(est.yaw_rate.abs() < 1e-12);
        }
    }
}

#[test]
fn smoothing_over_nine_samples_cuts_noise_by_three() {
    // mean of N i.i.d. samples has std σ/√N
    let mut rng = pairtrack::simgen::rng::SimRng::new(5);
    let sigma = 1.0;
    let trials = 10_000;
    let mut sq = 0.0;
    for _ in 0..trials {
        let mut w = VelocityWindow::new(9);
        for _ in 0..9 {
            w.push(VelocitySample { velocity: Vec3::new(rng.gaussian(sigma), 0.0, 0.0), yaw_rate: 0.0 });
        }
        sq += smoothed_velocity(&w).unwrap().velocity.x.powi(2);
    }
    let std = (sq / trials as f64).sqrt();
    assert!((std - sigma / 3.0).abs() <= 0.15 * sigma / 3.0, "std {std}");
}

#[test]
fn single_dropped_frame_is_bridged() {
    let sigma = 0.1;
    let spec = pairtrack::simgen::ScenarioSpec {
        num_frames: 20,
        vehicles: vec![common::vehicle([0.0, 0.0, 0.8], [10.0, 0.0, 0.0])],
        noise: NoiseSpec { center: sigma, ..NoiseSpec::default() },
        ..five_car_scenario(11)
    };
    let sc = generate(&spec).unwrap();
    let mut frames = sc.frames.clone();
    frames[10].pairs.clear();
    let rows = run_sequence(&frames, &TrackerConfig::default(), false).unwrap();
    let ids: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.track_id).collect();
    assert_eq!(ids.len(), 1);
    let coasted = rows.iter().find(|r| r.frame_index == 10).unwrap().bbox.center;
    let truth = sc.gt[10].bbox.center;
    let err = ((coasted.x - truth.x).powi(2) + (coasted.y - truth.y).powi(2)).sqrt();
    // 2σ plus a tenth of one frame's travel
    assert!(err <= 2.0 * sigma + 0.1 * 10.0 * spec.dt(), "coasted error {err}");
}
