mod common;

use common::{boxed, gt, hyp};
use pairtrack::detio::{
    box_from_kitti, box_to_kitti, parse_kitti_labels, parse_pairs, parse_results, read_kitti_labels, read_results,
    write_kitti_labels, write_pairs_to, write_results, BoxPair, FrameRecord,
};
use pairtrack::geometry::{angle_diff, EgoPose, OrientedBox3D, Vec3};
use proptest::prelude::*;
use std::f64::consts::PI;

fn arb_box() -> impl Strategy<Value = OrientedBox3D> {
    (-80.0..80.0f64, -80.0..80.0f64, -3.0..3.0f64, 0.5..4.0f64, 0.5..3.0f64, 0.5..12.0f64, -PI..PI)
        .prop_map(|(x, y, z, h, w, l, yaw)| boxed(x, y, z, h, w, l, yaw))
}

fn arb_frames() -> impl Strategy<Value = Vec<FrameRecord>> {
    let pair = (arb_box(), arb_box(), 0.0..1.0f64).prop_map(|(current, previous, score)| BoxPair { current, previous, score });
    let frame = (prop::collection::vec(pair, 0..4), -PI..PI, -100.0..100.0f64, -100.0..100.0f64);
    prop::collection::vec(frame, 100).prop_map(|fs| {
        fs.into_iter()
            .enumerate()
            .map(|(k, (pairs, yaw, x, y))| FrameRecord {
                sequence_id: "0003".into(),
                frame_index: k as u64,
                timestamp: 0.1 * k as f64 + 1e-7,
                ego_pose: EgoPose::from_yaw(yaw, Vec3::new(x, y, 0.0)),
                pairs,
            })
            .collect()
    })
}

fn close(a: &OrientedBox3D, b: &OrientedBox3D, tol: f64) -> bool {
    let (pa, pb) = (a.to_params(), b.to_params());
    (0..6).all(|k| (pa[k] - pb[k]).abs() <= tol) && angle_diff(pa[6], pb[6]).abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pair_file_roundtrip(frames in arb_frames()) {
        let mut buf = Vec::new();
        write_pairs_to(&mut buf, &frames).unwrap();
        let back = parse_pairs(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), frames.len());
        for (a, b) in frames.iter().zip(&back) {
            prop_assert_eq!(a.frame_index, b.frame_index);
            prop_assert!((a.timestamp - b.timestamp).abs() <= 1e-9);
            let (pa, pb) = (a.ego_pose.to_row_major(), b.ego_pose.to_row_major());
            prop_assert!(pa.iter().zip(&pb).all(|(x, y)| (x - y).abs() <= 1e-9));
            prop_assert_eq!(a.pairs.len(), b.pairs.len());
            for (p, q) in a.pairs.iter().zip(&b.pairs) {
                prop_assert!(close(&p.current, &q.current, 1e-9) && close(&p.previous, &q.previous, 1e-9));
                prop_assert!((p.score - q.score).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn kitti_conversion_roundtrip(b in arb_box()) {
        let [h, w, l, x, y, z, ry] = box_to_kitti(&b);
        prop_assert!(close(&box_from_kitti(h, w, l, x, y, z, ry).unwrap(), &b, 1e-9));
    }

    #[test]
    fn kitti_files_roundtrip(boxes in prop::collection::vec((arb_box(), 0.0..1.0f64), 1..30)) {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<_> = boxes.iter().enumerate().map(|(k, (b, s))| hyp(k as u64 / 3, k as u64, *b, *s)).collect();
        let labels: Vec<_> = boxes.iter().enumerate().map(|(k, (b, _))| gt(k as u64 / 3, k as u64, *b)).collect();
        let rp = dir.path().join("r.txt");
        let lp = dir.path().join("l.txt");
        write_results(&rp, &rows).unwrap();
        write_kitti_labels(&lp, &labels).unwrap();
        let rows_back = read_results(&rp).unwrap();
        let labels_back = read_kitti_labels(&lp).unwrap();
        for (a, b) in rows.iter().zip(&rows_back) {
            prop_assert_eq!((a.frame_index, a.track_id), (b.frame_index, b.track_id));
            prop_assert!(close(&a.bbox, &b.bbox, 1e-6));
            prop_assert!((a.score - b.score).abs() <= 1e-6);
        }
        for (a, b) in labels.iter().zip(&labels_back) {
            prop_assert_eq!((a.frame_index, a.gt_id), (b.frame_index, b.gt_id));
            prop_assert!(close(&a.bbox, &b.bbox, 1e-6));
        }
    }
}

#[test]
fn kitti_camera_axes() {
    // A car 10 m ahead of the camera, 1.65 m below it, facing along camera +x (ry = 0).
    let line = "0 7 Car 0 0 -1.57 100 100 200 200 1.5 1.6 3.9 2.0 1.65 10.0 0.0 0.8\n";
    let r = &parse_results(line.as_bytes()).unwrap()[0];
    assert_eq!((r.frame_index, r.track_id), (0, 7));
    let c = r.bbox.center;
    assert!((c.x - 10.0).abs() < 1e-12 && (c.y + 2.0).abs() < 1e-12 && (c.z - (-1.65 + 0.75)).abs() < 1e-12);
    assert!((r.bbox.yaw + PI / 2.0).abs() < 1e-12);
    assert_eq!(r.score, 0.8);
}

#[test]
fn labels_skip_dontcare_and_default_score() {
    let text = "0 -1 DontCare -1 -1 -10 0 0 10 10 -1 -1 -1 -1000 -1000 -1000 -10\n\
                0 1 Car 0 0 0 0 0 0 0 1.5 1.6 3.9 0 1.6 8 0\n\
                0 2 Pedestrian 0 0 0 0 0 0 0 1.8 0.6 0.6 1 1.6 8 0\n";
    assert_eq!(parse_kitti_labels(text.as_bytes()).unwrap().len(), 1);
    let rows = parse_results(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].score, 1.0);
}

#[test]
fn malformed_pair_line_is_located() {
    let good = r#"{"seq":"0","frame":0,"time":0.0,"pose":[1,0,0,0,0,1,0,0,0,0,1,0],"pairs":[]}"#;
    let text = format!("{good}\n{{\"seq\": oops}}\n");
    let err = parse_pairs(text.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}
