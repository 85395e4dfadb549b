//! File formats: paired detections (JSON Lines), standalone pose files, and
//! KITTI tracking labels/results.
//!
//! KITTI files use camera axes (x right, y down, z forward) with the box
//! reference point on the bottom face. Internally everything is z-up with the
//! reference point at the centroid, so rows are converted on the way in and out:
//!
//! | internal | KITTI camera            |
//! |----------|-------------------------|
//! | x        | z                       |
//! | y        | −x                      |
//! | z        | −y + h/2                |
//! | yaw      | −ry − π/2 (wrapped)     |

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Dims, EgoPose, OrientedBox3D, Vec3};

#[derive(Debug, Error)]
pub enum DetioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<usize>,
        message: String,
    },
    #[error("line {line}: {message}")]
    Monotonicity { line: usize, message: String },
}

impl DetioError {
    fn parse(line: usize, column: Option<usize>, message: impl Into<String>) -> Self {
        DetioError::Parse { line, column, message: message.into() }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        DetioError::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T> = std::result::Result<T, DetioError>;

/// One paired detection: the object's box now and its box one frame earlier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPair {
    pub current: OrientedBox3D,
    pub previous: OrientedBox3D,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub sequence_id: String,
    pub frame_index: u64,
    /// Seconds, strictly increasing within a sequence.
    pub timestamp: f64,
    pub ego_pose: EgoPose,
    pub pairs: Vec<BoxPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectClass {
    Car,
}

impl ObjectClass {
    pub fn kitti_name(&self) -> &'static str {
        match self {
            ObjectClass::Car => "Car",
        }
    }

    pub fn from_kitti_name(name: &str) -> Option<Self> {
        match name {
            "Car" => Some(ObjectClass::Car),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtBox {
    pub frame_index: u64,
    pub gt_id: u64,
    pub bbox: OrientedBox3D,
    pub object_class: ObjectClass,
}

/// A tracker output row, the body of a KITTI results file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub frame_index: u64,
    pub track_id: u64,
    pub bbox: OrientedBox3D,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
struct PairJson {
    cur: [f64; 7],
    prev: [f64; 7],
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    seq: String,
    frame: u64,
    time: f64,
    pose: [f64; 12],
    pairs: Vec<PairJson>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| DetioError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| DetioError::io(path, e))
}

/// Reads a pair file. Records come back grouped by sequence (in order of first
/// appearance) and sorted by frame index; poses are returned as stored.
pub fn read_pairs(path: &Path) -> Result<Vec<FrameRecord>> {
    parse_pairs(open(path)?)
}

pub fn parse_pairs<R: Read>(reader: R) -> Result<Vec<FrameRecord>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_seq: HashMap<String, Vec<FrameRecord>> = HashMap::new();

    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DetioError::parse(lineno, None, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: FrameJson = serde_json::from_str(&line)
            .map_err(|e| DetioError::parse(lineno, Some(e.column()), e.to_string()))?;
        let record = frame_from_json(raw, lineno)?;

        let frames = by_seq.entry(record.sequence_id.clone()).or_insert_with(|| {
            order.push(record.sequence_id.clone());
            Vec::new()
        });
        if let Some(last) = frames.last() {
            if record.frame_index <= last.frame_index {
                return Err(DetioError::Monotonicity {
                    line: lineno,
                    message: format!(
                        "sequence {:?}: frame {} does not follow frame {}",
                        record.sequence_id, record.frame_index, last.frame_index
                    ),
                });
            }
            if record.timestamp <= last.timestamp {
                return Err(DetioError::Monotonicity {
                    line: lineno,
                    message: format!(
                        "sequence {:?}: timestamp {} does not follow {}",
                        record.sequence_id, record.timestamp, last.timestamp
                    ),
                });
            }
        }
        frames.push(record);
    }

    Ok(order.into_iter().flat_map(|seq| by_seq.remove(&seq).unwrap_or_default()).collect())
}

fn frame_from_json(raw: FrameJson, line: usize) -> Result<FrameRecord> {
    if !raw.time.is_finite() {
        return Err(DetioError::parse(line, None, "non-finite timestamp"));
    }
    let ego_pose =
        EgoPose::from_row_major(raw.pose).map_err(|e| DetioError::parse(line, None, e.to_string()))?;
    let mut pairs = Vec::with_capacity(raw.pairs.len());
    for (k, p) in raw.pairs.into_iter().enumerate() {
        let current = OrientedBox3D::from_params(p.cur)
            .map_err(|e| DetioError::parse(line, None, format!("pair {k} cur: {e}")))?;
        let previous = OrientedBox3D::from_params(p.prev)
            .map_err(|e| DetioError::parse(line, None, format!("pair {k} prev: {e}")))?;
        if !(0.0..=1.0).contains(&p.score) {
            return Err(DetioError::parse(line, None, format!("pair {k} score {} outside [0, 1]", p.score)));
        }
        pairs.push(BoxPair { current, previous, score: p.score });
    }
    Ok(FrameRecord {
        sequence_id: raw.seq,
        frame_index: raw.frame,
        timestamp: raw.time,
        ego_pose,
        pairs,
    })
}

pub fn write_pairs(path: &Path, records: &[FrameRecord]) -> Result<()> {
    let mut w = create(path)?;
    write_pairs_to(&mut w, records).map_err(|e| DetioError::io(path, e))?;
    w.flush().map_err(|e| DetioError::io(path, e))
}

pub fn write_pairs_to<W: Write>(w: &mut W, records: &[FrameRecord]) -> std::io::Result<()> {
    for r in records {
        let raw = FrameJson {
            seq: r.sequence_id.clone(),
            frame: r.frame_index,
            time: r.timestamp,
            pose: r.ego_pose.to_row_major(),
            pairs: r
                .pairs
                .iter()
                .map(|p| PairJson {
                    cur: p.current.to_params(),
                    prev: p.previous.to_params(),
                    score: p.score,
                })
                .collect(),
        };
        serde_json::to_writer(&mut *w, &raw)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Splits records into per-sequence runs, keeping the input order.
pub fn group_by_sequence(records: Vec<FrameRecord>) -> Vec<(String, Vec<FrameRecord>)> {
    let mut groups: Vec<(String, Vec<FrameRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(seq, _)| *seq == r.sequence_id) {
            Some((_, frames)) => frames.push(r),
            None => groups.push((r.sequence_id.clone(), vec![r])),
        }
    }
    groups
}

pub fn read_poses(path: &Path) -> Result<Vec<EgoPose>> {
    parse_poses(open(path)?)
}

pub fn parse_poses<R: Read>(reader: R) -> Result<Vec<EgoPose>> {
    let mut poses = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DetioError::parse(lineno, None, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut m = [0.0; 12];
        let mut count = 0;
        for (col, tok) in line.split_whitespace().enumerate() {
            if col >= 12 {
                return Err(DetioError::parse(lineno, Some(col + 1), "expected 12 values"));
            }
            m[col] = parse_f64(tok, lineno, col + 1)?;
            count += 1;
        }
        if count != 12 {
            return Err(DetioError::parse(lineno, None, format!("expected 12 values, got {count}")));
        }
        poses.push(EgoPose::from_row_major(m).map_err(|e| DetioError::parse(lineno, None, e.to_string()))?);
    }
    Ok(poses)
}

pub fn write_poses(path: &Path, poses: &[EgoPose]) -> Result<()> {
    let mut w = create(path)?;
    for p in poses {
        let line = p.to_row_major().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(w, "{line}").map_err(|e| DetioError::io(path, e))?;
    }
    w.flush().map_err(|e| DetioError::io(path, e))
}

fn parse_f64(tok: &str, line: usize, column: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| DetioError::parse(line, Some(column), format!("expected a number, got {tok:?}")))?;
    if !v.is_finite() {
        return Err(DetioError::parse(line, Some(column), format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

/// Converts a KITTI camera-frame box (bottom-center reference) to the internal box.
pub fn box_from_kitti(h: f64, w: f64, l: f64, x: f64, y: f64, z: f64, ry: f64) -> std::result::Result<OrientedBox3D, String> {
    OrientedBox3D::new(
        Vec3::new(z, -x, -y + 0.5 * h),
        Dims::new(h, w, l),
        normalize_angle(-ry - FRAC_PI_2),
    )
    .map_err(|e| e.to_string())
}

/// Inverse of [`box_from_kitti`]: `[h, w, l, x, y, z, ry]` in KITTI camera axes.
pub fn box_to_kitti(b: &OrientedBox3D) -> [f64; 7] {
    let h = b.dims.h;
    [
        h,
        b.dims.w,
        b.dims.l,
        -b.center.y,
        -(b.center.z - 0.5 * h),
        b.center.x,
        normalize_angle(-b.yaw - FRAC_PI_2),
    ]
}

struct KittiRow {
    frame: u64,
    id: u64,
    class: ObjectClass,
    bbox: OrientedBox3D,
    score: Option<f64>,
}

/// Parses one KITTI tracking row. `Ok(None)` means the row is a class that is
/// not tracked (including `DontCare`).
fn parse_kitti_row(line: &str, lineno: usize) -> Result<Option<KittiRow>> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 17 && toks.len() != 18 {
        return Err(DetioError::parse(
            lineno,
            None,
            format!("expected 17 or 18 columns, got {}", toks.len()),
        ));
    }
    let frame: u64 = toks[0]
        .parse()
        .map_err(|_| DetioError::parse(lineno, Some(1), format!("bad frame index {:?}", toks[0])))?;
    let raw_id: i64 = toks[1]
        .parse()
        .map_err(|_| DetioError::parse(lineno, Some(2), format!("bad track id {:?}", toks[1])))?;
    let Some(class) = ObjectClass::from_kitti_name(toks[2]) else {
        return Ok(None);
    };
    if raw_id < 0 {
        return Err(DetioError::parse(lineno, Some(2), format!("negative track id {raw_id}")));
    }
    let mut nums = [0.0; 15];
    for (k, tok) in toks[3..].iter().enumerate() {
        nums[k] = parse_f64(tok, lineno, k + 4)?;
    }
    // truncated, occluded, alpha and the 2D box (nums[0..7]) are not used
    let [h, w, l, x, y, z, ry] = [nums[7], nums[8], nums[9], nums[10], nums[11], nums[12], nums[13]];
    let bbox = box_from_kitti(h, w, l, x, y, z, ry).map_err(|m| DetioError::parse(lineno, Some(11), m))?;
    let score = if toks.len() == 18 { Some(nums[14]) } else { None };
    Ok(Some(KittiRow { frame, id: raw_id as u64, class, bbox, score }))
}

fn parse_kitti<R: Read>(reader: R) -> Result<Vec<KittiRow>> {
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DetioError::parse(lineno, None, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(row) = parse_kitti_row(&line, lineno)? {
            if !seen.insert((row.frame, row.id)) {
                return Err(DetioError::Monotonicity {
                    line: lineno,
                    message: format!("duplicate row for frame {} id {}", row.frame, row.id),
                });
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn read_kitti_labels(path: &Path) -> Result<Vec<GtBox>> {
    parse_kitti_labels(open(path)?)
}

pub fn parse_kitti_labels<R: Read>(reader: R) -> Result<Vec<GtBox>> {
    Ok(parse_kitti(reader)?
        .into_iter()
        .map(|r| GtBox { frame_index: r.frame, gt_id: r.id, bbox: r.bbox, object_class: r.class })
        .collect())
}

/// Reads tracker results. A missing trailing score column reads as 1.0, so
/// label files can be evaluated as results.
pub fn read_results(path: &Path) -> Result<Vec<TrackRow>> {
    parse_results(open(path)?)
}

pub fn parse_results<R: Read>(reader: R) -> Result<Vec<TrackRow>> {
    Ok(parse_kitti(reader)?
        .into_iter()
        .map(|r| TrackRow {
            frame_index: r.frame,
            track_id: r.id,
            bbox: r.bbox,
            score: r.score.unwrap_or(1.0),
        })
        .collect())
}

fn kitti_line(frame: u64, id: u64, class: ObjectClass, b: &OrientedBox3D, score: Option<f64>) -> String {
    let k = box_to_kitti(b);
    let mut line = format!(
        "{frame} {id} {} 0 0 -10.000000 0.000000 0.000000 0.000000 0.000000 {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
        class.kitti_name(),
        k[0],
        k[1],
        k[2],
        k[3],
        k[4],
        k[5],
        k[6]
    );
    if let Some(s) = score {
        line.push_str(&format!(" {s:.6}"));
    }
    line
}

/// Writes KITTI tracking results, one row per (frame, track), ordered by frame
/// then track id.
pub fn write_results(path: &Path, rows: &[TrackRow]) -> Result<()> {
    let mut sorted: Vec<&TrackRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.frame_index, r.track_id));
    let mut w = create(path)?;
    for r in sorted {
        writeln!(w, "{}", kitti_line(r.frame_index, r.track_id, ObjectClass::Car, &r.bbox, Some(r.score)))
            .map_err(|e| DetioError::io(path, e))?;
    }
    w.flush().map_err(|e| DetioError::io(path, e))
}

/// Writes ground-truth labels (17 columns, no score), ordered by frame then id.
pub fn write_kitti_labels(path: &Path, boxes: &[GtBox]) -> Result<()> {
    let mut sorted: Vec<&GtBox> = boxes.iter().collect();
    sorted.sort_by_key(|g| (g.frame_index, g.gt_id));
    let mut w = create(path)?;
    for g in sorted {
        writeln!(w, "{}", kitti_line(g.frame_index, g.gt_id, g.object_class, &g.bbox, None))
            .map_err(|e| DetioError::io(path, e))?;
    }
    w.flush().map_err(|e| DetioError::io(path, e))
}

/// Resolves a KITTI path to `sequence id → file`. A directory contributes every
/// `*.txt` inside it keyed by file stem; a single file is one sequence.
pub fn sequence_files(path: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    if path.is_dir() {
        let entries = std::fs::read_dir(path).map_err(|e| DetioError::io(path, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| DetioError::io(path, e))?;
            let p = entry.path();
            if p.is_file() && p.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    out.insert(stem.to_string(), p.clone());
                }
            }
        }
    } else {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| DetioError::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)))?;
        if !path.exists() {
            return Err(DetioError::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
        out.insert(stem.to_string(), path.to_path_buf());
    }
    Ok(out)
}
