//! CLEAR MOT accumulation with 3D IoU as the similarity.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{EvalConfig, MetricsError, SequenceInput};
use crate::association::hungarian::max_weight_matching;
use crate::association::IouMatrix;
use crate::detio::{GtBox, TrackRow};
use crate::geometry::iou_3d;

/// Correspondences carried from frame to frame within one sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceState {
    /// gt id → hypothesis id, for matches made in the previous frame only.
    pub previous_frame: BTreeMap<u64, u64>,
    /// gt id → hypothesis id of the most recent match ever made.
    pub last_match: BTreeMap<u64, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    /// `(gt index, hypothesis index, iou)`, sorted by gt index.
    pub matches: Vec<(usize, usize, f64)>,
    pub false_positives: usize,
    pub misses: usize,
    pub id_switches: usize,
}

/// One frame of CLEAR matching.
///
/// Correspondences from the previous frame that still reach `iou_min` are kept
/// first; the rest are matched to maximize total IoU. An ID switch is counted
/// when a ground-truth object's hypothesis differs from its last match.
pub fn match_frame(gt: &[GtBox], hyp: &[TrackRow], state: &mut CorrespondenceState, iou_min: f64) -> FrameMatch {
    let iou = IouMatrix::from_fn(gt.len(), hyp.len(), |i, j| iou_3d(&gt[i].bbox, &hyp[j].bbox));
    let gt_ids: Vec<u64> = gt.iter().map(|g| g.gt_id).collect();
    let hyp_ids: Vec<u64> = hyp.iter().map(|h| h.track_id).collect();
    let active: Vec<usize> = (0..hyp.len()).collect();
    match_core(&gt_ids, &hyp_ids, &active, &iou, state, iou_min)
}

/// Matching over the hypothesis columns listed in `active`. Returned hypothesis
/// indices are column indices of `iou`.
pub(crate) fn match_core(
    gt_ids: &[u64],
    hyp_ids: &[u64],
    active: &[usize],
    iou: &IouMatrix,
    state: &mut CorrespondenceState,
    iou_min: f64,
) -> FrameMatch {
    let n = gt_ids.len();
    let mut gt_done = vec![false; n];
    let mut hyp_done = vec![false; hyp_ids.len()];
    let mut matches: Vec<(usize, usize, f64)> = Vec::new();

    for (i, gid) in gt_ids.iter().enumerate() {
        let Some(&prev_h) = state.previous_frame.get(gid) else { continue };
        let found = active
            .iter()
            .copied()
            .find(|&j| hyp_ids[j] == prev_h && !hyp_done[j] && iou.get(i, j) >= iou_min);
        if let Some(j) = found {
            gt_done[i] = true;
            hyp_done[j] = true;
            matches.push((i, j, iou.get(i, j)));
        }
    }

    let free_gt: Vec<usize> = (0..n).filter(|&i| !gt_done[i]).collect();
    let free_hyp: Vec<usize> = active.iter().copied().filter(|&j| !hyp_done[j]).collect();
    if !free_gt.is_empty() && !free_hyp.is_empty() {
        let mut weights = Vec::with_capacity(free_gt.len() * free_hyp.len());
        for &i in &free_gt {
            for &j in &free_hyp {
                let v = iou.get(i, j);
                weights.push(if v >= iou_min { v } else { 0.0 });
            }
        }
        for (a, b) in max_weight_matching(free_gt.len(), free_hyp.len(), &weights) {
            let (i, j) = (free_gt[a], free_hyp[b]);
            matches.push((i, j, iou.get(i, j)));
        }
    }
    matches.sort_by_key(|m| m.0);

    let mut id_switches = 0;
    let mut next_frame = BTreeMap::new();
    for &(i, j, _) in &matches {
        let (gid, hid) = (gt_ids[i], hyp_ids[j]);
        if let Some(&last) = state.last_match.get(&gid) {
            if last != hid {
                id_switches += 1;
            }
        }
        state.last_match.insert(gid, hid);
        next_frame.insert(gid, hid);
    }
    state.previous_frame = next_frame;

    FrameMatch {
        false_positives: active.len() - matches.len(),
        misses: n - matches.len(),
        id_switches,
        matches,
    }
}

/// CLEAR summary over a set of sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearMetrics {
    /// Percent.
    pub mota: f64,
    /// Mean matched 3D IoU, percent.
    pub motp: f64,
    pub id_switches: usize,
    pub fragmentations: usize,
    /// Percent of ground-truth trajectories matched for at least 80% of their frames.
    pub mostly_tracked: f64,
    /// Percent matched for at most 20%.
    pub mostly_lost: f64,
    pub false_positives: usize,
    pub misses: usize,
    pub true_positives: usize,
    pub num_gt: usize,
    pub num_trajectories: usize,
}

pub(crate) struct PreparedFrame {
    gt_ids: Vec<u64>,
    hyp_ids: Vec<u64>,
    hyp_scores: Vec<f64>,
    iou: IouMatrix,
}

/// A sequence with its warm-up frames dropped and IoUs computed once.
pub(crate) struct PreparedSequence {
    frames: Vec<PreparedFrame>,
    iou_min: f64,
}

impl PreparedSequence {
    pub(crate) fn new(seq: &SequenceInput, cfg: &EvalConfig) -> Self {
        let mut by_frame: BTreeMap<u64, (Vec<&GtBox>, Vec<&TrackRow>)> = BTreeMap::new();
        for g in seq.gt.iter().filter(|g| g.frame_index >= cfg.warmup_frames) {
            by_frame.entry(g.frame_index).or_default().0.push(g);
        }
        for h in seq.hyp.iter().filter(|h| h.frame_index >= cfg.warmup_frames) {
            by_frame.entry(h.frame_index).or_default().1.push(h);
        }
        let frames = by_frame
            .into_values()
            .map(|(gt, hyp)| PreparedFrame {
                gt_ids: gt.iter().map(|g| g.gt_id).collect(),
                hyp_ids: hyp.iter().map(|h| h.track_id).collect(),
                hyp_scores: hyp.iter().map(|h| h.score).collect(),
                iou: IouMatrix::from_fn(gt.len(), hyp.len(), |i, j| iou_3d(&gt[i].bbox, &hyp[j].bbox)),
            })
            .collect();
        Self { frames, iou_min: cfg.iou_min }
    }

    pub(crate) fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().flat_map(|f| f.hyp_scores.iter().copied())
    }
}

/// Raw counts from one evaluation pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Counts {
    pub num_gt: usize,
    pub tp: usize,
    pub fp: usize,
    pub misses: usize,
    pub ids: usize,
    pub iou_sum: f64,
    pub frags: usize,
    pub trajectories: usize,
    pub mostly_tracked: usize,
    pub mostly_lost: usize,
}

impl Counts {
    fn merge(mut self, o: &Counts) -> Counts {
        self.num_gt += o.num_gt;
        self.tp += o.tp;
        self.fp += o.fp;
        self.misses += o.misses;
        self.ids += o.ids;
        self.iou_sum += o.iou_sum;
        self.frags += o.frags;
        self.trajectories += o.trajectories;
        self.mostly_tracked += o.mostly_tracked;
        self.mostly_lost += o.mostly_lost;
        self
    }

    pub fn errors(&self) -> usize {
        self.fp + self.misses + self.ids
    }
}

#[derive(Default)]
struct TrajectoryRecord {
    present: usize,
    matched: usize,
    last_matched: Option<bool>,
    ever_matched: bool,
    frags: usize,
}

/// Evaluates one prepared sequence, keeping only hypotheses with score ≥ `min_score`.
pub(crate) fn evaluate_sequence(seq: &PreparedSequence, min_score: Option<f64>) -> Counts {
    let mut state = CorrespondenceState::default();
    let mut traj: BTreeMap<u64, TrajectoryRecord> = BTreeMap::new();
    let mut c = Counts::default();

    for f in &seq.frames {
        let active: Vec<usize> = (0..f.hyp_ids.len())
            .filter(|&j| min_score.is_none_or(|s| f.hyp_scores[j] >= s))
            .collect();
        let m = match_core(&f.gt_ids, &f.hyp_ids, &active, &f.iou, &mut state, seq.iou_min);
        c.num_gt += f.gt_ids.len();
        c.tp += m.matches.len();
        c.fp += m.false_positives;
        c.misses += m.misses;
        c.ids += m.id_switches;
        for &(_, _, v) in &m.matches {
            c.iou_sum += v;
        }
        let mut matched = vec![false; f.gt_ids.len()];
        for &(i, _, _) in &m.matches {
            matched[i] = true;
        }
        for (i, gid) in f.gt_ids.iter().enumerate() {
            let t = traj.entry(*gid).or_default();
            t.present += 1;
            if matched[i] {
                t.matched += 1;
                if t.ever_matched && t.last_matched == Some(false) {
                    t.frags += 1;
                }
                t.ever_matched = true;
            }
            t.last_matched = Some(matched[i]);
        }
    }

    for t in traj.values() {
        c.trajectories += 1;
        c.frags += t.frags;
        // ratio thresholds compared in integers: matched/present ≥ 0.8, ≤ 0.2
        if 5 * t.matched >= 4 * t.present {
            c.mostly_tracked += 1;
        }
        if 5 * t.matched <= t.present {
            c.mostly_lost += 1;
        }
    }
    c
}

pub(crate) fn prepare(seqs: &[SequenceInput], cfg: &EvalConfig) -> Vec<PreparedSequence> {
    seqs.par_iter().map(|s| PreparedSequence::new(s, cfg)).collect()
}

pub(crate) fn evaluate_all(prepared: &[PreparedSequence], min_score: Option<f64>) -> Counts {
    let parts: Vec<Counts> = prepared.par_iter().map(|s| evaluate_sequence(s, min_score)).collect();
    parts.iter().fold(Counts::default(), Counts::merge)
}

pub(crate) fn percent(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        100.0 * num / den
    } else {
        0.0
    }
}

pub(crate) fn to_clear(c: &Counts) -> ClearMetrics {
    let mota = if c.num_gt > 0 {
        100.0 * (1.0 - c.errors() as f64 / c.num_gt as f64)
    } else if c.errors() == 0 {
        100.0
    } else {
        0.0
    };
    ClearMetrics {
        mota,
        motp: percent(c.iou_sum, c.tp as f64),
        id_switches: c.ids,
        fragmentations: c.frags,
        mostly_tracked: percent(c.mostly_tracked as f64, c.trajectories as f64),
        mostly_lost: percent(c.mostly_lost as f64, c.trajectories as f64),
        false_positives: c.fp,
        misses: c.misses,
        true_positives: c.tp,
        num_gt: c.num_gt,
        num_trajectories: c.trajectories,
    }
}

pub fn clear_metrics(seqs: &[SequenceInput], cfg: &EvalConfig) -> Result<ClearMetrics, MetricsError> {
    cfg.validate()?;
    let prepared = prepare(seqs, cfg);
    Ok(to_clear(&evaluate_all(&prepared, None)))
}
