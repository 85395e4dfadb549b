//! Tracking evaluation: 3D CLEAR metrics and the recall-integrated
//! sAMOTA/AMOTA/AMOTP family.

mod clear;
mod samota;

pub use clear::{clear_metrics, match_frame, ClearMetrics, CorrespondenceState, FrameMatch};
pub use samota::{samota_family, scaled_mota, RecallIntegrated, RecallPoint};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detio::{GtBox, TrackRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("sequence sets differ: only in ground truth {gt_only:?}, only in results {hyp_only:?}")]
    MismatchedSequences { gt_only: Vec<String>, hyp_only: Vec<String> },
    #[error("hypotheses without a usable confidence score")]
    MissingScores,
    #[error("invalid evaluation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Minimum 3D IoU for a ground-truth/hypothesis match.
    pub iou_min: f64,
    /// Number of recall points L.
    pub recall_points: usize,
    /// Clamp each MOTA_r at zero before averaging into AMOTA.
    pub clamp_mota: bool,
    /// Frames with index below this are left out of every count.
    pub warmup_frames: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { iou_min: 0.5, recall_points: 40, clamp_mota: true, warmup_frames: 0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.iou_min > 0.0 && self.iou_min <= 1.0) {
            return Err(MetricsError::Config(format!("iou_min must be in (0, 1], got {}", self.iou_min)));
        }
        if self.recall_points < 1 {
            return Err(MetricsError::Config("recall_points must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ground truth and hypotheses for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInput {
    pub sequence_id: String,
    pub gt: Vec<GtBox>,
    pub hyp: Vec<TrackRow>,
}

/// Joins per-sequence ground truth and results; both sides must cover the same ids.
pub fn pair_sequences(
    mut gt: BTreeMap<String, Vec<GtBox>>,
    mut hyp: BTreeMap<String, Vec<TrackRow>>,
) -> Result<Vec<SequenceInput>, MetricsError> {
    let gt_only: Vec<String> = gt.keys().filter(|k| !hyp.contains_key(*k)).cloned().collect();
    let hyp_only: Vec<String> = hyp.keys().filter(|k| !gt.contains_key(*k)).cloned().collect();
    if !gt_only.is_empty() || !hyp_only.is_empty() {
        return Err(MetricsError::MismatchedSequences { gt_only, hyp_only });
    }
    let ids: Vec<String> = gt.keys().cloned().collect();
    Ok(ids
        .into_iter()
        .map(|id| SequenceInput {
            gt: gt.remove(&id).unwrap_or_default(),
            hyp: hyp.remove(&id).unwrap_or_default(),
            sequence_id: id,
        })
        .collect())
}

/// Everything the `evaluate` command reports. Percentages are in [0, 100]
/// except MOTA, which can go negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samota: f64,
    pub amota: f64,
    pub amotp: f64,
    pub mota: f64,
    pub motp: f64,
    pub ids: usize,
    pub frags: usize,
    pub mt: f64,
    pub ml: f64,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub num_gt: usize,
    pub num_trajectories: usize,
    pub iou_min: f64,
    pub recall_points: usize,
    pub warmup_frames: u64,
}

pub fn evaluate(seqs: &[SequenceInput], cfg: &EvalConfig) -> Result<MetricsReport, MetricsError> {
    cfg.validate()?;
    let prepared = clear::prepare(seqs, cfg);
    let clear = clear::to_clear(&clear::evaluate_all(&prepared, None));
    let integrated = samota::samota_prepared(&prepared, cfg)?;
    Ok(MetricsReport {
        samota: integrated.samota,
        amota: integrated.amota,
        amotp: integrated.amotp,
        mota: clear.mota,
        motp: clear.motp,
        ids: clear.id_switches,
        frags: clear.fragmentations,
        mt: clear.mostly_tracked,
        ml: clear.mostly_lost,
        fp: clear.false_positives,
        fn_: clear.misses,
        num_gt: clear.num_gt,
        num_trajectories: clear.num_trajectories,
        iou_min: cfg.iou_min,
        recall_points: cfg.recall_points,
        warmup_frames: cfg.warmup_frames,
    })
}

impl MetricsReport {
    /// Aligned text table; the first nine columns follow the usual KITTI 3D MOT layout.
    pub fn to_table(&self) -> String {
        let headers = [
            "sAMOTA", "AMOTA", "AMOTP", "MOTA", "MOTP", "IDs", "Frags", "MT", "ML", "FP", "FN", "num_gt",
        ];
        let values = [
            format!("{:.2}", self.samota),
            format!("{:.2}", self.amota),
            format!("{:.2}", self.amotp),
            format!("{:.2}", self.mota),
            format!("{:.2}", self.motp),
            self.ids.to_string(),
            self.frags.to_string(),
            format!("{:.2}", self.mt),
            format!("{:.2}", self.ml),
            self.fp.to_string(),
            self.fn_.to_string(),
            self.num_gt.to_string(),
        ];
        let label = format!("3D IoU = {}", self.iou_min);
        let mut out = String::new();
        let _ = write!(out, "{label:<14}");
        for (h, v) in headers.iter().zip(values.iter()) {
            let width = h.len().max(v.len()) + 2;
            let _ = write!(out, "{h:>width$}");
        }
        out.push('\n');
        let _ = write!(out, "{:<14}", "");
        for (h, v) in headers.iter().zip(values.iter()) {
            let width = h.len().max(v.len()) + 2;
            let _ = write!(out, "{v:>width$}");
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "recall points L = {}; frames before index {} excluded (tracker warm-up)",
            self.recall_points, self.warmup_frames
        );
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
