//! Recall-integrated accuracy: sAMOTA, AMOTA and AMOTP.
//!
//! For each recall target `r = k/L`, the hypotheses are cut at the highest
//! score threshold whose recall reaches `r`, and CLEAR is rerun on what is
//! left. Targets no threshold reaches contribute zero.

use std::collections::BTreeMap;

use super::clear::{evaluate_all, prepare, Counts, PreparedSequence};
use super::{EvalConfig, MetricsError, SequenceInput};

#[derive(Debug, Clone, PartialEq)]
pub struct RecallPoint {
    pub recall_target: f64,
    /// `None` when the target is unreachable.
    pub threshold: Option<f64>,
    /// Fractions in [0, 1] (MOTA unclamped when clamping is off).
    pub mota: f64,
    pub smota: f64,
    pub motp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallIntegrated {
    /// Percent.
    pub samota: f64,
    pub amota: f64,
    pub amotp: f64,
    pub points: Vec<RecallPoint>,
}

/// Recall-scaled MOTA at recall target `r`, clamped to [0, 1].
pub fn scaled_mota(errors: usize, num_gt: usize, r: f64) -> f64 {
    let g = num_gt as f64;
    (1.0 - (errors as f64 - (1.0 - r) * g) / (r * g)).clamp(0.0, 1.0)
}

pub fn samota_family(seqs: &[SequenceInput], cfg: &EvalConfig) -> Result<RecallIntegrated, MetricsError> {
    cfg.validate()?;
    let prepared = prepare(seqs, cfg);
    samota_prepared(&prepared, cfg)
}

pub(crate) fn samota_prepared(prepared: &[PreparedSequence], cfg: &EvalConfig) -> Result<RecallIntegrated, MetricsError> {
    let mut scores: Vec<f64> = prepared.iter().flat_map(|s| s.scores()).collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricsError::MissingScores);
    }
    scores.sort_by(|a, b| b.total_cmp(a));
    scores.dedup();

    let l = cfg.recall_points;
    let zero = RecallIntegrated { samota: 0.0, amota: 0.0, amotp: 0.0, points: Vec::new() };
    if scores.is_empty() {
        return Ok(zero);
    }

    // scores[idx] is the threshold; larger idx keeps more hypotheses
    let mut memo: BTreeMap<usize, Counts> = BTreeMap::new();
    let mut eval = |idx: usize| -> Counts {
        memo.entry(idx).or_insert_with(|| evaluate_all(prepared, Some(scores[idx]))).clone()
    };

    let last = scores.len() - 1;
    let full = eval(last);
    let g = full.num_gt;
    if g == 0 {
        return Ok(zero);
    }
    // recall(idx) ≥ k/L, compared exactly in integers
    let reaches = |c: &Counts, k: usize| c.tp * l >= k * g;

    let mut points = Vec::with_capacity(l);
    let mut lo = 0usize;
    let (mut s_sum, mut a_sum, mut p_sum) = (0.0, 0.0, 0.0);
    for k in 1..=l {
        let r = k as f64 / l as f64;
        if !reaches(&full, k) {
            points.push(RecallPoint { recall_target: r, threshold: None, mota: 0.0, smota: 0.0, motp: 0.0 });
            continue;
        }
        // first index whose recall reaches r; recall is non-decreasing in idx
        let (mut a, mut b) = (lo, last);
        while a < b {
            let mid = a + (b - a) / 2;
            if reaches(&eval(mid), k) {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        lo = a;
        let c = eval(a);
        let mut mota = 1.0 - c.errors() as f64 / g as f64;
        if cfg.clamp_mota {
            mota = mota.max(0.0);
        }
        let smota = scaled_mota(c.errors(), g, r);
        let motp = if c.tp > 0 { c.iou_sum / c.tp as f64 } else { 0.0 };
        s_sum += smota;
        a_sum += mota;
        p_sum += motp;
        points.push(RecallPoint { recall_target: r, threshold: Some(scores[a]), mota, smota, motp });
    }

    let scale = 100.0 / l as f64;
    Ok(RecallIntegrated { samota: s_sum * scale, amota: a_sum * scale, amotp: p_sum * scale, points })
}
