//! Pair-to-track association by 3D IoU.
//!
//! A pair is compared through its previous-frame box, which lives at the same
//! instant as the tracks' state boxes.

pub mod hungarian;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detio::BoxPair;
use crate::geometry::{iou_3d, OrientedBox3D};

/// Below this many entries the cost matrix is filled on the calling thread.
const PARALLEL_MIN_ENTRIES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssociationMethod {
    #[default]
    Greedy,
    Optimal,
}

impl fmt::Display for AssociationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssociationMethod::Greedy => "greedy",
            AssociationMethod::Optimal => "optimal",
        })
    }
}

impl FromStr for AssociationMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" => Ok(AssociationMethod::Greedy),
            "optimal" | "hungarian" => Ok(AssociationMethod::Optimal),
            other => Err(format!("unknown association method {other:?} (expected greedy or optimal)")),
        }
    }
}

/// Dense row-major IoU matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IouMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl IouMatrix {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged matrix");
        Self { rows: n, cols: m, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub pair: usize,
    pub track: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// Sorted by pair index.
    pub matches: Vec<Match>,
    pub unmatched_pairs: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

impl Assignment {
    /// Sum of matched IoUs, accumulated in pair-index order.
    pub fn total_iou(&self) -> f64 {
        self.matches.iter().map(|m| m.iou).sum()
    }

    fn from_matches(mut matches: Vec<Match>, rows: usize, cols: usize) -> Self {
        matches.sort_by_key(|m| m.pair);
        let mut pair_used = vec![false; rows];
        let mut track_used = vec![false; cols];
        for m in &matches {
            pair_used[m.pair] = true;
            track_used[m.track] = true;
        }
        Assignment {
            matches,
            unmatched_pairs: (0..rows).filter(|&i| !pair_used[i]).collect(),
            unmatched_tracks: (0..cols).filter(|&j| !track_used[j]).collect(),
        }
    }
}

/// Entry `(i, j)` is the IoU of `pairs[i].previous` with `track_boxes[j]`.
pub fn build_cost_matrix(pairs: &[BoxPair], track_boxes: &[OrientedBox3D]) -> IouMatrix {
    let rows = pairs.len();
    let cols = track_boxes.len();
    let row_of = |p: &BoxPair| track_boxes.iter().map(|t| iou_3d(&p.previous, t)).collect::<Vec<f64>>();
    let data: Vec<f64> = if rows * cols >= PARALLEL_MIN_ENTRIES {
        pairs.par_iter().flat_map_iter(row_of).collect()
    } else {
        pairs.iter().flat_map(row_of).collect()
    };
    IouMatrix { rows, cols, data }
}

pub fn associate(
    pairs: &[BoxPair],
    track_boxes: &[OrientedBox3D],
    threshold: f64,
    method: AssociationMethod,
) -> Assignment {
    let matrix = build_cost_matrix(pairs, track_boxes);
    assign(&matrix, threshold, method)
}

/// Solves the assignment on a precomputed IoU matrix (rows = pairs, cols = tracks).
pub fn assign(matrix: &IouMatrix, threshold: f64, method: AssociationMethod) -> Assignment {
    let matches = match method {
        AssociationMethod::Greedy => greedy(matrix, threshold),
        AssociationMethod::Optimal => optimal(matrix, threshold),
    };
    Assignment::from_matches(matches, matrix.rows, matrix.cols)
}

/// Repeatedly takes the largest remaining IoU at or above `threshold`; ties go
/// to the lowest pair index, then the lowest track index.
fn greedy(matrix: &IouMatrix, threshold: f64) -> Vec<Match> {
    let mut candidates: Vec<Match> = (0..matrix.rows)
        .flat_map(|i| (0..matrix.cols).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let iou = matrix.get(i, j);
            (iou >= threshold).then_some(Match { pair: i, track: j, iou })
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.iou.total_cmp(&a.iou).then(a.pair.cmp(&b.pair)).then(a.track.cmp(&b.track))
    });

    let mut pair_used = vec![false; matrix.rows];
    let mut track_used = vec![false; matrix.cols];
    let mut out = Vec::new();
    for c in candidates {
        if pair_used[c.pair] || track_used[c.track] {
            continue;
        }
        pair_used[c.pair] = true;
        track_used[c.track] = true;
        out.push(c);
    }
    out
}

/// Maximizes total matched IoU over matchings whose entries all reach
/// `threshold`. Sub-threshold entries get zero weight and are never kept.
fn optimal(matrix: &IouMatrix, threshold: f64) -> Vec<Match> {
    let weights: Vec<f64> = matrix.data.iter().map(|&v| if v >= threshold { v } else { 0.0 }).collect();
    hungarian::max_weight_matching(matrix.rows, matrix.cols, &weights)
        .into_iter()
        .map(|(i, j)| Match { pair: i, track: j, iou: matrix.get(i, j) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Dims, Vec3};

    fn bx(x: f64, y: f64) -> OrientedBox3D {
        OrientedBox3D::new(Vec3::new(x, y, 0.0), Dims::new(1.5, 2.0, 4.0), 0.0).unwrap()
    }

    fn pair_with_prev(prev: OrientedBox3D) -> BoxPair {
        BoxPair { current: prev, previous: prev, score: 1.0 }
    }

    #[test]
    fn empty_inputs() {
        let m = build_cost_matrix(&[], &[bx(0.0, 0.0), bx(5.0, 0.0)]);
        assert_eq!((m.rows(), m.cols()), (0, 2));
        let a = associate(&[], &[], 0.5, AssociationMethod::Greedy);
        assert_eq!(a, Assignment::default());
        let a = associate(&[], &[bx(0.0, 0.0)], 0.5, AssociationMethod::Optimal);
        assert_eq!(a.unmatched_tracks, vec![0]);
    }

    #[test]
    fn identical_box_gives_unit_entry() {
        let b = bx(3.0, 1.0);
        let m = build_cost_matrix(&[pair_with_prev(b)], &[b]);
        assert!((m.get(0, 0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_match_above_threshold() {
        let m = IouMatrix::from_rows(vec![vec![0.8]]);
        for method in [AssociationMethod::Greedy, AssociationMethod::Optimal] {
            let a = assign(&m, 0.5, method);
            assert_eq!(a.matches, vec![Match { pair: 0, track: 0, iou: 0.8 }]);
        }
        let a = assign(&m, 0.9, AssociationMethod::Greedy);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_pairs, vec![0]);
    }

    #[test]
    fn greedy_versus_optimal_two_by_two() {
        // all matchings above 0.25: {(0,0)} 0.9, {(0,1),(1,0)} 1.3, {(0,1)} 0.6, {(1,0)} 0.7
        let m = IouMatrix::from_rows(vec![vec![0.9, 0.6], vec![0.7, 0.1]]);
        let g = assign(&m, 0.25, AssociationMethod::Greedy);
        assert_eq!(g.matches.iter().map(|x| (x.pair, x.track)).collect::<Vec<_>>(), vec![(0, 0)]);
        assert_eq!(g.unmatched_pairs, vec![1]);
        let o = assign(&m, 0.25, AssociationMethod::Optimal);
        assert_eq!(o.matches.iter().map(|x| (x.pair, x.track)).collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        assert!((o.total_iou() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn greedy_tie_break() {
        let m = IouMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let g = assign(&m, 0.1, AssociationMethod::Greedy);
        assert_eq!(g.matches.iter().map(|x| (x.pair, x.track)).collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("greedy".parse::<AssociationMethod>().unwrap(), AssociationMethod::Greedy);
        assert_eq!("Optimal".parse::<AssociationMethod>().unwrap(), AssociationMethod::Optimal);
        assert!("best".parse::<AssociationMethod>().is_err());
    }
}
