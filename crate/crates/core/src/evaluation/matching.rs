//! Maximum-weight bipartite matching of predicted and gold answer spans.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::meets_threshold;
use crate::span::{token_iou, TokenSpan};

/// Slack for comparing sums of IOU weights.
const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgumentPair {
    pub gold: usize,
    pub pred: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Matching {
    /// Sorted by gold index.
    pub pairs: Vec<ArgumentPair>,
    pub total_iou: f64,
}

impl Matching {
    pub fn tp(&self) -> usize {
        self.pairs.len()
    }
}

/// Edge weights indexed `[gold][pred]`; 0 marks a missing edge.
fn edge_weights(pred: &[TokenSpan], gold: &[TokenSpan], tau: f64) -> Vec<Vec<f64>> {
    gold.iter()
        .map(|g| {
            pred.iter()
                .map(|p| {
                    let iou = token_iou(p, g);
                    if iou > 0.0 && meets_threshold(iou, tau) {
                        iou
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// One-to-one matching of maximal total IOU over edges with `iou >= tau`.
/// Among optimal matchings the one whose (gold, pred) pair sequence is
/// lexicographically smallest is returned.
pub fn match_spans(pred: &[TokenSpan], gold: &[TokenSpan], tau: f64) -> Matching {
    let w = edge_weights(pred, gold, tau);
    let n_pred = pred.len();

    let row_degree = |g: usize| w[g].iter().filter(|&&x| x > 0.0).count();
    let col_degree = |p: usize| w.iter().filter(|row| row[p] > 0.0).count();
    if (0..gold.len()).all(|g| row_degree(g) <= 1) && (0..n_pred).all(|p| col_degree(p) <= 1) {
        let mut m = Matching::default();
        for (g, row) in w.iter().enumerate() {
            if let Some(p) = row.iter().position(|&x| x > 0.0) {
                m.pairs.push(ArgumentPair { gold: g, pred: p, iou: row[p] });
                m.total_iou += row[p];
            }
        }
        return m;
    }

    let all_rows: Vec<usize> = (0..gold.len()).collect();
    let all_cols: Vec<usize> = (0..n_pred).collect();
    let best = max_weight(&w, &all_rows, &all_cols);

    let mut used = vec![false; n_pred];
    let mut acc = 0.0;
    let mut m = Matching::default();
    for g in 0..gold.len() {
        let rest_rows: Vec<usize> = (g + 1..gold.len()).collect();
        for p in 0..n_pred {
            if used[p] || w[g][p] <= 0.0 {
                continue;
            }
            let rest_cols: Vec<usize> = (0..n_pred).filter(|&c| !used[c] && c != p).collect();
            let rest = max_weight(&w, &rest_rows, &rest_cols);
            if acc + w[g][p] + rest >= best - WEIGHT_TOLERANCE {
                used[p] = true;
                acc += w[g][p];
                m.pairs.push(ArgumentPair { gold: g, pred: p, iou: w[g][p] });
                break;
            }
        }
    }
    m.total_iou = acc;
    m
}

/// Maximum total weight of a matching restricted to `rows` x `cols`.
fn max_weight(w: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    // Non-edges cost 0, so a min-cost assignment on the negated matrix is a
    // maximum-weight matching once zero-cost cells are ignored.
    let cost: Vec<Vec<f64>> = if rows.len() <= cols.len() {
        rows.iter().map(|&r| cols.iter().map(|&c| -w[r][c]).collect()).collect()
    } else {
        cols.iter().map(|&c| rows.iter().map(|&r| -w[r][c]).collect()).collect()
    };
    -min_cost_assignment(&cost)
}

/// Hungarian algorithm with potentials for an `n x m` matrix, `n <= m`.
fn min_cost_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = cost[0].len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).filter(|&j| owner[j] != 0).map(|j| cost[owner[j] - 1][j - 1]).sum()
}
