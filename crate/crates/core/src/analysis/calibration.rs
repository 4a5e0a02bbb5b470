//! Threshold sweeps over human-labeled match scores.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::meets_threshold;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatchSample {
    pub score: f64,
    pub human_label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Sweep {
    pub const IOU_DEFAULT: Sweep = Sweep { lo: 0.0, hi: 1.0, step: 0.05 };
    pub const SEMANTIC_DEFAULT: Sweep = Sweep { lo: 0.50, hi: 0.95, step: 0.01 };
    pub const SENSITIVITY_DEFAULT: Sweep = Sweep { lo: 0.70, hi: 0.90, step: 0.01 };

    /// `lo + k * step` for every k that stays within `hi`, each rounded to
    /// nine decimals so grid points print and compare cleanly.
    pub fn grid(&self) -> Result<Vec<f64>, CalibrationError> {
        if !(self.step > 0.0) || !(self.lo <= self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(CalibrationError::Sweep(*self));
        }
        let mut out = Vec::new();
        let mut k = 0u64;
        loop {
            let t = libm::round((self.lo + k as f64 * self.step) * 1e9) / 1e9;
            if t > self.hi + 1e-9 {
                break;
            }
            out.push(t);
            k += 1;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    F1Argmax,
    RocYouden,
    FBetaArgmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub tpr: f64,
    pub fpr: f64,
}

impl CurvePoint {
    pub fn youden(&self) -> f64 {
        self.tpr - self.fpr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub threshold: f64,
    pub criterion: Criterion,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub beta: f64,
    pub points: Vec<CurvePoint>,
    pub selected: Selection,
    pub roc: Selection,
}

impl CalibrationCurve {
    pub fn selected_point(&self) -> &CurvePoint {
        self.points
            .iter()
            .find(|p| p.threshold == self.selected.threshold)
            .expect("selected threshold is a grid point")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("no samples")]
    Empty,
    #[error("samples need at least one positive and one negative label")]
    SingleClass,
    #[error("sample {index}: score {score} outside [0, 1]")]
    ScoreRange { index: usize, score: f64 },
    #[error("invalid sweep {0:?}")]
    Sweep(Sweep),
    #[error("beta must be positive, got {0}")]
    Beta(f64),
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

fn check(samples: &[LabeledMatchSample]) -> Result<(), CalibrationError> {
    if samples.is_empty() {
        return Err(CalibrationError::Empty);
    }
    if let Some((index, s)) = samples.iter().enumerate().find(|(_, s)| !(0.0..=1.0).contains(&s.score)) {
        return Err(CalibrationError::ScoreRange { index, score: s.score });
    }
    let pos = samples.iter().filter(|s| s.human_label).count();
    if pos == 0 || pos == samples.len() {
        return Err(CalibrationError::SingleClass);
    }
    Ok(())
}

fn argmax(points: &[CurvePoint], value: impl Fn(&CurvePoint) -> f64, criterion: Criterion) -> Selection {
    let mut best = Selection { threshold: points[0].threshold, criterion, value: value(&points[0]) };
    for p in &points[1..] {
        let v = value(p);
        // strict improvement only, so ties keep the lowest threshold
        if v > best.value + 1e-12 {
            best = Selection { threshold: p.threshold, criterion, value: v };
        }
    }
    best
}

/// Sweeps the grid, classifying `score >= t` as a predicted match.
pub fn calibrate(
    samples: &[LabeledMatchSample],
    sweep: Sweep,
    beta: f64,
    criterion: Criterion,
) -> Result<CalibrationCurve, CalibrationError> {
    check(samples)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(CalibrationError::Beta(beta));
    }
    let grid = sweep.grid()?;
    let positives = samples.iter().filter(|s| s.human_label).count();
    let negatives = samples.len() - positives;
    let points: Vec<CurvePoint> = grid
        .into_iter()
        .map(|t| {
            let (mut tp, mut fp) = (0, 0);
            for s in samples.iter().filter(|s| meets_threshold(s.score, t)) {
                if s.human_label {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, positives);
            CurvePoint {
                threshold: t,
                tp,
                fp,
                fn_: positives - tp,
                tn: negatives - fp,
                precision,
                recall,
                f_score: f_beta(precision, recall, beta),
                tpr: recall,
                fpr: ratio(fp, negatives),
            }
        })
        .collect();
    let selected = argmax(&points, |p| p.f_score, criterion);
    let roc = argmax(&points, CurvePoint::youden, Criterion::RocYouden);
    Ok(CalibrationCurve { beta, points, selected, roc })
}

/// F1 argmax over the sweep, with the Youden cutoff alongside.
pub fn calibrate_iou_threshold(samples: &[LabeledMatchSample], sweep: Sweep) -> Result<CalibrationCurve, CalibrationError> {
    calibrate(samples, sweep, 1.0, Criterion::F1Argmax)
}

/// F-beta argmax over the sweep (beta 0.5 favours precision).
pub fn calibrate_semantic_threshold(
    samples: &[LabeledMatchSample],
    beta: f64,
    sweep: Sweep,
) -> Result<CalibrationCurve, CalibrationError> {
    calibrate(samples, sweep, beta, Criterion::FBetaArgmax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn sample(score: f64, human_label: bool) -> LabeledMatchSample {
        LabeledMatchSample { score, human_label }
    }

    #[test]
    fn grid_points() {
        let g = Sweep::SEMANTIC_DEFAULT.grid().unwrap();
        assert_eq!(g.len(), 46);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[28], 0.78);
        assert_eq!(*g.last().unwrap(), 0.95);
        assert_eq!(Sweep::SENSITIVITY_DEFAULT.grid().unwrap().len(), 21);
        assert!(Sweep { lo: 0.0, hi: 1.0, step: 0.0 }.grid().is_err());
        assert!(Sweep { lo: 1.0, hi: 0.0, step: 0.1 }.grid().is_err());
    }

    #[test]
    fn separable_selects_half() {
        let s = vec![sample(0.9, true), sample(0.5, true), sample(0.7, true), sample(0.1, false), sample(0.45, false)];
        let c = calibrate_iou_threshold(&s, Sweep { lo: 0.0, hi: 1.0, step: 0.05 }).unwrap();
        // 0.5 is the highest-F1 point and nothing lower ties it
        assert_eq!(c.selected.threshold, 0.5);
        assert_eq!(c.selected.value, 1.0);
        assert_eq!(c.roc.threshold, 0.5);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(calibrate_iou_threshold(&[], Sweep::IOU_DEFAULT), Err(CalibrationError::Empty));
        let all_pos = [sample(0.2, true), sample(0.9, true)];
        assert_eq!(calibrate_iou_threshold(&all_pos, Sweep::IOU_DEFAULT), Err(CalibrationError::SingleClass));
        let bad = [sample(1.2, true), sample(0.1, false)];
        assert!(matches!(calibrate_iou_threshold(&bad, Sweep::IOU_DEFAULT), Err(CalibrationError::ScoreRange { index: 0, .. })));
    }

    /// F_beta as an exact fraction: (1+b2)TP / ((1+b2)TP + b2 FN + FP), with
    /// b2 = num/den.
    fn frac(tp: u64, fp: u64, fn_: u64, num: u64, den: u64) -> (u64, u64) {
        let n = (den + num) * tp;
        (n, n + num * fn_ + den * fp)
    }

    fn oracle(samples: &[LabeledMatchSample], grid: &[f64], num: u64, den: u64) -> f64 {
        let mut best: Option<(f64, (u64, u64))> = None;
        for &t in grid {
            let tp = samples.iter().filter(|s| s.human_label && s.score >= t - 1e-9).count() as u64;
            let fp = samples.iter().filter(|s| !s.human_label && s.score >= t - 1e-9).count() as u64;
            let fn_ = samples.iter().filter(|s| s.human_label).count() as u64 - tp;
            let f = if tp == 0 { (0, 1) } else { frac(tp, fp, fn_, num, den) };
            let better = match best {
                None => true,
                Some((_, b)) => (f.0 as u128) * (b.1 as u128) > (b.0 as u128) * (f.1 as u128),
            };
            if better {
                best = Some((t, f));
            }
        }
        best.unwrap().0
    }

    proptest! {
        #[test]
        fn selection_matches_exact_oracle(
            raw in proptest::collection::vec((0u32..=100, any::<bool>()), 2..60),
            beta_case in 0usize..3,
        ) {
            let mut samples: Vec<_> = raw.iter().map(|&(s, l)| sample(s as f64 / 100.0, l)).collect();
            samples.push(sample(0.3, true));
            samples.push(sample(0.6, false));
            let (beta, num, den) = [(1.0, 1, 1), (0.5, 1, 4), (2.0, 4, 1)][beta_case];
            let sweep = Sweep { lo: 0.0, hi: 1.0, step: 0.25 };
            let c = calibrate_semantic_threshold(&samples, beta, sweep).unwrap();
            prop_assert_eq!(c.selected.threshold, oracle(&samples, &sweep.grid().unwrap(), num, den));
            if beta == 1.0 {
                prop_assert_eq!(c.selected.threshold, calibrate_iou_threshold(&samples, sweep).unwrap().selected.threshold);
            }
            prop_assert!(c.selected.threshold >= sweep.lo && c.selected.threshold <= sweep.hi);
            prop_assert!(c.points.windows(2).all(|w| w[0].threshold < w[1].threshold));
        }
    }
}
