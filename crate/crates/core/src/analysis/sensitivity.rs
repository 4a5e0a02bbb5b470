use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::evaluation::{Counts, MatchReport, Prf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system: String,
    pub semantic: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub a: String,
    pub b: String,
    /// Semantic F1 of `a` minus that of `b`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub theta: f64,
    pub systems: Vec<SystemScore>,
    pub gaps: Vec<Gap>,
}

/// Semantic scores of every system at every threshold, reusing each report's
/// matched pairs and cached cosines. Gaps cover every ordered pair `i < j`.
pub fn threshold_sensitivity(systems: &[(String, Vec<MatchReport>)], thetas: &[f64]) -> Vec<SensitivityRow> {
    thetas
        .iter()
        .map(|&theta| {
            let scores: Vec<SystemScore> = systems
                .iter()
                .map(|(name, reports)| {
                    let mut c = Counts::default();
                    for r in reports {
                        c += r.rescore_semantic(theta);
                    }
                    SystemScore { system: name.clone(), semantic: c.prf() }
                })
                .collect();
            let mut gaps = Vec::new();
            for i in 0..scores.len() {
                for j in i + 1..scores.len() {
                    gaps.push(Gap {
                        a: scores[i].system.clone(),
                        b: scores[j].system.clone(),
                        delta: scores[i].semantic.f1 - scores[j].semantic.f1,
                    });
                }
            }
            SensitivityRow { theta, systems: scores, gaps }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Sweep;
    use crate::evaluation::{MatchedPair, SpanNode};
    use crate::span::TokenSpan;
    use alloc::vec;
    use proptest::prelude::*;

    fn report(cosines: &[f64], extra_pred: usize, extra_gold: usize) -> MatchReport {
        let node = SpanNode { span: TokenSpan::unchecked(0, 1), question: "q".into() };
        let pairs: Vec<MatchedPair> = cosines
            .iter()
            .enumerate()
            .map(|(i, &c)| MatchedPair {
                pred_index: i,
                gold_index: i,
                pred: node.clone(),
                gold: node.clone(),
                iou: 1.0,
                exact: false,
                semantic: c >= 0.78,
                cosine: c,
            })
            .collect();
        let n = cosines.len();
        let u = Counts::from_tp(n, n + extra_pred, n + extra_gold);
        MatchReport {
            predicate_id: "p".into(),
            n_pred: n + extra_pred,
            n_gold: n + extra_gold,
            matched_pairs: pairs,
            unlabeled: u,
            exact: Counts::from_tp(0, n + extra_pred, n + extra_gold),
            semantic: u,
        }
    }

    #[test]
    fn sentinel_admits_all() {
        let r = report(&[-0.4, 0.1, 0.9], 1, 0);
        let rows = threshold_sensitivity(&[("s".into(), vec![r.clone()])], &[-1.0, 0.5]);
        assert_eq!(rows[0].systems[0].semantic.counts.tp, r.unlabeled.tp);
        assert_eq!(rows[1].systems[0].semantic.counts.tp, 1);
    }

    proptest! {
        #[test]
        fn monotone_and_zero_gap(
            systems in proptest::collection::vec(
                proptest::collection::vec((proptest::collection::vec(0.0f64..=1.0, 0..5), 0usize..3, 0usize..3), 1..6),
                1..4,
            )
        ) {
            let mut named: Vec<(String, Vec<MatchReport>)> = systems
                .iter()
                .enumerate()
                .map(|(i, reps)| (alloc::format!("sys{i}"), reps.iter().map(|(c, p, g)| report(c, *p, *g)).collect()))
                .collect();
            named.push(("copy".into(), named[0].1.clone()));
            let grid = Sweep::SENSITIVITY_DEFAULT.grid().unwrap();
            let rows = threshold_sensitivity(&named, &grid);
            for s in 0..named.len() {
                for w in rows.windows(2) {
                    prop_assert!(w[1].systems[s].semantic.f1 <= w[0].systems[s].semantic.f1);
                }
            }
            for row in &rows {
                let g = row.gaps.iter().find(|g| g.a == "sys0" && g.b == "copy").unwrap();
                prop_assert_eq!(g.delta, 0.0);
            }
        }
    }
}
