//! Two-stage scoring of predicted QA-SRL against gold.
//!
//! Every (question, answer span) pair is a node. Stage one matches predicted
//! and gold nodes by span IOU ([`match_arguments`]); stage two compares the
//! questions of each matched pair, once by normalized string identity and
//! once by embedding cosine. Precision, recall and F1 are micro-averaged.

mod matching;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use matching::{match_spans, ArgumentPair, Matching};

use crate::meets_threshold;
use crate::providers::{cosine, ProviderError, QuestionEmbedder};
use crate::record::{record_id, Record};
use crate::span::TokenSpan;
use crate::text::{nfc, normalize_question};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactNormalization {
    /// NFC, trim, whitespace collapse and lowercase.
    #[default]
    Folded,
    /// NFC, trim and whitespace collapse; case-sensitive.
    Whitespace,
    Verbatim,
}

impl ExactNormalization {
    pub fn apply(&self, question: &str) -> String {
        match self {
            ExactNormalization::Folded => normalize_question(question),
            ExactNormalization::Whitespace => nfc(question).split_whitespace().collect::<Vec<_>>().join(" "),
            ExactNormalization::Verbatim => question.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub tau: f64,
    pub theta: f64,
    pub exact_normalization: ExactNormalization,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { tau: 0.5, theta: 0.78, exact_normalization: ExactNormalization::Folded }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{name} must lie in [0, 1], got {value}")]
    Threshold { name: &'static str, value: f64 },
    #[error("duplicate {side} record for predicate {id}")]
    DuplicateKey { side: &'static str, id: String },
    #[error("embedding failed: {0}")]
    Embedder(#[from] ProviderError),
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (name, value) in [("tau", self.tau), ("theta", self.theta)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(EvalError::Threshold { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanNode {
    pub span: TokenSpan,
    pub question: String,
}

pub fn match_arguments(predicted: &[SpanNode], gold: &[SpanNode], tau: f64) -> Matching {
    let p: Vec<TokenSpan> = predicted.iter().map(|n| n.span).collect();
    let g: Vec<TokenSpan> = gold.iter().map(|n| n.span).collect();
    match_spans(&p, &g, tau)
}

pub fn question_exact_match(q_pred: &str, q_gold: &str, policy: ExactNormalization) -> bool {
    policy.apply(q_pred) == policy.apply(q_gold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticMatch {
    pub matched: bool,
    pub cosine: f64,
}

/// Byte-identical questions score cosine 1 without an embedder call.
pub fn question_semantic_match(
    q_pred: &str,
    q_gold: &str,
    embedder: &dyn QuestionEmbedder,
    theta: f64,
) -> Result<SemanticMatch, ProviderError> {
    let c = if q_pred == q_gold { 1.0 } else { cosine(&embedder.embed(q_pred)?, &embedder.embed(q_gold)?) };
    Ok(SemanticMatch { matched: meets_threshold(c, theta), cosine: c })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl core::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

impl Counts {
    pub fn from_tp(tp: usize, n_pred: usize, n_gold: usize) -> Self {
        Counts { tp, fp: n_pred - tp, fn_: n_gold - tp }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn prf(&self) -> Prf {
        Prf { precision: self.precision(), recall: self.recall(), f1: self.f1(), counts: *self }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred_index: usize,
    pub gold_index: usize,
    pub pred: SpanNode,
    pub gold: SpanNode,
    pub iou: f64,
    pub exact: bool,
    pub semantic: bool,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub predicate_id: String,
    pub n_pred: usize,
    pub n_gold: usize,
    pub matched_pairs: Vec<MatchedPair>,
    pub unlabeled: Counts,
    pub exact: Counts,
    pub semantic: Counts,
}

impl MatchReport {
    /// Semantic tallies at another cosine threshold, reusing the stored
    /// argument matching. `theta = -1` admits every matched pair.
    pub fn rescore_semantic(&self, theta: f64) -> Counts {
        let tp = self.matched_pairs.iter().filter(|p| meets_threshold(p.cosine, theta)).count();
        Counts::from_tp(tp, self.n_pred, self.n_gold)
    }
}

pub fn evaluate_predicate(
    predicate_id: &str,
    predicted: &[SpanNode],
    gold: &[SpanNode],
    config: &EvalConfig,
    embedder: &dyn QuestionEmbedder,
) -> Result<MatchReport, ProviderError> {
    let matching = match_arguments(predicted, gold, config.tau);
    let mut pairs = Vec::with_capacity(matching.pairs.len());
    for ap in &matching.pairs {
        let (p, g) = (&predicted[ap.pred], &gold[ap.gold]);
        let sem = question_semantic_match(&p.question, &g.question, embedder, config.theta)?;
        pairs.push(MatchedPair {
            pred_index: ap.pred,
            gold_index: ap.gold,
            pred: p.clone(),
            gold: g.clone(),
            iou: ap.iou,
            exact: question_exact_match(&p.question, &g.question, config.exact_normalization),
            semantic: sem.matched,
            cosine: sem.cosine,
        });
    }
    let (np, ng) = (predicted.len(), gold.len());
    Ok(MatchReport {
        predicate_id: predicate_id.into(),
        n_pred: np,
        n_gold: ng,
        unlabeled: Counts::from_tp(pairs.len(), np, ng),
        exact: Counts::from_tp(pairs.iter().filter(|p| p.exact).count(), np, ng),
        semantic: Counts::from_tp(pairs.iter().filter(|p| p.semantic).count(), np, ng),
        matched_pairs: pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub predicates: usize,
    pub unlabeled: Prf,
    pub exact: Prf,
    pub semantic: Prf,
}

pub fn aggregate(reports: &[MatchReport]) -> EvalSummary {
    let (mut u, mut e, mut s) = (Counts::default(), Counts::default(), Counts::default());
    for r in reports {
        u += r.unlabeled;
        e += r.exact;
        s += r.semantic;
    }
    EvalSummary { predicates: reports.len(), unlabeled: u.prf(), exact: e.prf(), semantic: s.prf() }
}

/// One gold predicate with the nodes of its prediction (empty when the
/// predicate was not predicted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicatePair {
    pub predicate_id: String,
    pub predicted: Vec<SpanNode>,
    pub gold: Vec<SpanNode>,
}

/// Pairs records by (sentence id, predicate index), in gold order.
/// Predictions for predicates absent from gold are skipped with a warning.
pub fn pair_records(predicted: &[Record], gold: &[Record]) -> Result<Vec<PredicatePair>, EvalError> {
    let mut by_key = BTreeMap::new();
    for r in predicted {
        if by_key.insert(r.key(), r).is_some() {
            return Err(EvalError::DuplicateKey { side: "predicted", id: r.id.clone() });
        }
    }
    let mut gold_keys = BTreeSet::new();
    let mut pairs = Vec::with_capacity(gold.len());
    for g in gold {
        let key = g.key();
        if !gold_keys.insert(key.clone()) {
            return Err(EvalError::DuplicateKey { side: "gold", id: g.id.clone() });
        }
        pairs.push(PredicatePair {
            predicate_id: record_id(&key.0, key.1),
            predicted: by_key.get(&key).map(|p| p.span_nodes()).unwrap_or_default(),
            gold: g.span_nodes(),
        });
    }
    let extra = by_key.keys().filter(|k| !gold_keys.contains(*k)).count();
    if extra > 0 {
        log::warn!("{extra} predicted predicates have no gold counterpart and were ignored");
    }
    Ok(pairs)
}

/// Sequential [`pair_records`] + [`evaluate_predicate`]. A gold predicate
/// with no prediction counts all its nodes as false negatives.
pub fn evaluate_records(
    predicted: &[Record],
    gold: &[Record],
    config: &EvalConfig,
    embedder: &dyn QuestionEmbedder,
) -> Result<Vec<MatchReport>, EvalError> {
    config.validate()?;
    pair_records(predicted, gold)?
        .iter()
        .map(|p| evaluate_predicate(&p.predicate_id, &p.predicted, &p.gold, config, embedder).map_err(EvalError::from))
        .collect()
}
