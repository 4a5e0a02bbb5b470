//! Corpus statistics, sentence-level splits, and fine-tuning / ICL text emission.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PredicateKind;
use crate::record::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub sentences: usize,
    pub predicates: usize,
    pub qas: usize,
}

pub fn compute_stats(records: &[Record]) -> DatasetStats {
    let sentences: BTreeSet<&str> = records.iter().map(|r| r.sentence_id()).collect();
    DatasetStats {
        sentences: sentences.len(),
        predicates: records.len(),
        qas: records.iter().map(|r| r.qas.len()).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitRecords {
    pub train: Vec<Record>,
    pub dev: Vec<Record>,
    pub test: Vec<Record>,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("split ratios must be non-negative and sum to 1 (got {0}, {1}, {2})")]
    Ratios(f64, f64, f64),
}

/// Shuffles distinct sentence ids with a seeded ChaCha8 stream and cuts
/// them by `ratios` (train, dev, test). Records keep their input order
/// within each split.
pub fn split_dataset(records: Vec<Record>, ratios: (f64, f64, f64), seed: u64) -> Result<SplitRecords, SplitError> {
    let (a, b, c) = ratios;
    if a < 0.0 || b < 0.0 || c < 0.0 || libm::fabs(a + b + c - 1.0) > 1e-9 {
        return Err(SplitError::Ratios(a, b, c));
    }
    let mut ids: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for r in &records {
        if seen.insert(r.sentence_id()) {
            ids.push(r.sentence_id().to_string());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n = ids.len();
    let n_train = (libm::round(n as f64 * a) as usize).min(n);
    let n_dev = (libm::round(n as f64 * b) as usize).min(n - n_train);
    let assignment: BTreeMap<String, Split> = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_dev {
                Split::Dev
            } else {
                Split::Test
            };
            (id, split)
        })
        .collect();

    let mut out = SplitRecords::default();
    for r in records {
        match assignment[r.sentence_id()] {
            Split::Train => out.train.push(r),
            Split::Dev => out.dev.push(r),
            Split::Test => out.test.push(r),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTemplate {
    pub marker_open: String,
    pub marker_close: String,
    pub answer_separator: String,
}

impl Default for TrainingTemplate {
    fn default() -> Self {
        TrainingTemplate { marker_open: "**".into(), marker_close: "**".into(), answer_separator: " ; ".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub input: String,
    pub output: String,
}

/// Sentence tokens joined by single spaces, predicate token wrapped in markers.
pub fn mark_predicate(tokens: &[String], predicate_index: usize, open: &str, close: &str) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if i == predicate_index {
            out.push_str(open);
            out.push_str(t);
            out.push_str(close);
        } else {
            out.push_str(t);
        }
    }
    out
}

/// One example per record with at least one QA; the output has one
/// `question<TAB>answers` line per QA.
pub fn emit_training_examples(records: &[Record], template: &TrainingTemplate) -> Vec<TrainingExample> {
    records
        .iter()
        .filter(|r| !r.qas.is_empty())
        .map(|r| {
            let input = mark_predicate(&r.tokens, r.predicate.index, &template.marker_open, &template.marker_close);
            let output = r
                .qas
                .iter()
                .map(|qa| {
                    let answers: Vec<&str> = qa.answers.iter().map(|a| a.text.as_str()).collect();
                    alloc::format!("{}\t{}", qa.question, answers.join(&template.answer_separator))
                })
                .collect::<Vec<_>>()
                .join("\n");
            TrainingExample { input, output }
        })
        .collect()
}

/// Slot replaced by the sentence with the bold-marked predicate.
pub const ICL_SLOT: &str = "<sentence with **predicate**>";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IclTemplates {
    templates: BTreeMap<(String, PredicateKind), String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IclError {
    #[error("no {kind} ICL template for language {language:?}")]
    MissingTemplate { language: String, kind: PredicateKind },
    #[error("predicate index {0} out of range")]
    PredicateIndex(usize),
}

impl IclTemplates {
    /// English verbal and nominal few-shot prompts registered under `en`.
    pub fn builtin() -> Self {
        let mut t = IclTemplates::default();
        t.insert("en", PredicateKind::Verbal, include_str!("../templates/icl_verbal.en.txt"));
        t.insert("en", PredicateKind::Nominal, include_str!("../templates/icl_nominal.en.txt"));
        t
    }

    pub fn insert(&mut self, language: &str, kind: PredicateKind, template: &str) {
        self.templates.insert((language.to_string(), kind), template.to_string());
    }

    pub fn get(&self, language: &str, kind: PredicateKind) -> Option<&str> {
        self.templates.get(&(language.to_string(), kind)).map(|s| s.as_str())
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.templates.keys().map(|(l, _)| l.as_str()).collect()
    }
}

pub fn emit_icl_prompt(
    tokens: &[String],
    predicate_index: usize,
    kind: PredicateKind,
    language: &str,
    templates: &IclTemplates,
) -> Result<String, IclError> {
    if predicate_index >= tokens.len() {
        return Err(IclError::PredicateIndex(predicate_index));
    }
    let template = templates
        .get(language, kind)
        .ok_or_else(|| IclError::MissingTemplate { language: language.to_string(), kind })?;
    let sentence = mark_predicate(tokens, predicate_index, "**", "**");
    Ok(template.replace(ICL_SLOT, &sentence))
}
