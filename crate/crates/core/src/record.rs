//! The line record shared by projected, gold and model-predicted data.
//!
//! ```json
//! {"id": "s1#4", "language": "fr", "tokens": [...], "pos": [...],
//!  "english": {"text", "tokens", "predicate_index"},
//!  "predicate": {"index", "kind", "lemma"},
//!  "alignment": [[e, t], ...],
//!  "qas": [{"question", "question_en", "answers": [{"start", "end", "text"}],
//!           "source", "flags", "heuristics"}],
//!  "provenance": "projected"}
//! ```
//!
//! `id` is `<sentence id>#<predicate token index>`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{PredicateKind, Sentence, Token, Upos};
use crate::curation::CurationState;
use crate::evaluation::SpanNode;
use crate::projection::{Heuristic, ProjectedRecord, Provenance};
use crate::span::TokenSpan;
use crate::text::join_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnglishSide {
    pub text: String,
    pub tokens: Vec<String>,
    pub predicate_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate_kind: Option<PredicateKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateField {
    pub index: usize,
    pub kind: PredicateKind,
    #[serde(default)]
    pub lemma: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl AnswerRecord {
    pub fn span(&self) -> TokenSpan {
        TokenSpan { start: self.start, end: self.end }
    }

    /// Answer over `tokens` with single-space-joined surface text.
    pub fn from_span<S: AsRef<str>>(span: TokenSpan, tokens: &[S]) -> Self {
        AnswerRecord { start: span.start, end: span.end, text: join_tokens(&tokens[span.range()]) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_en: Option<String>,
    pub answers: Vec<AnswerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers_en: Option<Vec<TokenSpan>>,
    #[serde(default)]
    pub source: Provenance,
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default)]
    pub heuristics: Vec<Heuristic>,
}

impl QaRecord {
    pub fn add_flag(&mut self, flag: &str) {
        if !self.flags.iter().any(|f| f == flag) {
            self.flags.push(flag.to_string());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub language: String,
    pub tokens: Vec<String>,
    pub pos: Vec<Upos>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub english: Option<EnglishSide>,
    pub predicate: PredicateField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<Vec<(usize, usize)>>,
    pub qas: Vec<QaRecord>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curation: Option<CurationState>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("record {id}: field tokens is empty")]
    NoTokens { id: String },
    #[error("record {id}: field pos has {pos} tags for {tokens} tokens")]
    PosLength { id: String, pos: usize, tokens: usize },
    #[error("record {id}: field predicate.index {index} out of range")]
    PredicateIndex { id: String, index: usize },
    #[error("record {id}: field qas[{qa}].answers[{answer}] span [{start},{end}) out of range for {len} tokens")]
    AnswerSpan { id: String, qa: usize, answer: usize, start: usize, end: usize, len: usize },
    #[error("record {id}: field english.predicate_index out of range")]
    EnglishPredicate { id: String },
    #[error("record {id}: field alignment pair ({e},{t}) out of range")]
    Alignment { id: String, e: usize, t: usize },
    #[error("record {id}: field alignment has duplicate pair ({e},{t})")]
    AlignmentDuplicate { id: String, e: usize, t: usize },
    #[error("record {id}: field qas[{qa}].answers_en[{answer}] out of range")]
    EnglishAnswer { id: String, qa: usize, answer: usize },
}

pub fn record_id(sentence_id: &str, predicate_index: usize) -> String {
    format!("{sentence_id}#{predicate_index}")
}

impl Record {
    pub fn sentence_id(&self) -> &str {
        match self.id.rsplit_once('#') {
            Some((sid, idx)) if idx.parse::<usize>().is_ok() => sid,
            _ => &self.id,
        }
    }

    /// `(sentence id, predicate token index)`.
    pub fn key(&self) -> (String, usize) {
        (self.sentence_id().to_string(), self.predicate.index)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        let id = || self.id.clone();
        let n = self.tokens.len();
        if n == 0 {
            return Err(RecordError::NoTokens { id: id() });
        }
        if self.pos.len() != n {
            return Err(RecordError::PosLength { id: id(), pos: self.pos.len(), tokens: n });
        }
        if self.predicate.index >= n {
            return Err(RecordError::PredicateIndex { id: id(), index: self.predicate.index });
        }
        for (qi, qa) in self.qas.iter().enumerate() {
            for (ai, a) in qa.answers.iter().enumerate() {
                if a.span().validate(n).is_err() {
                    return Err(RecordError::AnswerSpan {
                        id: id(),
                        qa: qi,
                        answer: ai,
                        start: a.start,
                        end: a.end,
                        len: n,
                    });
                }
            }
        }
        let en_len = match &self.english {
            Some(en) => {
                if en.predicate_index >= en.tokens.len() {
                    return Err(RecordError::EnglishPredicate { id: id() });
                }
                for (qi, qa) in self.qas.iter().enumerate() {
                    for (ai, s) in qa.answers_en.iter().flatten().enumerate() {
                        if s.validate(en.tokens.len()).is_err() {
                            return Err(RecordError::EnglishAnswer { id: id(), qa: qi, answer: ai });
                        }
                    }
                }
                Some(en.tokens.len())
            }
            None => None,
        };
        if let Some(pairs) = &self.alignment {
            let mut seen = alloc::collections::BTreeSet::new();
            for &(e, t) in pairs {
                if t >= n || en_len.is_some_and(|l| e >= l) {
                    return Err(RecordError::Alignment { id: id(), e, t });
                }
                if !seen.insert((e, t)) {
                    return Err(RecordError::AlignmentDuplicate { id: id(), e, t });
                }
            }
        }
        Ok(())
    }

    pub fn from_projected(r: &ProjectedRecord) -> Self {
        let tokens: Vec<String> = r.sentence.tokens.iter().map(|t| t.surface.clone()).collect();
        let qas = r
            .qas
            .iter()
            .map(|qa| QaRecord {
                question: qa.question_target.clone(),
                question_en: Some(qa.question_english.clone()),
                answers: qa.answers_target.iter().map(|&s| AnswerRecord::from_span(s, &tokens)).collect(),
                answers_en: Some(qa.answers_english.clone()),
                source: r.provenance,
                flags: Vec::new(),
                heuristics: qa.heuristics_applied.clone(),
            })
            .collect();
        Record {
            id: record_id(&r.sentence.id, r.predicate.token_index),
            language: r.sentence.language.clone(),
            pos: r.sentence.tokens.iter().map(|t| t.upos).collect(),
            tokens,
            english: Some(EnglishSide {
                text: r.english.text.clone(),
                tokens: r.english.tokens.clone(),
                predicate_index: r.english_predicate_index,
                predicate_kind: Some(r.english_predicate_kind),
            }),
            predicate: PredicateField {
                index: r.predicate.token_index,
                kind: r.predicate.kind,
                lemma: r.predicate.lemma.clone(),
            },
            alignment: Some(r.alignment.pairs().collect()),
            qas,
            provenance: r.provenance,
            curation: None,
        }
    }

    /// The target sentence; only the predicate token carries a lemma.
    pub fn sentence(&self) -> Sentence {
        Sentence {
            id: self.sentence_id().to_string(),
            language: self.language.clone(),
            tokens: self
                .tokens
                .iter()
                .zip(&self.pos)
                .enumerate()
                .map(|(index, (surface, &upos))| Token {
                    index,
                    surface: surface.clone(),
                    upos,
                    lemma: if index == self.predicate.index { self.predicate.lemma.clone() } else { None },
                })
                .collect(),
        }
    }

    /// One node per (question, answer span) pair.
    pub fn span_nodes(&self) -> Vec<SpanNode> {
        self.qas
            .iter()
            .flat_map(|qa| qa.answers.iter().map(move |a| SpanNode { span: a.span(), question: qa.question.clone() }))
            .collect()
    }
}
