//! Gold-set curation: review state, edits with an audit trail, error
//! categories and a replayable event journal.
//!
//! Items are keyed by (sentence id, predicate index) and kept in key order, so
//! exports are deterministic. Every mutation goes through [`JournalEvent`];
//! replaying the journal over an empty store reproduces the current state.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::projection::Provenance;
use crate::record::{record_id, AnswerRecord, QaRecord, Record, RecordError};
use crate::span::TokenSpan;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemKey {
    pub sentence_id: String,
    pub predicate_index: usize,
}

impl ItemKey {
    pub fn of(record: &Record) -> Self {
        let (sentence_id, predicate_index) = record.key();
        ItemKey { sentence_id, predicate_index }
    }
}

impl fmt::Display for ItemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&record_id(&self.sentence_id, self.predicate_index))
    }
}

impl FromStr for ItemKey {
    type Err = CurationError;
    fn from_str(s: &str) -> Result<Self, CurationError> {
        let bad = || CurationError::BadKey(s.to_string());
        let (sid, idx) = s.rsplit_once('#').ok_or_else(bad)?;
        let predicate_index = idx.parse().map_err(|_| bad())?;
        if sid.is_empty() {
            return Err(bad());
        }
        Ok(ItemKey { sentence_id: sid.to_string(), predicate_index })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    #[default]
    Pending,
    Reviewed,
}

impl FromStr for ReviewStatus {
    type Err = CurationError;
    fn from_str(s: &str) -> Result<Self, CurationError> {
        match s {
            "pending" => Ok(ReviewStatus::Pending),
            "reviewed" => Ok(ReviewStatus::Reviewed),
            other => Err(CurationError::BadStatus(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditAction {
    Accept,
    EditQuestion,
    EditAnswer,
    DeleteQa,
    AddQa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditFlag {
    Substantial,
    Minor,
}

impl EditFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EditFlag::Substantial => "substantial",
            EditFlag::Minor => "minor",
        }
    }
}

/// M: paraphrase model error, V: valid alternate question, P: predicate
/// error, R: role labeling error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorCategory {
    M,
    V,
    P,
    R,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [ErrorCategory::M, ErrorCategory::V, ErrorCategory::P, ErrorCategory::R];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCategory::M => "M",
            ErrorCategory::V => "V",
            ErrorCategory::P => "P",
            ErrorCategory::R => "R",
        }
    }

    fn flag(&self) -> String {
        format!("{CATEGORY_FLAG_PREFIX}{}", self.as_str())
    }
}

impl FromStr for ErrorCategory {
    type Err = CurationError;
    fn from_str(s: &str) -> Result<Self, CurationError> {
        match s {
            "M" => Ok(ErrorCategory::M),
            "V" => Ok(ErrorCategory::V),
            "P" => Ok(ErrorCategory::P),
            "R" => Ok(ErrorCategory::R),
            other => Err(CurationError::BadCategory(other.to_string())),
        }
    }
}

const CATEGORY_FLAG_PREFIX: &str = "category:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditTrailEntry {
    /// Seconds since the Unix epoch, supplied by the caller.
    pub timestamp: u64,
    pub action: EditAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qa_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<EditFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_category: Option<ErrorCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CurationState {
    pub status: ReviewStatus,
    pub version: u64,
    pub edits: Vec<AuditTrailEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationItem {
    pub key: String,
    pub record: Record,
    pub state: CurationState,
    /// The record as first imported; used to detect conflicting re-imports.
    #[serde(skip)]
    original: Option<Record>,
}

impl CurationItem {
    fn new(record: Record) -> Self {
        let mut record = record;
        let state = record.curation.take().unwrap_or_default();
        CurationItem { key: ItemKey::of(&record).to_string(), original: Some(record.clone()), record, state }
    }

    /// The record as first imported.
    pub fn original(&self) -> Option<&Record> {
        self.original.as_ref()
    }

    /// The record with its curation state attached, as exported.
    pub fn to_record(&self) -> Record {
        let mut r = self.record.clone();
        r.curation = Some(self.state.clone());
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanInput {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Edit {
    /// Marks the item (or one QA) as checked.
    Accept {
        #[serde(default)]
        qa_index: Option<usize>,
    },
    EditQuestion {
        qa_index: usize,
        question: String,
        #[serde(default)]
        flag: Option<EditFlag>,
    },
    /// Replaces the answer spans of one QA.
    EditAnswer {
        qa_index: usize,
        answers: Vec<SpanInput>,
        #[serde(default)]
        flag: Option<EditFlag>,
    },
    DeleteQa {
        qa_index: usize,
    },
    AddQa {
        question: String,
        answers: Vec<SpanInput>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CurationError {
    #[error("unknown item {0}")]
    NotFound(String),
    #[error("item {key} is at version {current}, edit expected {expected}")]
    Conflict { key: String, current: u64, expected: u64 },
    #[error("item {key}: qa index {index} out of range ({len} QAs)")]
    QaIndex { key: String, index: usize, len: usize },
    #[error("item {key}: answer span [{start},{end}) invalid for {len} tokens")]
    Span { key: String, start: usize, end: usize, len: usize },
    #[error("item {0}: a QA needs a non-empty question and at least one answer")]
    EmptyQa(String),
    #[error("conflicting content for keys: {}", .0.join(", "))]
    ImportConflict(Vec<String>),
    #[error("invalid record: {0}")]
    Record(#[from] RecordError),
    #[error("unknown error category {0:?} (expected M, V, P or R)")]
    BadCategory(String),
    #[error("unknown review status {0:?}")]
    BadStatus(String),
    #[error("malformed item key {0:?} (expected <sentence id>#<predicate index>)")]
    BadKey(String),
}

impl CurationError {
    pub fn is_not_found(&self) -> bool {
        matches!(self, CurationError::NotFound(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JournalEvent {
    Import {
        records: Vec<Record>,
    },
    Edit {
        key: String,
        #[serde(default)]
        expected_version: Option<u64>,
        edit: Edit,
        timestamp: u64,
    },
    Tag {
        key: String,
        qa_index: usize,
        category: ErrorCategory,
        timestamp: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExportFilter {
    pub language: Option<String>,
    pub include_pending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CurationStore {
    items: BTreeMap<ItemKey, CurationItem>,
}

impl CurationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, key: &str) -> Result<&CurationItem, CurationError> {
        let k: ItemKey = key.parse().map_err(|_| CurationError::NotFound(key.to_string()))?;
        self.items.get(&k).ok_or_else(|| CurationError::NotFound(key.to_string()))
    }

    /// Items in key order, optionally filtered by status.
    pub fn items(&self, status: Option<ReviewStatus>) -> impl Iterator<Item = &CurationItem> {
        self.items.values().filter(move |i| status.is_none_or(|s| i.state.status == s))
    }

    /// Adds new records as pending items; records whose key already exists
    /// with identical content are skipped. Nothing is imported if any key
    /// collides with different content.
    pub fn import(&mut self, records: Vec<Record>) -> Result<usize, CurationError> {
        let mut fresh: BTreeMap<ItemKey, Record> = BTreeMap::new();
        let mut conflicts = Vec::new();
        for mut r in records {
            r.validate()?;
            r.curation = None;
            let key = ItemKey::of(&r);
            let existing = self.items.get(&key).and_then(|i| i.original.as_ref()).or(fresh.get(&key));
            match existing {
                Some(prev) if *prev == r => {}
                Some(_) => conflicts.push(key.to_string()),
                None => {
                    fresh.insert(key, r);
                }
            }
        }
        if !conflicts.is_empty() {
            conflicts.sort();
            conflicts.dedup();
            return Err(CurationError::ImportConflict(conflicts));
        }
        let n = fresh.len();
        for (k, r) in fresh {
            self.items.insert(k, CurationItem::new(r));
        }
        Ok(n)
    }

    /// Reinstates an item from a snapshot: `current` carries its curation
    /// state, `original` is the record as first imported.
    pub fn restore(&mut self, current: Record, original: Record) -> Result<(), CurationError> {
        current.validate()?;
        let mut item = CurationItem::new(current);
        item.original = Some(original);
        self.items.insert(ItemKey::of(&item.record), item);
        Ok(())
    }

    fn item_mut(&mut self, key: &str) -> Result<&mut CurationItem, CurationError> {
        let k: ItemKey = key.parse().map_err(|_| CurationError::NotFound(key.to_string()))?;
        self.items.get_mut(&k).ok_or_else(|| CurationError::NotFound(key.to_string()))
    }

    /// Applies one edit. Add, delete and unflagged replacements are recorded
    /// as substantial; touched QAs become manual. Any edit marks the item
    /// reviewed and bumps its version.
    pub fn apply_edit(
        &mut self,
        key: &str,
        edit: &Edit,
        expected_version: Option<u64>,
        timestamp: u64,
    ) -> Result<&CurationItem, CurationError> {
        let item = self.item_mut(key)?;
        let key = item.key.clone();
        if let Some(expected) = expected_version {
            if expected != item.state.version {
                return Err(CurationError::Conflict { key, current: item.state.version, expected });
            }
        }
        let n_tokens = item.record.tokens.len();
        let n_qas = item.record.qas.len();
        let check_index = |index: usize| {
            if index < n_qas {
                Ok(())
            } else {
                Err(CurationError::QaIndex { key: key.clone(), index, len: n_qas })
            }
        };
        let spans = |answers: &[SpanInput]| -> Result<Vec<TokenSpan>, CurationError> {
            if answers.is_empty() {
                return Err(CurationError::EmptyQa(key.clone()));
            }
            answers
                .iter()
                .map(|a| {
                    TokenSpan::new(a.start, a.end, n_tokens).map_err(|_| CurationError::Span {
                        key: key.clone(),
                        start: a.start,
                        end: a.end,
                        len: n_tokens,
                    })
                })
                .collect()
        };

        let entry = match edit {
            Edit::Accept { qa_index } => {
                if let Some(i) = qa_index {
                    check_index(*i)?;
                }
                AuditTrailEntry { timestamp, action: EditAction::Accept, qa_index: *qa_index, flag: None, error_category: None }
            }
            Edit::EditQuestion { qa_index, question, flag } => {
                check_index(*qa_index)?;
                if question.trim().is_empty() {
                    return Err(CurationError::EmptyQa(key));
                }
                let flag = flag.unwrap_or(EditFlag::Substantial);
                let qa = &mut item.record.qas[*qa_index];
                qa.question = question.clone();
                touch(qa, flag);
                entry(timestamp, EditAction::EditQuestion, Some(*qa_index), flag)
            }
            Edit::EditAnswer { qa_index, answers, flag } => {
                check_index(*qa_index)?;
                let new = spans(answers)?;
                let flag = flag.unwrap_or(EditFlag::Substantial);
                let tokens = &item.record.tokens;
                let answers: Vec<AnswerRecord> = new.iter().map(|&s| AnswerRecord::from_span(s, tokens)).collect();
                let qa = &mut item.record.qas[*qa_index];
                qa.answers = answers;
                qa.answers_en = None;
                touch(qa, flag);
                entry(timestamp, EditAction::EditAnswer, Some(*qa_index), flag)
            }
            Edit::DeleteQa { qa_index } => {
                check_index(*qa_index)?;
                item.record.qas.remove(*qa_index);
                entry(timestamp, EditAction::DeleteQa, Some(*qa_index), EditFlag::Substantial)
            }
            Edit::AddQa { question, answers } => {
                if question.trim().is_empty() {
                    return Err(CurationError::EmptyQa(key));
                }
                let new = spans(answers)?;
                let mut qa = QaRecord {
                    question: question.clone(),
                    question_en: None,
                    answers: new.iter().map(|&s| AnswerRecord::from_span(s, &item.record.tokens)).collect(),
                    answers_en: None,
                    source: Provenance::Manual,
                    flags: Vec::new(),
                    heuristics: Vec::new(),
                };
                touch(&mut qa, EditFlag::Substantial);
                item.record.qas.push(qa);
                entry(timestamp, EditAction::AddQa, Some(n_qas), EditFlag::Substantial)
            }
        };
        item.state.edits.push(entry);
        item.state.status = ReviewStatus::Reviewed;
        item.state.version += 1;
        Ok(item)
    }

    /// Records an error category for one QA: as an accept entry in the audit
    /// trail and as a `category:X` flag on the QA (replacing any earlier one).
    pub fn tag_error_category(
        &mut self,
        key: &str,
        qa_index: usize,
        category: ErrorCategory,
        timestamp: u64,
    ) -> Result<&CurationItem, CurationError> {
        let item = self.item_mut(key)?;
        let len = item.record.qas.len();
        let qa = item
            .record
            .qas
            .get_mut(qa_index)
            .ok_or_else(|| CurationError::QaIndex { key: item.key.clone(), index: qa_index, len })?;
        qa.flags.retain(|f| !f.starts_with(CATEGORY_FLAG_PREFIX));
        qa.flags.push(category.flag());
        item.state.edits.push(AuditTrailEntry {
            timestamp,
            action: EditAction::Accept,
            qa_index: Some(qa_index),
            flag: None,
            error_category: Some(category),
        });
        item.state.status = ReviewStatus::Reviewed;
        item.state.version += 1;
        Ok(item)
    }

    pub fn apply_event(&mut self, event: &JournalEvent) -> Result<(), CurationError> {
        match event {
            JournalEvent::Import { records } => self.import(records.clone()).map(|_| ()),
            JournalEvent::Edit { key, expected_version, edit, timestamp } => {
                self.apply_edit(key, edit, *expected_version, *timestamp).map(|_| ())
            }
            JournalEvent::Tag { key, qa_index, category, timestamp } => {
                self.tag_error_category(key, *qa_index, *category, *timestamp).map(|_| ())
            }
        }
    }

    /// Reviewed items (and pending ones if asked) with curation state attached.
    pub fn export(&self, filter: &ExportFilter) -> Vec<Record> {
        self.items
            .values()
            .filter(|i| filter.include_pending || i.state.status == ReviewStatus::Reviewed)
            .filter(|i| filter.language.as_ref().is_none_or(|l| *l == i.record.language))
            .map(CurationItem::to_record)
            .collect()
    }

    /// Share of each category among tagged QAs currently in the store.
    pub fn category_distribution(&self) -> BTreeMap<ErrorCategory, CategoryShare> {
        let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
        for item in self.items.values() {
            for qa in &item.record.qas {
                for f in &qa.flags {
                    if let Some(c) = f.strip_prefix(CATEGORY_FLAG_PREFIX).and_then(|c| c.parse().ok()) {
                        *counts.entry(c).or_default() += 1;
                    }
                }
            }
        }
        let total: usize = counts.values().sum();
        counts
            .into_iter()
            .map(|(c, n)| {
                let share = if total == 0 { 0.0 } else { n as f64 / total as f64 };
                (c, CategoryShare { count: n, share })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub count: usize,
    pub share: f64,
}

fn touch(qa: &mut QaRecord, flag: EditFlag) {
    qa.source = Provenance::Manual;
    if flag == EditFlag::Substantial {
        qa.flags.retain(|f| f != EditFlag::Minor.as_str());
    } else if qa.flags.iter().any(|f| f == EditFlag::Substantial.as_str()) {
        return;
    }
    qa.add_flag(flag.as_str());
}

fn entry(timestamp: u64, action: EditAction, qa_index: Option<usize>, flag: EditFlag) -> AuditTrailEntry {
    AuditTrailEntry { timestamp, action, qa_index, flag: Some(flag), error_category: None }
}
