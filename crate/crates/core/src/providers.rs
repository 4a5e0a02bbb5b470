//! Contracts for the external model services the pipeline consumes.
//!
//! Implementations (HTTP clients, fixture tables) live in the `qasrl` crate;
//! this module only fixes the shapes and the checks that sit on top of them.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{PredicateKind, Sentence};
use crate::span::TokenSpan;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    /// Network / service failure after the retry budget was spent.
    #[error("transport failure on {route}: {message}")]
    Transport { route: String, message: String },
    /// The service answered, but with something unusable.
    #[error("bad content from {route}: {message}")]
    Content { route: String, message: String },
    #[error("fixture miss on {route}: {key}")]
    FixtureMiss { route: String, key: String },
}

impl ProviderError {
    pub fn content(route: &str, message: impl Into<String>) -> Self {
        ProviderError::Content { route: route.to_string(), message: message.into() }
    }

    pub fn transport(route: &str, message: impl Into<String>) -> Self {
        ProviderError::Transport { route: route.to_string(), message: message.into() }
    }

    pub fn is_transport(&self) -> bool {
        matches!(self, ProviderError::Transport { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnglishTranslation {
    pub text: String,
    pub tokens: Vec<String>,
}

impl EnglishTranslation {
    /// Non-empty tokens whose concatenation is the text with whitespace removed.
    pub fn check(&self) -> Result<(), ProviderError> {
        if self.tokens.is_empty() || self.tokens.iter().any(|t| t.is_empty()) {
            return Err(ProviderError::content("/translate", "empty translation"));
        }
        let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        let joined: String = self.tokens.iter().map(|t| squash(t)).collect();
        if joined != squash(&self.text) {
            return Err(ProviderError::content("/translate", "tokens do not detokenize to text"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnglishQa {
    pub question: String,
    pub answers: Vec<TokenSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnglishParse {
    pub text: String,
    pub tokens: Vec<String>,
    pub predicate_index: usize,
    pub predicate_kind: PredicateKind,
    pub qas: Vec<EnglishQa>,
}

impl EnglishParse {
    pub fn check(&self) -> Result<(), ProviderError> {
        if self.predicate_index >= self.tokens.len() {
            return Err(ProviderError::content("/parse", "predicate index out of range"));
        }
        for qa in &self.qas {
            for a in &qa.answers {
                if a.validate(self.tokens.len()).is_err() {
                    return Err(ProviderError::content("/parse", alloc::format!("answer span {a} out of range")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedPredicate {
    pub index: usize,
    pub kind: PredicateKind,
}

/// Set of `(english_index, target_index)` links.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlignmentMap {
    pairs: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlignmentError {
    #[error("alignment pair ({0},{1}) out of bounds")]
    OutOfBounds(usize, usize),
    #[error("duplicate alignment pair ({0},{1})")]
    Duplicate(usize, usize),
}

impl AlignmentMap {
    pub fn new(
        pairs: impl IntoIterator<Item = (usize, usize)>,
        english_len: usize,
        target_len: usize,
    ) -> Result<Self, AlignmentError> {
        let mut set = BTreeSet::new();
        for (e, t) in pairs {
            if e >= english_len || t >= target_len {
                return Err(AlignmentError::OutOfBounds(e, t));
            }
            if !set.insert((e, t)) {
                return Err(AlignmentError::Duplicate(e, t));
            }
        }
        Ok(AlignmentMap { pairs: set })
    }

    /// Builds a map without bounds checks; duplicates collapse.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        AlignmentMap { pairs: pairs.into_iter().collect() }
    }

    pub fn check_bounds(&self, english_len: usize, target_len: usize) -> Result<(), AlignmentError> {
        match self.pairs.iter().find(|(e, t)| *e >= english_len || *t >= target_len) {
            Some(&(e, t)) => Err(AlignmentError::OutOfBounds(e, t)),
            None => Ok(()),
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, english: usize, target: usize) -> bool {
        self.pairs.contains(&(english, target))
    }

    /// Target indices linked to `english`, ascending.
    pub fn targets_of(&self, english: usize) -> impl Iterator<Item = usize> + '_ {
        self.pairs.range((english, 0)..=(english, usize::MAX)).map(|&(_, t)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExample {
    pub input: String,
    pub output: String,
}

/// Few-shot prompt: an instruction, worked examples, then the query line.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction: String,
    #[serde(default)]
    pub examples: Vec<PromptExample>,
}

impl PromptTemplate {
    pub fn render(&self, query: &str) -> String {
        let mut out = String::new();
        if !self.instruction.is_empty() {
            out.push_str(&self.instruction);
            out.push_str("\n\n");
        }
        for ex in &self.examples {
            let _ = writeln!(out, "{}\n{}\n", ex.input, ex.output);
        }
        out.push_str(query);
        out
    }
}

/// Query line for predicate-preserving question translation:
/// the English question, a bar, and the target predicate form.
pub fn constrained_query(question_en: &str, predicate_form: &str) -> String {
    alloc::format!("{question_en} | {predicate_form}")
}

/// Nominalization classifier prompt with the two labels it expects back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NominalizationPrompt {
    pub template: PromptTemplate,
    pub positive_label: String,
    pub negative_label: String,
}

impl NominalizationPrompt {
    pub fn render(&self, noun: &str) -> String {
        self.template.render(&alloc::format!("{noun}:"))
    }

    /// `Some(true)` for the eventive label, `Some(false)` for the static one,
    /// `None` when the completion carries neither or both.
    pub fn parse_completion(&self, completion: &str) -> Option<bool> {
        let c = completion.trim().to_lowercase();
        let pos = c.contains(&self.positive_label.to_lowercase());
        let neg = c.contains(&self.negative_label.to_lowercase());
        match (pos, neg) {
            (true, false) => Some(true),
            (false, true) => Some(false),
            _ => None,
        }
    }
}

pub trait Translator {
    fn translate(&self, sentence: &Sentence) -> Result<EnglishTranslation, ProviderError>;
}

/// English QA-SRL / QANom parser service.
pub trait EnglishQasrl {
    fn parse(&self, tokens: &[String], predicate_index: usize, kind: PredicateKind)
        -> Result<EnglishParse, ProviderError>;

    fn detect(&self, tokens: &[String]) -> Result<Vec<DetectedPredicate>, ProviderError>;
}

pub trait WordAligner {
    fn align(&self, english: &[String], target: &[String]) -> Result<AlignmentMap, ProviderError>;
}

pub trait QuestionTranslator {
    /// `attempt` counts from 0 and lets sampling back-ends vary their output
    /// on retries.
    fn translate_question(
        &self,
        question_en: &str,
        predicate_form: &str,
        language: &str,
        fewshot: &PromptTemplate,
        attempt: usize,
    ) -> Result<String, ProviderError>;
}

pub trait QuestionEmbedder {
    /// Embedding vector; callers compare by cosine, so length is irrelevant.
    fn embed(&self, question: &str) -> Result<Vec<f64>, ProviderError>;
}

pub trait NominalizationClassifier {
    /// Raw completion for the rendered prompt.
    fn complete(&self, noun: &str, language: &str, prompt: &NominalizationPrompt) -> Result<String, ProviderError>;
}

/// True iff the classifier labels `noun` as an eventive nominalization.
/// Service errors and unparseable completions yield `false`.
pub fn classify_nominalization(
    classifier: &dyn NominalizationClassifier,
    noun: &str,
    language: &str,
    prompt: &NominalizationPrompt,
) -> bool {
    match classifier.complete(noun, language, prompt) {
        Ok(completion) => match prompt.parse_completion(&completion) {
            Some(label) => label,
            None => {
                log::warn!("unparseable nominalization completion for {noun:?}: {completion:?}");
                false
            }
        },
        Err(e) => {
            log::warn!("nominalization classifier failed for {noun:?}: {e}");
            false
        }
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn normalize(v: &mut [f64]) -> Result<(), ProviderError> {
    let n = l2_norm(v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(ProviderError::content("/embed", "zero or non-finite embedding"));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

/// Cosine similarity; 0 when either vector is zero or dimensions differ.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return 0.0;
    }
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Bundle of provider handles for one projection run.
#[derive(Clone, Copy)]
pub struct Providers<'a> {
    pub translator: &'a dyn Translator,
    pub parser: &'a dyn EnglishQasrl,
    pub aligner: &'a dyn WordAligner,
    pub question_translator: &'a dyn QuestionTranslator,
    pub classifier: &'a dyn NominalizationClassifier,
}
