//! Projection of English QA-SRL annotations onto a target-language sentence.
//!
//! Per sentence: translate to English, detect English predicates, align
//! tokens, then for each English predicate find and gate its target token,
//! project every answer span (gap fill, trailing function-word trim, split on
//! predicate / internal period) and translate every question under the
//! constraint that it contains the target predicate.

mod predicate;
mod question;
mod spans;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use predicate::{align_predicate, gate_predicate, GateDecision, PredicateDrop};
pub use question::validate_constrained_question;
pub use spans::{project_answer_span, sanitize_span, trim_function_words, SpanDrop};

use crate::corpus::{PredicateInstance, PredicateKind, Sentence};
use crate::providers::{
    AlignmentMap, DetectedPredicate, EnglishTranslation, NominalizationPrompt, PromptExample, PromptTemplate, Providers,
};
use crate::span::TokenSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    GapFill,
    Trim,
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Projected,
    Manual,
    Model,
}

/// Per-language knobs for span trimming and predicate matching.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LanguageProfile {
    pub function_word_trim: bool,
    pub function_words: Vec<String>,
    /// Prefixes a question token may carry before the predicate form.
    pub clitic_prefixes: Vec<String>,
    /// Suffixes by which a question token may differ from the predicate form.
    pub agreement_suffixes: Vec<String>,
}

static EMPTY_PROFILE: LanguageProfile = LanguageProfile {
    function_word_trim: false,
    function_words: Vec::new(),
    clitic_prefixes: Vec::new(),
    agreement_suffixes: Vec::new(),
};

fn strings(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl LanguageProfile {
    /// Trailing-trim enabled; prepositions, conjunctions and the definite
    /// article as separated in UD Hebrew tokenization.
    pub fn hebrew() -> Self {
        LanguageProfile {
            function_word_trim: true,
            function_words: strings(&[
                "ש", "ה", "ו", "ב", "ל", "מ", "כ", "של", "את", "על", "עם", "אל", "מן", "כי", "או", "אם", "גם", "אשר",
                "כש", "לפני", "אחרי", "בין", "עד", "כמו", "אבל",
            ]),
            clitic_prefixes: strings(&["ש", "ה", "ו", "ב", "ל", "מ", "כ", "כש"]),
            agreement_suffixes: Vec::new(),
        }
    }

    /// Trim disabled; participle gender/number agreement accepted in questions.
    pub fn french() -> Self {
        LanguageProfile {
            function_word_trim: false,
            function_words: Vec::new(),
            clitic_prefixes: Vec::new(),
            agreement_suffixes: strings(&["e", "s", "es"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    pub languages: BTreeMap<String, LanguageProfile>,
    pub allow_affixed_predicate_match: bool,
    /// Attempts at constrained question translation before the QA is dropped.
    pub constrained_translation_retries: usize,
    /// Always true; kept so audit logs state the policy.
    pub drop_on_unaligned_predicate: bool,
    pub question_prompt: PromptTemplate,
    pub nominalization_prompt: NominalizationPrompt,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        let mut languages = BTreeMap::new();
        languages.insert("he".to_string(), LanguageProfile::hebrew());
        languages.insert("fr".to_string(), LanguageProfile::french());
        ProjectionConfig {
            languages,
            allow_affixed_predicate_match: false,
            constrained_translation_retries: 3,
            drop_on_unaligned_predicate: true,
            question_prompt: default_question_prompt(),
            nominalization_prompt: default_nominalization_prompt(),
        }
    }
}

impl ProjectionConfig {
    pub fn profile(&self, language: &str) -> &LanguageProfile {
        self.languages.get(language).unwrap_or(&EMPTY_PROFILE)
    }
}

pub fn default_question_prompt() -> PromptTemplate {
    PromptTemplate {
        instruction: "Translate the English question into the target language. The translation must contain \
                      the given target-language predicate form as written. Input format: question | predicate."
            .to_string(),
        examples: alloc::vec![PromptExample {
            input: "Who should go somewhere? | לנסוע".to_string(),
            output: "מי צריך לנסוע לאנשהו?".to_string(),
        }],
    }
}

pub fn default_nominalization_prompt() -> NominalizationPrompt {
    let ex = |i: &str, o: &str| PromptExample { input: alloc::format!("{i}:"), output: o.to_string() };
    NominalizationPrompt {
        template: PromptTemplate {
            instruction: "Classify each noun as an action noun (eventive nominalization) or a common noun."
                .to_string(),
            examples: alloc::vec![
                ex("assiette", "nom commun"),
                ex("invitation", "nom d'action"),
                ex("comité", "nom commun"),
                ex("permission", "nom d'action"),
                ex("libération", "nom d'action"),
            ],
        },
        positive_label: "nom d'action".to_string(),
        negative_label: "nom commun".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedQA {
    pub question_target: String,
    pub question_english: String,
    pub answers_target: Vec<TokenSpan>,
    pub answers_english: Vec<TokenSpan>,
    pub heuristics_applied: Vec<Heuristic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    TranslationFailed { message: String },
    DetectionFailed { message: String },
    AlignmentFailed { message: String },
    PredicateUnaligned,
    PredicateFiltered,
    PredicateGated,
    ParseFailed { message: String },
    SpanUnaligned,
    SpanDegenerate,
    NoAnswers,
    QuestionUnvalidated { attempts: usize, last: Option<String> },
    NoQas,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub sentence_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub english_predicate_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub question_en: Option<String>,
    #[serde(flatten)]
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedRecord {
    pub sentence: Sentence,
    pub english: EnglishTranslation,
    pub predicate: PredicateInstance,
    pub english_predicate_index: usize,
    pub english_predicate_kind: PredicateKind,
    pub alignment: AlignmentMap,
    pub qas: Vec<ProjectedQA>,
    pub provenance: Provenance,
    pub dropped_qas: Vec<AuditEntry>,
}

/// Records emitted for one sentence plus sentence- and predicate-level audit
/// entries. QA-level drops are on each record's `dropped_qas`, and records
/// that lost every QA appear here with [`DropReason::NoQas`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProjectionOutcome {
    pub records: Vec<ProjectedRecord>,
    pub audit: Vec<AuditEntry>,
}

impl ProjectionOutcome {
    /// All audit entries, sentence-level first, then per record.
    pub fn all_audit(&self) -> Vec<AuditEntry> {
        let mut out = self.audit.clone();
        for r in &self.records {
            out.extend(r.dropped_qas.iter().cloned());
        }
        out
    }
}

struct Auditor<'s> {
    sentence_id: &'s str,
}

impl Auditor<'_> {
    fn entry(&self, en: Option<usize>, tgt: Option<usize>, q: Option<&str>, reason: DropReason) -> AuditEntry {
        AuditEntry {
            sentence_id: self.sentence_id.to_string(),
            english_predicate_index: en,
            target_index: tgt,
            question_en: q.map(|s| s.to_string()),
            reason,
        }
    }
}

/// Runs the four-stage projection over one sentence.
pub fn project_record(sentence: &Sentence, providers: Providers<'_>, config: &ProjectionConfig) -> ProjectionOutcome {
    let audit = Auditor { sentence_id: &sentence.id };
    let mut outcome = ProjectionOutcome::default();
    let sentence_level = |reason| audit.entry(None, None, None, reason);

    let english = match providers.translator.translate(sentence).and_then(|t| t.check().map(|_| t)) {
        Ok(t) => t,
        Err(e) => {
            outcome.audit.push(sentence_level(DropReason::TranslationFailed { message: e.to_string() }));
            return outcome;
        }
    };
    let detected: Vec<DetectedPredicate> = match providers.parser.detect(&english.tokens) {
        Ok(mut d) => {
            d.sort_by_key(|p| p.index);
            d.dedup_by_key(|p| p.index);
            d.retain(|p| p.index < english.tokens.len());
            d
        }
        Err(e) => {
            outcome.audit.push(sentence_level(DropReason::DetectionFailed { message: e.to_string() }));
            return outcome;
        }
    };
    let target_tokens: Vec<String> = sentence.tokens.iter().map(|t| t.surface.clone()).collect();
    let alignment = match providers.aligner.align(&english.tokens, &target_tokens) {
        Ok(a) => match a.check_bounds(english.tokens.len(), sentence.len()) {
            Ok(()) => a,
            Err(e) => {
                outcome.audit.push(sentence_level(DropReason::AlignmentFailed { message: e.to_string() }));
                return outcome;
            }
        },
        Err(e) => {
            outcome.audit.push(sentence_level(DropReason::AlignmentFailed { message: e.to_string() }));
            return outcome;
        }
    };

    let profile = config.profile(&sentence.language);
    // Keyed by target token index: English predicates landing on the same
    // target token pool their QAs.
    let mut by_target: BTreeMap<usize, ProjectedRecord> = BTreeMap::new();

    for pred in detected {
        let en_idx = pred.index;
        let target = match align_predicate(en_idx, &alignment, sentence) {
            Ok(t) => t,
            Err(PredicateDrop::Unaligned) => {
                outcome.audit.push(audit.entry(Some(en_idx), None, None, DropReason::PredicateUnaligned));
                continue;
            }
            Err(PredicateDrop::Filtered) => {
                outcome.audit.push(audit.entry(Some(en_idx), None, None, DropReason::PredicateFiltered));
                continue;
            }
        };
        let kind = match gate_predicate(target, sentence, providers.classifier, &config.nominalization_prompt) {
            GateDecision::KeepVerbal => PredicateKind::Verbal,
            GateDecision::KeepNominal => PredicateKind::Nominal,
            GateDecision::Drop => {
                outcome.audit.push(audit.entry(Some(en_idx), Some(target), None, DropReason::PredicateGated));
                continue;
            }
        };
        let parse = match providers.parser.parse(&english.tokens, en_idx, pred.kind).and_then(|p| p.check().map(|_| p))
        {
            Ok(p) => p,
            Err(e) => {
                outcome.audit.push(audit.entry(
                    Some(en_idx),
                    Some(target),
                    None,
                    DropReason::ParseFailed { message: e.to_string() },
                ));
                continue;
            }
        };

        let record = by_target.entry(target).or_insert_with(|| ProjectedRecord {
            sentence: sentence.clone(),
            english: english.clone(),
            predicate: PredicateInstance {
                sentence_id: sentence.id.clone(),
                token_index: target,
                kind,
                lemma: sentence.tokens[target].lemma.clone(),
            },
            english_predicate_index: en_idx,
            english_predicate_kind: pred.kind,
            alignment: alignment.clone(),
            qas: Vec::new(),
            provenance: Provenance::Projected,
            dropped_qas: Vec::new(),
        });
        let predicate_surface = sentence.tokens[target].surface.as_str();

        for qa in &parse.qas {
            let drop = |reason| audit.entry(Some(en_idx), Some(target), Some(&qa.question), reason);
            let mut answers_target: Vec<TokenSpan> = Vec::new();
            let mut answers_english: Vec<TokenSpan> = Vec::new();
            let mut heuristics: Vec<Heuristic> = Vec::new();
            for &en_span in &qa.answers {
                match project_one_answer(en_span, &alignment, sentence, target, profile) {
                    Ok((span, applied)) => {
                        if !answers_target.contains(&span) {
                            answers_target.push(span);
                            answers_english.push(en_span);
                        }
                        heuristics.extend(applied);
                    }
                    Err(SpanDrop::Unaligned) => record.dropped_qas.push(drop(DropReason::SpanUnaligned)),
                    Err(SpanDrop::Degenerate) => record.dropped_qas.push(drop(DropReason::SpanDegenerate)),
                }
            }
            if answers_target.is_empty() {
                record.dropped_qas.push(drop(DropReason::NoAnswers));
                continue;
            }
            heuristics.sort();
            heuristics.dedup();

            match constrained_question(qa.question.as_str(), predicate_surface, sentence, providers, config, profile) {
                Ok(question_target) => record.qas.push(ProjectedQA {
                    question_target,
                    question_english: qa.question.clone(),
                    answers_target,
                    answers_english,
                    heuristics_applied: heuristics,
                }),
                Err(last) => record.dropped_qas.push(drop(DropReason::QuestionUnvalidated {
                    attempts: config.constrained_translation_retries,
                    last,
                })),
            }
        }
    }

    for (target, record) in by_target {
        if record.qas.is_empty() {
            outcome.audit.push(audit.entry(Some(record.english_predicate_index), Some(target), None, DropReason::NoQas));
            outcome.audit.extend(record.dropped_qas);
        } else {
            outcome.records.push(record);
        }
    }
    outcome
}

fn project_one_answer(
    en_span: TokenSpan,
    alignment: &AlignmentMap,
    sentence: &Sentence,
    predicate_index: usize,
    profile: &LanguageProfile,
) -> Result<(TokenSpan, Vec<Heuristic>), SpanDrop> {
    let mut applied = Vec::new();
    let (span, h) = project_answer_span(en_span, alignment, sentence.len())?;
    applied.extend(h);
    let (span, h) = trim_function_words(span, sentence, profile);
    applied.extend(h);
    let (span, h) = sanitize_span(span, sentence, predicate_index)?;
    applied.extend(h);
    Ok((span, applied))
}

/// Tries up to `constrained_translation_retries` translations; `Err` carries
/// the last rejected candidate.
fn constrained_question(
    question_en: &str,
    predicate_surface: &str,
    sentence: &Sentence,
    providers: Providers<'_>,
    config: &ProjectionConfig,
    profile: &LanguageProfile,
) -> Result<String, Option<String>> {
    let mut last = None;
    for attempt in 0..config.constrained_translation_retries {
        match providers.question_translator.translate_question(
            question_en,
            predicate_surface,
            &sentence.language,
            &config.question_prompt,
            attempt,
        ) {
            Ok(q) if q.trim().is_empty() => {}
            Ok(q) => {
                if validate_constrained_question(&q, predicate_surface, profile, config.allow_affixed_predicate_match) {
                    return Ok(q.trim().to_string());
                }
                log::debug!("attempt {attempt}: {q:?} lacks predicate {predicate_surface:?}");
                last = Some(q);
            }
            Err(e) => log::warn!("constrained translation attempt {attempt} failed: {e}"),
        }
    }
    Err(last)
}
