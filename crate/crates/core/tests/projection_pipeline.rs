use std::cell::RefCell;
use std::collections::HashMap;

use qasrl_core::projection::{project_record, DropReason, Heuristic, ProjectionConfig};
use qasrl_core::providers::*;
use qasrl_core::record::Record;
use qasrl_core::{PredicateKind, Sentence, TokenSpan, Upos};

#[derive(Default)]
struct Tables {
    translations: HashMap<String, EnglishTranslation>,
    detections: HashMap<String, Vec<DetectedPredicate>>,
    parses: HashMap<(String, usize), Vec<EnglishQa>>,
    alignments: HashMap<String, Vec<(usize, usize)>>,
    /// (question, predicate form) -> one answer per attempt
    questions: HashMap<(String, String), Vec<String>>,
    nouns: HashMap<String, String>,
    calls: RefCell<Vec<String>>,
}

fn miss(route: &str, key: &str) -> ProviderError {
    ProviderError::FixtureMiss { route: route.into(), key: key.into() }
}

impl Translator for Tables {
    fn translate(&self, s: &Sentence) -> Result<EnglishTranslation, ProviderError> {
        self.translations.get(&s.id).cloned().ok_or_else(|| miss("/translate", &s.id))
    }
}

impl EnglishQasrl for Tables {
    fn parse(&self, tokens: &[String], idx: usize, kind: PredicateKind) -> Result<EnglishParse, ProviderError> {
        let text = tokens.join(" ");
        let qas = self.parses.get(&(text.clone(), idx)).cloned().ok_or_else(|| miss("/parse", &text))?;
        Ok(EnglishParse { text, tokens: tokens.to_vec(), predicate_index: idx, predicate_kind: kind, qas })
    }

    fn detect(&self, tokens: &[String]) -> Result<Vec<DetectedPredicate>, ProviderError> {
        let text = tokens.join(" ");
        self.detections.get(&text).cloned().ok_or_else(|| miss("/detect", &text))
    }
}

impl WordAligner for Tables {
    fn align(&self, english: &[String], _target: &[String]) -> Result<AlignmentMap, ProviderError> {
        let text = english.join(" ");
        let pairs = self.alignments.get(&text).ok_or_else(|| miss("/align", &text))?;
        Ok(AlignmentMap::from_pairs(pairs.iter().copied()))
    }
}

impl QuestionTranslator for Tables {
    fn translate_question(
        &self,
        q: &str,
        form: &str,
        _lang: &str,
        _fewshot: &PromptTemplate,
        attempt: usize,
    ) -> Result<String, ProviderError> {
        self.calls.borrow_mut().push(format!("{q}|{form}|{attempt}"));
        let answers = self.questions.get(&(q.to_string(), form.to_string())).ok_or_else(|| miss("/ctranslate", q))?;
        Ok(answers[attempt.min(answers.len() - 1)].clone())
    }
}

impl NominalizationClassifier for Tables {
    fn complete(&self, noun: &str, _l: &str, _p: &NominalizationPrompt) -> Result<String, ProviderError> {
        self.nouns.get(noun).cloned().ok_or_else(|| miss("/nomclass", noun))
    }
}

fn providers(t: &Tables) -> Providers<'_> {
    Providers { translator: t, parser: t, aligner: t, question_translator: t, classifier: t }
}

fn words(s: &str) -> Vec<String> {
    s.split(' ').map(String::from).collect()
}

fn span(a: usize, b: usize) -> TokenSpan {
    TokenSpan::unchecked(a, b)
}

fn french_sentence() -> Sentence {
    use Upos::*;
    let tags = [
        ("Je", PRON), ("me", PRON), ("suis", AUX), ("finalement", ADV), ("abstenue", VERB), ("en", ADP),
        ("ce", PRON), ("qui", PRON), ("concerne", VERB), ("le", DET), ("vote", NOUN), ("pour", ADP),
        ("un", DET), ("certain", ADJ), ("nombre", NOUN), ("de", ADP), ("raisons", NOUN), (".", PUNCT),
    ];
    Sentence::from_tagged("fr-abst", "fr", tags)
}

const EN: &str = "Finally , I abstained from voting for a number of reasons .";

fn worked_example() -> Tables {
    let mut t = Tables::default();
    t.translations.insert(
        "fr-abst".into(),
        EnglishTranslation { text: "Finally, I abstained from voting for a number of reasons.".into(), tokens: words(EN) },
    );
    t.detections.insert(EN.into(), vec![DetectedPredicate { index: 3, kind: PredicateKind::Verbal }]);
    t.parses.insert(
        (EN.into(), 3),
        vec![
            EnglishQa { question: "Who abstained from something?".into(), answers: vec![span(2, 3)] },
            EnglishQa { question: "What did someone abstain from?".into(), answers: vec![span(5, 6)] },
            EnglishQa { question: "Why did someone abstain from something?".into(), answers: vec![span(6, 11)] },
        ],
    );
    t.alignments.insert(
        EN.into(),
        vec![(0, 3), (2, 0), (3, 1), (3, 2), (3, 4), (5, 9), (5, 10), (6, 11), (7, 12), (8, 14), (9, 15), (10, 16), (11, 17)],
    );
    for (en, fr) in [
        ("Who abstained from something?", "Qui s'est abstenu de quelque chose ?"),
        ("What did someone abstain from?", "De quoi quelqu'un s'est-il abstenu ?"),
        ("Why did someone abstain from something?", "Pourquoi quelqu'un s'est-il abstenu de quelque chose ?"),
    ] {
        t.questions.insert((en.into(), "abstenue".into()), vec![fr.into()]);
    }
    t
}

#[test]
fn worked_french_example() {
    let t = worked_example();
    let out = project_record(&french_sentence(), providers(&t), &ProjectionConfig::default());
    assert!(out.audit.is_empty(), "{:?}", out.audit);
    assert_eq!(out.records.len(), 1);
    let rec = Record::from_projected(&out.records[0]);
    assert_eq!(rec.predicate.index, 4);
    assert_eq!(rec.tokens[rec.predicate.index], "abstenue");
    let got: Vec<(&str, &str)> = rec.qas.iter().map(|qa| (qa.question.as_str(), qa.answers[0].text.as_str())).collect();
    assert_eq!(
        got,
        [
            ("Qui s'est abstenu de quelque chose ?", "Je"),
            ("De quoi quelqu'un s'est-il abstenu ?", "le vote"),
            ("Pourquoi quelqu'un s'est-il abstenu de quelque chose ?", "pour un certain nombre de raisons"),
        ]
    );
    assert_eq!(rec.qas[2].heuristics, vec![Heuristic::GapFill]);
    assert!(rec.validate().is_ok());

    let again = project_record(&french_sentence(), providers(&t), &ProjectionConfig::default());
    assert_eq!(serde_json::to_string(&Record::from_projected(&again.records[0])).unwrap(), serde_json::to_string(&rec).unwrap());
}

#[test]
fn union_of_verbal_and_nominal_predicates() {
    use Upos::*;
    let en = "They organize the organization of events";
    let s = Sentence::from_tagged("u1", "xx", [("ils", PRON), ("organisent", VERB), ("événements", NOUN)]);
    let mut t = Tables::default();
    t.translations.insert("u1".into(), EnglishTranslation { text: en.into(), tokens: words(en) });
    t.detections.insert(
        en.into(),
        vec![
            DetectedPredicate { index: 3, kind: PredicateKind::Nominal },
            DetectedPredicate { index: 1, kind: PredicateKind::Verbal },
        ],
    );
    t.parses.insert((en.into(), 1), vec![EnglishQa { question: "Who organizes something?".into(), answers: vec![span(0, 1)] }]);
    t.parses.insert(
        (en.into(), 3),
        vec![
            EnglishQa { question: "What is organized?".into(), answers: vec![span(5, 6)] },
            EnglishQa { question: "Who organizes?".into(), answers: vec![span(0, 1)] },
        ],
    );
    t.alignments.insert(en.into(), vec![(0, 0), (1, 1), (3, 1), (5, 2)]);
    for q in ["Who organizes something?", "What is organized?", "Who organizes?"] {
        t.questions.insert((q.into(), "organisent".into()), vec![format!("{q} organisent")]);
    }
    let out = project_record(&s, providers(&t), &ProjectionConfig::default());
    assert_eq!(out.records.len(), 1);
    let r = &out.records[0];
    assert_eq!(r.predicate.token_index, 1);
    // 1 verbal + 2 nominal QAs
    assert_eq!(r.qas.len(), 3);
    assert_eq!(r.english_predicate_index, 1);
}

#[test]
fn retries_until_predicate_appears() {
    let mut t = worked_example();
    t.questions.insert(
        ("Who abstained from something?".into(), "abstenue".into()),
        vec!["Qui a voté ?".into(), "Qui s'est retenu ?".into(), "Qui s'est abstenu ?".into()],
    );
    let out = project_record(&french_sentence(), providers(&t), &ProjectionConfig::default());
    assert_eq!(out.records[0].qas[0].question_target, "Qui s'est abstenu ?");
    assert!(t.calls.borrow().contains(&"Who abstained from something?|abstenue|2".to_string()));

    let cfg = ProjectionConfig { constrained_translation_retries: 2, ..ProjectionConfig::default() };
    let out = project_record(&french_sentence(), providers(&t), &cfg);
    assert_eq!(out.records[0].qas.len(), 2);
    assert_eq!(
        out.records[0].dropped_qas[0].reason,
        DropReason::QuestionUnvalidated { attempts: 2, last: Some("Qui s'est retenu ?".into()) }
    );
}

#[test]
fn unaligned_only_predicate_is_audited() {
    let mut t = worked_example();
    t.alignments.insert(EN.into(), vec![(0, 3), (2, 0)]);
    let out = project_record(&french_sentence(), providers(&t), &ProjectionConfig::default());
    assert!(out.records.is_empty());
    assert_eq!(out.audit.len(), 1);
    assert_eq!(out.audit[0].reason, DropReason::PredicateUnaligned);
    assert_eq!(out.audit[0].english_predicate_index, Some(3));
}

#[test]
fn noun_gate_and_provider_failures() {
    use Upos::*;
    let en = "The committee met";
    let s = Sentence::from_tagged("g1", "fr", [("Le", DET), ("comité", NOUN), ("réuni", ADJ)]);
    let mut t = Tables::default();
    t.translations.insert("g1".into(), EnglishTranslation { text: en.into(), tokens: words(en) });
    t.detections.insert(en.into(), vec![DetectedPredicate { index: 1, kind: PredicateKind::Nominal }]);
    t.alignments.insert(en.into(), vec![(1, 1)]);
    t.nouns.insert("comité".into(), "nom commun".into());
    let out = project_record(&s, providers(&t), &ProjectionConfig::default());
    assert!(out.records.is_empty());
    assert_eq!(out.audit[0].reason, DropReason::PredicateGated);

    let missing = Sentence::from_tagged("nope", "fr", [("x", NOUN)]);
    let out = project_record(&missing, providers(&t), &ProjectionConfig::default());
    assert!(matches!(out.audit[0].reason, DropReason::TranslationFailed { .. }));
}
