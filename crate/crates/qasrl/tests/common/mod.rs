#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use qasrl::providers::{
    AlignRequest, AlignResponse, CtranslateRequest, CtranslateResponse, DetectRequest, DetectResponse, FixtureTables,
    ParseRequest, RecordingTransport, ServiceProvider, TranslateRequest, Transport,
};
use qasrl_core::projection::{project_record, ProjectionConfig};
use qasrl_core::providers::{DetectedPredicate, EnglishParse, EnglishQa, EnglishTranslation, ProviderError, Providers};
use qasrl_core::{PredicateKind, TokenSpan};
use serde_json::Value;

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn example_dir() -> PathBuf {
    crate_dir().join("fixtures/abstain_fr")
}

/// Scripted model services keyed by the fields that matter for each route.
#[derive(Default)]
pub struct Script {
    pub translations: HashMap<String, EnglishTranslation>,
    pub detections: HashMap<String, Vec<DetectedPredicate>>,
    pub parses: HashMap<(String, usize), Vec<EnglishQa>>,
    pub alignments: HashMap<String, Vec<(usize, usize)>>,
    pub questions: HashMap<(String, String), String>,
}

fn miss(route: &str, key: &str) -> ProviderError {
    ProviderError::FixtureMiss { route: route.into(), key: key.into() }
}

fn to<T: serde::de::DeserializeOwned>(v: &Value) -> T {
    serde_json::from_value(v.clone()).expect("request shape")
}

fn val<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap()
}

impl Transport for Script {
    fn call(&self, route: &str, body: &Value, _label: &str) -> Result<Value, ProviderError> {
        match route {
            "/translate" => {
                let r: TranslateRequest = to(body);
                self.translations.get(&r.sentence_id).map(val).ok_or_else(|| miss(route, &r.sentence_id))
            }
            "/detect" => {
                let r: DetectRequest = to(body);
                let text = r.tokens.join(" ");
                let predicates = self.detections.get(&text).cloned().ok_or_else(|| miss(route, &text))?;
                Ok(val(&DetectResponse { predicates }))
            }
            "/parse" => {
                let r: ParseRequest = to(body);
                let text = r.tokens.join(" ");
                let qas = self.parses.get(&(text.clone(), r.predicate_index)).cloned().ok_or_else(|| miss(route, &text))?;
                Ok(val(&EnglishParse {
                    text,
                    tokens: r.tokens,
                    predicate_index: r.predicate_index,
                    predicate_kind: r.predicate_kind,
                    qas,
                }))
            }
            "/align" => {
                let r: AlignRequest = to(body);
                let text = r.english.join(" ");
                let pairs = self.alignments.get(&text).cloned().ok_or_else(|| miss(route, &text))?;
                Ok(val(&AlignResponse { pairs }))
            }
            "/ctranslate" => {
                let r: CtranslateRequest = to(body);
                let q = self
                    .questions
                    .get(&(r.question.clone(), r.predicate_form.clone()))
                    .cloned()
                    .ok_or_else(|| miss(route, &r.question))?;
                Ok(val(&CtranslateResponse { question: q }))
            }
            other => Err(miss(other, "unscripted route")),
        }
    }
}

fn words(s: &str) -> Vec<String> {
    s.split(' ').map(String::from).collect()
}

pub const ABSTAIN_EN: &str = "Finally , I abstained from voting for a number of reasons .";

/// The English side, alignment and question translations of the worked
/// French example.
pub fn abstain_script() -> Script {
    let mut s = Script::default();
    s.translations.insert(
        "fr-abst".into(),
        EnglishTranslation {
            text: "Finally, I abstained from voting for a number of reasons.".into(),
            tokens: words(ABSTAIN_EN),
        },
    );
    s.detections.insert(ABSTAIN_EN.into(), vec![DetectedPredicate { index: 3, kind: PredicateKind::Verbal }]);
    let qa = |q: &str, a: usize, b: usize| EnglishQa { question: q.into(), answers: vec![TokenSpan::unchecked(a, b)] };
    s.parses.insert(
        (ABSTAIN_EN.into(), 3),
        vec![
            qa("Who abstained from something?", 2, 3),
            qa("What did someone abstain from?", 5, 6),
            qa("Why did someone abstain from something?", 6, 11),
        ],
    );
    s.alignments.insert(
        ABSTAIN_EN.into(),
        vec![(0, 3), (2, 0), (3, 1), (3, 2), (3, 4), (5, 9), (5, 10), (6, 11), (7, 12), (8, 14), (9, 15), (10, 16), (11, 17)],
    );
    for (en, fr) in [
        ("Who abstained from something?", "Qui s'est abstenu de quelque chose ?"),
        ("What did someone abstain from?", "De quoi quelqu'un s'est-il abstenu ?"),
        ("Why did someone abstain from something?", "Pourquoi quelqu'un s'est-il abstenu de quelque chose ?"),
    ] {
        s.questions.insert((en.into(), "abstenue".into()), fr.into());
    }
    s
}

/// Runs the projection over the committed CoNLL-U input against the script
/// and returns every exchange as fixture tables.
pub fn regenerate_abstain_fixtures() -> FixtureTables {
    let sentences = qasrl::io::read_conllu(&example_dir().join("fr.conllu"), "fr").unwrap();
    let provider = ServiceProvider::new(RecordingTransport::new(abstain_script()));
    let providers = Providers {
        translator: &provider,
        parser: &provider,
        aligner: &provider,
        question_translator: &provider,
        classifier: &provider,
    };
    for s in &sentences {
        let out = project_record(s, providers, &ProjectionConfig::default());
        assert!(out.audit.is_empty(), "{:?}", out.audit);
    }
    provider.transport().recorded()
}

pub fn qasrl_bin() -> &'static str {
    env!("CARGO_BIN_EXE_qasrl")
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(args: &[&str], cwd: &Path) -> Output {
    let out = std::process::Command::new(qasrl_bin()).args(args).current_dir(cwd).output().expect("spawn qasrl");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}
