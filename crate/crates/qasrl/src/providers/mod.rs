//! Model-service clients.
//!
//! Every service is one JSON POST route. A [`Transport`] moves a request body
//! to a response body; [`ServiceProvider`] turns the core provider traits into
//! such calls. Transports are either live HTTP endpoints or fixture tables
//! keyed by a hash of the canonical request body.

mod fixture;
mod http;

use std::sync::Arc;

use qasrl_core::corpus::{PredicateKind, Sentence};
use qasrl_core::providers::{
    constrained_query, AlignmentMap, DetectedPredicate, EnglishParse, EnglishQasrl, EnglishTranslation,
    NominalizationClassifier, NominalizationPrompt, PromptTemplate, ProviderError, QuestionEmbedder,
    QuestionTranslator, Translator, WordAligner,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use fixture::{canonical_json, request_key, FixtureEntry, FixtureTables, FixtureTransport, RecordingTransport};
pub use http::{HttpTransport, ProviderEndpoint};

pub mod route {
    pub const TRANSLATE: &str = "/translate";
    pub const PARSE: &str = "/parse";
    pub const DETECT: &str = "/detect";
    pub const ALIGN: &str = "/align";
    pub const CTRANSLATE: &str = "/ctranslate";
    pub const EMBED: &str = "/embed";
    pub const NOMCLASS: &str = "/nomclass";
    pub const ALL: [&str; 7] = [TRANSLATE, PARSE, DETECT, ALIGN, CTRANSLATE, EMBED, NOMCLASS];
}

pub trait Transport: Send + Sync {
    /// `label` names the request in error messages (sentence id, question...).
    fn call(&self, route: &str, body: &Value, label: &str) -> Result<Value, ProviderError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn call(&self, route: &str, body: &Value, label: &str) -> Result<Value, ProviderError> {
        (**self).call(route, body, label)
    }
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn call(&self, route: &str, body: &Value, label: &str) -> Result<Value, ProviderError> {
        (**self).call(route, body, label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateRequest {
    pub sentence_id: String,
    pub language: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseRequest {
    pub tokens: Vec<String>,
    pub predicate_index: usize,
    pub predicate_kind: PredicateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub predicates: Vec<DetectedPredicate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignRequest {
    pub english: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignResponse {
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtranslateRequest {
    pub question: String,
    pub predicate_form: String,
    pub language: String,
    /// Fully rendered few-shot prompt ending in the query line.
    pub prompt: String,
    pub attempt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtranslateResponse {
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NomclassRequest {
    pub noun: String,
    pub language: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NomclassResponse {
    pub completion: String,
}

/// Implements every provider trait on top of one transport.
pub struct ServiceProvider<T> {
    transport: T,
}

impl<T: Transport> ServiceProvider<T> {
    pub fn new(transport: T) -> Self {
        ServiceProvider { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        route: &str,
        request: &Req,
        label: &str,
    ) -> Result<Resp, ProviderError> {
        let body = serde_json::to_value(request).map_err(|e| ProviderError::content(route, e.to_string()))?;
        let value = self.transport.call(route, &body, label)?;
        serde_json::from_value(value).map_err(|e| ProviderError::content(route, format!("{label}: {e}")))
    }
}

impl<T: Transport> Translator for ServiceProvider<T> {
    fn translate(&self, s: &Sentence) -> Result<EnglishTranslation, ProviderError> {
        let req = TranslateRequest {
            sentence_id: s.id.clone(),
            language: s.language.clone(),
            tokens: s.tokens.iter().map(|t| t.surface.clone()).collect(),
        };
        self.call(route::TRANSLATE, &req, &s.id)
    }
}

impl<T: Transport> EnglishQasrl for ServiceProvider<T> {
    fn parse(&self, tokens: &[String], idx: usize, kind: PredicateKind) -> Result<EnglishParse, ProviderError> {
        let req = ParseRequest { tokens: tokens.to_vec(), predicate_index: idx, predicate_kind: kind };
        let label = format!("{:?} @{idx}", tokens.join(" "));
        self.call(route::PARSE, &req, &label)
    }

    fn detect(&self, tokens: &[String]) -> Result<Vec<DetectedPredicate>, ProviderError> {
        let req = DetectRequest { tokens: tokens.to_vec() };
        let resp: DetectResponse = self.call(route::DETECT, &req, &format!("{:?}", tokens.join(" ")))?;
        Ok(resp.predicates)
    }
}

impl<T: Transport> WordAligner for ServiceProvider<T> {
    fn align(&self, english: &[String], target: &[String]) -> Result<AlignmentMap, ProviderError> {
        let req = AlignRequest { english: english.to_vec(), target: target.to_vec() };
        let resp: AlignResponse = self.call(route::ALIGN, &req, &format!("{:?}", target.join(" ")))?;
        AlignmentMap::new(resp.pairs, english.len(), target.len())
            .map_err(|e| ProviderError::content(route::ALIGN, e.to_string()))
    }
}

impl<T: Transport> QuestionTranslator for ServiceProvider<T> {
    fn translate_question(
        &self,
        question_en: &str,
        predicate_form: &str,
        language: &str,
        fewshot: &PromptTemplate,
        attempt: usize,
    ) -> Result<String, ProviderError> {
        let req = CtranslateRequest {
            question: question_en.to_string(),
            predicate_form: predicate_form.to_string(),
            language: language.to_string(),
            prompt: fewshot.render(&constrained_query(question_en, predicate_form)),
            attempt,
        };
        let label = format!("{question_en:?} / {predicate_form} #{attempt}");
        let resp: CtranslateResponse = self.call(route::CTRANSLATE, &req, &label)?;
        Ok(resp.question)
    }
}

impl<T: Transport> QuestionEmbedder for ServiceProvider<T> {
    fn embed(&self, question: &str) -> Result<Vec<f64>, ProviderError> {
        let req = EmbedRequest { question: question.to_string() };
        let resp: EmbedResponse = self.call(route::EMBED, &req, &format!("{question:?}"))?;
        if resp.vector.is_empty() || resp.vector.iter().any(|x| !x.is_finite()) || resp.vector.iter().all(|&x| x == 0.0)
        {
            return Err(ProviderError::content(route::EMBED, format!("{question:?}: empty, zero or non-finite vector")));
        }
        Ok(resp.vector)
    }
}

impl<T: Transport> NominalizationClassifier for ServiceProvider<T> {
    fn complete(&self, noun: &str, language: &str, prompt: &NominalizationPrompt) -> Result<String, ProviderError> {
        let req = NomclassRequest { noun: noun.to_string(), language: language.to_string(), prompt: prompt.render(noun) };
        let resp: NomclassResponse = self.call(route::NOMCLASS, &req, noun)?;
        Ok(resp.completion)
    }
}

pub type DynProvider = ServiceProvider<Arc<dyn Transport>>;
