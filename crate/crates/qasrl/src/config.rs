//! `run.toml`: provider wiring plus projection and evaluation settings.
//!
//! ```toml
//! language = "fr"
//! jobs = 4
//!
//! [providers.default]
//! fixture = "fixtures/run1"
//!
//! [providers.question_translator]
//! endpoint = { base_url = "http://localhost:8100", auth_token_env = "LLM_TOKEN" }
//!
//! [providers.embedder]
//! builtin = "ngram"
//! ```
//!
//! Roles without an entry fall back to `default`. Relative fixture paths
//! resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use qasrl_core::evaluation::EvalConfig;
use qasrl_core::projection::ProjectionConfig;
use qasrl_core::providers::{
    EnglishQasrl, NominalizationClassifier, ProviderError, Providers, QuestionEmbedder, QuestionTranslator, Translator,
    WordAligner,
};
use serde::{Deserialize, Serialize};

use crate::embed::{CachingEmbedder, NgramEmbedder, SharedEmbedder};
use crate::io::{read_text, DataError};
use crate::providers::{
    FixtureTables, FixtureTransport, HttpTransport, ProviderEndpoint, RecordingTransport, ServiceProvider, Transport,
};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<ProviderEndpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    /// Only `"ngram"`, and only for the embedder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
}

impl ProviderSource {
    pub fn fixture(dir: impl Into<PathBuf>) -> Self {
        ProviderSource { fixture: Some(dir.into()), ..Default::default() }
    }

    fn check(&self, role: &str) -> Result<(), DataError> {
        let n = self.endpoint.is_some() as u8 + self.fixture.is_some() as u8 + self.builtin.is_some() as u8;
        if n != 1 {
            return Err(DataError::Invalid(format!(
                "providers.{role}: set exactly one of endpoint, fixture or builtin"
            )));
        }
        match self.builtin.as_deref() {
            Some("ngram") if role == "embedder" => Ok(()),
            Some(other) => Err(DataError::Invalid(format!("providers.{role}: unknown builtin {other:?}"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersConfig {
    pub default: Option<ProviderSource>,
    pub translator: Option<ProviderSource>,
    pub parser: Option<ProviderSource>,
    pub aligner: Option<ProviderSource>,
    pub question_translator: Option<ProviderSource>,
    pub embedder: Option<ProviderSource>,
    pub classifier: Option<ProviderSource>,
}

pub const ROLES: [&str; 6] = ["translator", "parser", "aligner", "question_translator", "embedder", "classifier"];

impl ProvidersConfig {
    pub fn source(&self, role: &str) -> Option<&ProviderSource> {
        let explicit = match role {
            "translator" => &self.translator,
            "parser" => &self.parser,
            "aligner" => &self.aligner,
            "question_translator" => &self.question_translator,
            "embedder" => &self.embedder,
            "classifier" => &self.classifier,
            _ => &None,
        };
        explicit.as_ref().or(self.default.as_ref())
    }

    /// Every role served by one fixture directory.
    pub fn all_fixtures(dir: impl Into<PathBuf>) -> Self {
        ProvidersConfig { default: Some(ProviderSource::fixture(dir)), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub language: Option<String>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub providers: ProvidersConfig,
    pub projection: ProjectionConfig,
    pub evaluation: EvalConfig,
}

impl RunConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self, DataError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| DataError::Parse {
            source_name: source_name.to_string(),
            line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.evaluation.validate().map_err(|e| DataError::Invalid(format!("{source_name}: evaluation: {e}")))?;
        for role in ROLES {
            if let Some(src) = cfg.providers.source(role) {
                src.check(role)?;
            }
        }
        Ok(cfg)
    }

    /// Loads and resolves relative fixture paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let mut cfg = RunConfig::parse(&read_text(path)?, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.providers;
        for src in [&mut p.default, &mut p.translator, &mut p.parser, &mut p.aligner, &mut p.question_translator, &mut p.embedder, &mut p.classifier]
            .into_iter()
            .flatten()
        {
            if let Some(dir) = &mut src.fixture {
                if dir.is_relative() {
                    *dir = base.join(&*dir);
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

type Shared<T> = Arc<T>;

/// Concrete provider handles for one run. Identical sources share one
/// transport, so a fixture directory is loaded once.
pub struct ProviderSet {
    pub translator: Shared<dyn Translator + Send + Sync>,
    pub parser: Shared<dyn EnglishQasrl + Send + Sync>,
    pub aligner: Shared<dyn WordAligner + Send + Sync>,
    pub question_translator: Shared<dyn QuestionTranslator + Send + Sync>,
    pub classifier: Shared<dyn NominalizationClassifier + Send + Sync>,
    recorders: Vec<Arc<RecordingTransport<Arc<dyn Transport>>>>,
}

struct TransportCache {
    record: bool,
    built: BTreeMap<String, Arc<dyn Transport>>,
    recorders: Vec<Arc<RecordingTransport<Arc<dyn Transport>>>>,
}

impl TransportCache {
    fn get(&mut self, role: &str, src: Option<&ProviderSource>) -> Result<Arc<dyn Transport>, SetupError> {
        let src = src.ok_or_else(|| DataError::Invalid(format!("no provider configured for {role}")))?;
        let key = serde_json::to_string(src).expect("serializable");
        if let Some(t) = self.built.get(&key) {
            return Ok(t.clone());
        }
        let base: Arc<dyn Transport> = match (&src.endpoint, &src.fixture) {
            (Some(ep), _) => Arc::new(HttpTransport::new(ep.clone())?),
            (None, Some(dir)) => Arc::new(FixtureTransport::load(dir)?),
            _ => return Err(DataError::Invalid(format!("providers.{role}: builtin is only valid for embedder")).into()),
        };
        let t: Arc<dyn Transport> = if self.record {
            let r = Arc::new(RecordingTransport::new(base));
            self.recorders.push(r.clone());
            r
        } else {
            base
        };
        self.built.insert(key, t.clone());
        Ok(t)
    }
}

fn service(t: Arc<dyn Transport>) -> Arc<ServiceProvider<Arc<dyn Transport>>> {
    Arc::new(ServiceProvider::new(t))
}

impl ProviderSet {
    /// Builds the projection providers. With `record`, every exchange is kept
    /// for [`ProviderSet::recorded`].
    pub fn build(cfg: &ProvidersConfig, record: bool) -> Result<Self, SetupError> {
        let mut cache = TransportCache { record, built: BTreeMap::new(), recorders: Vec::new() };
        let translator = service(cache.get("translator", cfg.source("translator"))?);
        let parser = service(cache.get("parser", cfg.source("parser"))?);
        let aligner = service(cache.get("aligner", cfg.source("aligner"))?);
        let question_translator = service(cache.get("question_translator", cfg.source("question_translator"))?);
        let classifier = service(cache.get("classifier", cfg.source("classifier"))?);
        Ok(ProviderSet {
            translator,
            parser,
            aligner,
            question_translator,
            classifier,
            recorders: cache.recorders,
        })
    }

    pub fn providers(&self) -> Providers<'_> {
        Providers {
            translator: &*self.translator,
            parser: &*self.parser,
            aligner: &*self.aligner,
            question_translator: &*self.question_translator,
            classifier: &*self.classifier,
        }
    }

    pub fn recorded(&self) -> FixtureTables {
        let mut all = FixtureTables::default();
        for r in &self.recorders {
            all.merge(r.recorded());
        }
        all
    }
}

/// Embedder for evaluation; the n-gram embedder when nothing is configured.
/// Always wrapped in a cache.
pub fn build_embedder(cfg: &ProvidersConfig) -> Result<Arc<CachingEmbedder>, SetupError> {
    let inner: SharedEmbedder = match cfg.embedder.as_ref() {
        None => Arc::new(NgramEmbedder::default()),
        Some(src) => {
            src.check("embedder")?;
            if src.builtin.is_some() {
                Arc::new(NgramEmbedder::default())
            } else {
                let mut cache = TransportCache { record: false, built: BTreeMap::new(), recorders: Vec::new() };
                let t = cache.get("embedder", Some(src))?;
                Arc::new(ServiceProvider::new(t)) as Arc<dyn QuestionEmbedder + Send + Sync>
            }
        }
    };
    Ok(Arc::new(CachingEmbedder::new(inner)))
}
