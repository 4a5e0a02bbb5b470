//! Question embedders used by semantic matching.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use qasrl_core::providers::{ProviderError, QuestionEmbedder};
use qasrl_core::text::{nfc, normalize_question};
use sha2::{Digest, Sha256};

pub type SharedEmbedder = Arc<dyn QuestionEmbedder + Send + Sync>;

/// Cache key and the text actually sent downstream: NFC, trimmed, inner
/// whitespace collapsed. Case is kept because some embedders are cased.
pub fn embedding_key(question: &str) -> String {
    nfc(question).split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Memoizes an inner embedder. Errors are not cached.
pub struct CachingEmbedder {
    inner: SharedEmbedder,
    cache: RwLock<HashMap<String, Arc<Vec<f64>>>>,
}

impl CachingEmbedder {
    pub fn new(inner: SharedEmbedder) -> Self {
        CachingEmbedder { inner, cache: RwLock::new(HashMap::new()) }
    }

    pub fn cached(&self) -> usize {
        self.cache.read().expect("embed cache").len()
    }
}

impl QuestionEmbedder for CachingEmbedder {
    fn embed(&self, question: &str) -> Result<Vec<f64>, ProviderError> {
        let key = embedding_key(question);
        if let Some(v) = self.cache.read().expect("embed cache").get(&key) {
            return Ok(v.as_ref().clone());
        }
        let v = self.inner.embed(&key)?;
        self.cache.write().expect("embed cache").insert(key, Arc::new(v.clone()));
        Ok(v)
    }
}

/// Offline embedder: hashed character trigrams of the normalized question,
/// with word-boundary markers, as term counts in a fixed number of buckets.
#[derive(Debug, Clone, Copy)]
pub struct NgramEmbedder {
    pub dims: usize,
}

impl Default for NgramEmbedder {
    fn default() -> Self {
        NgramEmbedder { dims: 256 }
    }
}

impl QuestionEmbedder for NgramEmbedder {
    fn embed(&self, question: &str) -> Result<Vec<f64>, ProviderError> {
        let mut v = vec![0.0; self.dims.max(1)];
        let norm = normalize_question(question);
        for word in norm.split(' ').filter(|w| !w.is_empty()) {
            let chars: Vec<char> = std::iter::once('<').chain(word.chars()).chain(std::iter::once('>')).collect();
            for gram in chars.windows(3.min(chars.len())) {
                let s: String = gram.iter().collect();
                let h = Sha256::digest(s.as_bytes());
                let bucket = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) as usize % v.len();
                v[bucket] += 1.0;
            }
        }
        if v.iter().all(|&x| x == 0.0) {
            return Err(ProviderError::content("/embed", format!("{question:?}: nothing to embed")));
        }
        Ok(v)
    }
}
