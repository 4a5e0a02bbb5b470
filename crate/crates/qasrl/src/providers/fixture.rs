use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use qasrl_core::providers::ProviderError;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{route, Transport};
use crate::io::{write_text, DataError};

/// JSON text with object keys sorted at every level and no whitespace.
pub fn canonical_json(v: &Value) -> String {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", serde_json::to_string(k).expect("string"), canonical_json(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => format!("[{}]", items.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => serde_json::to_string(other).expect("scalar"),
    }
}

/// Lowercase hex SHA-256 of the canonical request body.
pub fn request_key(body: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(body).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request: Value,
    pub response: Value,
}

/// Per-route lookup tables, stored as `<dir>/<route>.json`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixtureTables {
    routes: BTreeMap<String, BTreeMap<String, FixtureEntry>>,
}

fn file_name(route: &str) -> String {
    format!("{}.json", route.trim_start_matches('/'))
}

impl FixtureTables {
    pub fn insert<Req: Serialize, Resp: Serialize>(&mut self, route: &str, request: &Req, response: &Resp) {
        let request = serde_json::to_value(request).expect("serializable request");
        let response = serde_json::to_value(response).expect("serializable response");
        self.insert_value(route, request, response);
    }

    pub fn insert_value(&mut self, route: &str, request: Value, response: Value) {
        let key = request_key(&request);
        self.routes.entry(route.to_string()).or_default().insert(key, FixtureEntry { request, response });
    }

    pub fn get(&self, route: &str, body: &Value) -> Option<&FixtureEntry> {
        self.routes.get(route)?.get(&request_key(body))
    }

    pub fn len(&self) -> usize {
        self.routes.values().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn merge(&mut self, other: FixtureTables) {
        for (route, table) in other.routes {
            self.routes.entry(route).or_default().extend(table);
        }
    }

    /// Loads every known route file present in `dir`. Entries whose key does
    /// not match their request are rejected.
    pub fn load(dir: &Path) -> Result<Self, DataError> {
        if !dir.is_dir() {
            return Err(DataError::Invalid(format!("fixture directory {} does not exist", dir.display())));
        }
        let mut tables = FixtureTables::default();
        for r in route::ALL {
            let path = dir.join(file_name(r));
            if !path.exists() {
                continue;
            }
            let text = crate::io::read_text(&path)?;
            let table: BTreeMap<String, FixtureEntry> = serde_json::from_str(&text)
                .map_err(|e| DataError::Parse { source_name: path.display().to_string(), line: e.line(), message: e.to_string() })?;
            for (key, entry) in &table {
                if *key != request_key(&entry.request) {
                    return Err(DataError::Invalid(format!(
                        "{}: key {key} does not hash its request",
                        path.display()
                    )));
                }
            }
            tables.routes.insert(r.to_string(), table);
        }
        Ok(tables)
    }

    /// Pretty-printed, key-sorted route files; empty routes are not written.
    pub fn save(&self, dir: &Path) -> Result<(), DataError> {
        fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.to_path_buf(), source })?;
        for (r, table) in &self.routes {
            if table.is_empty() {
                continue;
            }
            let mut text = serde_json::to_string_pretty(table).expect("serializable");
            text.push('\n');
            write_text(&dir.join(file_name(r)), &text)?;
        }
        Ok(())
    }
}

pub struct FixtureTransport {
    tables: FixtureTables,
}

impl FixtureTransport {
    pub fn new(tables: FixtureTables) -> Self {
        FixtureTransport { tables }
    }

    pub fn load(dir: &Path) -> Result<Self, DataError> {
        Ok(FixtureTransport::new(FixtureTables::load(dir)?))
    }
}

impl Transport for FixtureTransport {
    fn call(&self, route: &str, body: &Value, label: &str) -> Result<Value, ProviderError> {
        match self.tables.get(route, body) {
            Some(e) => Ok(e.response.clone()),
            None => Err(ProviderError::FixtureMiss {
                route: route.to_string(),
                key: format!("{label} (key {})", &request_key(body)[..12]),
            }),
        }
    }
}

/// Passes calls through and keeps every successful exchange, so a live run
/// can be frozen into fixtures.
pub struct RecordingTransport<T> {
    inner: T,
    recorded: Mutex<FixtureTables>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport { inner, recorded: Mutex::new(FixtureTables::default()) }
    }

    pub fn recorded(&self) -> FixtureTables {
        self.recorded.lock().expect("recorder lock").clone()
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn call(&self, route: &str, body: &Value, label: &str) -> Result<Value, ProviderError> {
        let resp = self.inner.call(route, body, label)?;
        self.recorded.lock().expect("recorder lock").insert_value(route, body.clone(), resp.clone());
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_form_ignores_key_order() {
        let a = json!({"b": 1, "a": {"y": [1, {"d": 2, "c": 3}], "x": "é"}});
        let b: Value = serde_json::from_str(r#"{"a":{"x":"é","y":[1,{"c":3,"d":2}]},"b":1}"#).unwrap();
        assert_eq!(canonical_json(&a), r#"{"a":{"x":"é","y":[1,{"c":3,"d":2}]},"b":1}"#);
        assert_eq!(request_key(&a), request_key(&b));
        assert_eq!(request_key(&a).len(), 64);
    }

    #[test]
    fn miss_names_label() {
        let t = FixtureTransport::new(FixtureTables::default());
        let err = t.call("/translate", &json!({"sentence_id": "s9"}), "s9").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("fixture miss on /translate: s9 (key "), "{msg}");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = FixtureTables::default();
        t.insert("/embed", &json!({"question": "q"}), &json!({"vector": [1.0, 0.0]}));
        t.insert("/translate", &json!({"sentence_id": "a"}), &json!({"text": "x", "tokens": ["x"]}));
        t.save(dir.path()).unwrap();
        let loaded = FixtureTables::load(dir.path()).unwrap();
        assert_eq!(loaded, t);
        assert!(!dir.path().join("parse.json").exists());
        fs::write(dir.path().join("embed.json"), r#"{"bogus": {"request": {}, "response": {}}}"#).unwrap();
        assert!(FixtureTables::load(dir.path()).is_err());
    }
}
