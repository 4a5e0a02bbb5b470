//! On-disk curation store: an append-only event journal plus periodic
//! snapshots in the record schema.
//!
//! Layout of the data directory:
//!
//! ```text
//! journal.jsonl                one JournalEvent per line, never rewritten
//! snapshot.json                {"events": N, "dir": N}
//! snapshots/N/current.jsonl    records with curation state after N events
//! snapshots/N/original.jsonl   the same items as first imported
//! ```
//!
//! `snapshot.json` is replaced atomically only after its generation directory
//! is complete, so a crash mid-snapshot leaves the previous one in force.

use std::fs::{self, File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock, RwLockReadGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use qasrl_core::curation::{
    CurationError, CurationItem, CurationStore, Edit, ErrorCategory, ExportFilter, JournalEvent,
};
use qasrl_core::record::Record;
use serde::{Deserialize, Serialize};

use crate::io::{parse_records, read_text, write_records, write_text, DataError};

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Curation(#[from] CurationError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct SnapshotMeta {
    events: u64,
    dir: u64,
}

struct Inner {
    store: CurationStore,
    journal: File,
    events: u64,
    since_snapshot: u64,
}

pub struct PersistentStore {
    dir: PathBuf,
    inner: RwLock<Inner>,
    snapshot_every: u64,
    clock: Clock,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

impl PersistentStore {
    pub const DEFAULT_SNAPSHOT_EVERY: u64 = 100;

    /// Opens (or creates) the store in `dir`, recovering from the latest
    /// snapshot plus the journal tail.
    pub fn open(dir: &Path, snapshot_every: u64, clock: Clock) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let (store, events) = recover(dir)?;
        let path = dir.join("journal.jsonl");
        let journal = OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        Ok(PersistentStore {
            dir: dir.to_path_buf(),
            inner: RwLock::new(Inner { store, journal, events, since_snapshot: 0 }),
            snapshot_every: snapshot_every.max(1),
            clock,
        })
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.inner.read().expect("store lock")
    }

    pub fn with_store<R>(&self, f: impl FnOnce(&CurationStore) -> R) -> R {
        f(&self.read().store)
    }

    pub fn events(&self) -> u64 {
        self.read().events
    }

    pub fn import(&self, records: Vec<Record>) -> Result<usize, StoreError> {
        let mut g = self.inner.write().expect("store lock");
        let n = g.store.import(records.clone())?;
        if n > 0 {
            self.commit(&mut g, &JournalEvent::Import { records })?;
        }
        Ok(n)
    }

    pub fn apply_edit(&self, key: &str, edit: Edit, expected_version: Option<u64>) -> Result<CurationItem, StoreError> {
        let timestamp = (self.clock)();
        let mut g = self.inner.write().expect("store lock");
        let item = g.store.apply_edit(key, &edit, expected_version, timestamp)?.clone();
        self.commit(&mut g, &JournalEvent::Edit { key: item.key.clone(), expected_version, edit, timestamp })?;
        Ok(item)
    }

    pub fn tag(&self, key: &str, qa_index: usize, category: ErrorCategory) -> Result<CurationItem, StoreError> {
        let timestamp = (self.clock)();
        let mut g = self.inner.write().expect("store lock");
        let item = g.store.tag_error_category(key, qa_index, category, timestamp)?.clone();
        self.commit(&mut g, &JournalEvent::Tag { key: item.key.clone(), qa_index, category, timestamp })?;
        Ok(item)
    }

    pub fn export(&self, filter: &ExportFilter) -> Vec<Record> {
        self.read().store.export(filter)
    }

    /// Journals an event already applied in memory. If the append fails the
    /// in-memory state is rebuilt from disk so it never runs ahead of the
    /// journal.
    fn commit(&self, g: &mut Inner, event: &JournalEvent) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(event).expect("serializable");
        line.push('\n');
        let path = self.dir.join("journal.jsonl");
        let written = g.journal.write_all(line.as_bytes()).and_then(|_| g.journal.sync_data());
        if let Err(e) = written {
            log::error!("journal append failed, reloading store: {e}");
            let (store, events) = recover(&self.dir)?;
            g.store = store;
            g.events = events;
            return Err(DataError::Io { path, source: e }.into());
        }
        g.events += 1;
        g.since_snapshot += 1;
        if g.since_snapshot >= self.snapshot_every {
            if let Err(e) = write_snapshot(&self.dir, &g.store, g.events) {
                log::warn!("snapshot failed (journal is intact): {e}");
            } else {
                g.since_snapshot = 0;
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Result<(), StoreError> {
        let mut g = self.inner.write().expect("store lock");
        write_snapshot(&self.dir, &g.store, g.events)?;
        g.since_snapshot = 0;
        Ok(())
    }
}

fn write_snapshot(dir: &Path, store: &CurationStore, events: u64) -> Result<(), DataError> {
    let gen = dir.join("snapshots").join(events.to_string());
    let items: Vec<&CurationItem> = store.items(None).collect();
    let current: Vec<Record> = items.iter().map(|i| i.to_record()).collect();
    let original: Vec<Record> = items.iter().map(|i| i.original().cloned().unwrap_or_else(|| i.record.clone())).collect();
    write_records(&gen.join("current.jsonl"), &current)?;
    write_records(&gen.join("original.jsonl"), &original)?;
    let meta = SnapshotMeta { events, dir: events };
    write_text(&dir.join("snapshot.json"), &serde_json::to_string(&meta).expect("serializable"))?;
    // older generations are no longer referenced
    if let Ok(entries) = fs::read_dir(dir.join("snapshots")) {
        for e in entries.flatten() {
            if e.file_name() != *events.to_string() {
                let _ = fs::remove_dir_all(e.path());
            }
        }
    }
    Ok(())
}

fn recover(dir: &Path) -> Result<(CurationStore, u64), StoreError> {
    let mut store = CurationStore::new();
    let mut skip = 0;
    let meta_path = dir.join("snapshot.json");
    if meta_path.exists() {
        let meta: SnapshotMeta = serde_json::from_str(&read_text(&meta_path)?).map_err(|e| DataError::Parse {
            source_name: meta_path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let gen = dir.join("snapshots").join(meta.dir.to_string());
        let cur_path = gen.join("current.jsonl");
        let orig_path = gen.join("original.jsonl");
        let current = parse_records(&read_text(&cur_path)?, &cur_path.display().to_string())?;
        let original = parse_records(&read_text(&orig_path)?, &orig_path.display().to_string())?;
        if current.len() != original.len() {
            return Err(DataError::Invalid(format!("{}: current and original differ in length", gen.display())).into());
        }
        for (c, o) in current.into_iter().zip(original) {
            store.restore(c, o)?;
        }
        skip = meta.events;
    }

    let path = dir.join("journal.jsonl");
    if !path.exists() {
        return Ok((store, skip));
    }
    let text = read_text(&path)?;
    let mut events = 0u64;
    let mut good_len = 0usize;
    let mut offset = 0usize;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        offset += line.len();
        let complete = line.ends_with('\n');
        let body = line.trim_end_matches('\n');
        if body.trim().is_empty() {
            good_len = offset;
            continue;
        }
        // an unterminated last line is a torn append
        if !complete {
            log::warn!("{}: ignoring truncated final line {}", path.display(), i + 1);
            break;
        }
        let event: JournalEvent = match serde_json::from_str(body) {
            Ok(e) => e,
            Err(e) => {
                return Err(DataError::Parse { source_name: path.display().to_string(), line: i + 1, message: e.to_string() }.into())
            }
        };
        events += 1;
        good_len = offset;
        if events > skip {
            store.apply_event(&event).map_err(|e| {
                DataError::Invalid(format!("{}: line {}: replay failed: {e}", path.display(), i + 1))
            })?;
        }
    }
    if events < skip {
        return Err(DataError::Invalid(format!(
            "{}: journal has {events} events but the snapshot covers {skip}",
            path.display()
        ))
        .into());
    }
    if good_len < text.len() {
        let mut f = OpenOptions::new().write(true).open(&path).map_err(io(&path))?;
        f.set_len(good_len as u64).map_err(io(&path))?;
        f.seek(SeekFrom::End(0)).map_err(io(&path))?;
    }
    Ok((store, events))
}
