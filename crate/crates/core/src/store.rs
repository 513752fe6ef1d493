//! On-disk layout of a data directory.
//!
//! ```text
//! <root>/datasets/<dataset_id>.json   uploaded datasets
//! <root>/sessions/<key>.jsonl         one header line, then one event per line
//! ```
//!
//! Event lines are appended and synced before a mutation is acknowledged.
//! A torn final line (no trailing newline) is dropped on load.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{self, CorpusError, Dataset};
use crate::session::{Event, Session, SessionError, SessionHeader};
use crate::tree::CodingTree;

pub const LOG_SCHEMA: &str = "sacode.log/1";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid key `{0}` (use letters, digits, `.`, `_`, `-`)")]
    InvalidKey(String),
    #[error("no session `{0}`")]
    NoSession(String),
    #[error("session `{0}` already exists")]
    SessionExists(String),
    #[error("no dataset `{0}`")]
    NoDataset(String),
    #[error("dataset `{0}` already exists with different content")]
    DatasetExists(String),
    #[error("dataset `{0}` is bundled and cannot be replaced")]
    BundledDataset(String),
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    schema: String,
    #[serde(flatten)]
    header: SessionHeader,
}

pub fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && !key.starts_with('.')
        && key.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Directory of session event logs.
#[derive(Debug, Clone)]
pub struct SessionLog {
    dir: PathBuf,
}

impl SessionLog {
    pub fn open(dir: impl Into<PathBuf>) -> Result<SessionLog, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(SessionLog { dir })
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.jsonl"))
    }

    pub fn exists(&self, key: &str) -> bool {
        valid_key(key) && self.path(key).is_file()
    }

    /// Writes a complete log for `session`, replacing any existing one.
    pub fn write(&self, key: &str, session: &Session) -> Result<(), StoreError> {
        if !valid_key(key) {
            return Err(StoreError::InvalidKey(key.to_string()));
        }
        let mut buf = Vec::new();
        let header = LogHeader {
            schema: LOG_SCHEMA.to_string(),
            header: session.header().clone(),
        };
        serde_json::to_writer(&mut buf, &header).expect("header serializes");
        buf.push(b'\n');
        for e in session.events() {
            serde_json::to_writer(&mut buf, e).expect("event serializes");
            buf.push(b'\n');
        }
        let path = self.path(key);
        let tmp = self.dir.join(format!(".{key}.jsonl.tmp"));
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(&buf).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(())
    }

    /// Creates a new log; fails if `key` is taken.
    pub fn create(&self, key: &str, session: &Session) -> Result<(), StoreError> {
        if self.exists(key) {
            return Err(StoreError::SessionExists(key.to_string()));
        }
        self.write(key, session)
    }

    pub fn append(&self, key: &str, events: &[Event]) -> Result<(), StoreError> {
        if !self.exists(key) {
            return Err(StoreError::NoSession(key.to_string()));
        }
        if events.is_empty() {
            return Ok(());
        }
        let path = self.path(key);
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, e).expect("event serializes");
            buf.push(b'\n');
        }
        let mut f = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
        f.write_all(&buf).map_err(io_err(&path))?;
        f.sync_data().map_err(io_err(&path))?;
        Ok(())
    }

    fn read(&self, key: &str) -> Result<(SessionHeader, Vec<Event>), StoreError> {
        if !self.exists(key) {
            return Err(StoreError::NoSession(key.to_string()));
        }
        let path = self.path(key);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let malformed = |line: usize, message: String| StoreError::Malformed {
            path: path.clone(),
            line,
            message,
        };
        let first = lines.first().ok_or_else(|| malformed(1, "empty log".into()))?;
        let header: LogHeader = serde_json::from_str(first).map_err(|e| malformed(1, e.to_string()))?;
        if header.schema != LOG_SCHEMA {
            return Err(SessionError::SchemaMismatch(header.schema).into());
        }
        let mut events = Vec::with_capacity(lines.len().saturating_sub(1));
        for (i, line) in lines.iter().enumerate().skip(1) {
            match serde_json::from_str::<Event>(line) {
                Ok(e) => events.push(e),
                Err(_) if i + 1 == lines.len() && !complete => break,
                Err(e) => return Err(malformed(i + 1, e.to_string())),
            }
        }
        Ok((header.header, events))
    }

    pub fn header(&self, key: &str) -> Result<SessionHeader, StoreError> {
        Ok(self.read(key)?.0)
    }

    /// Folds the stored events into a session.
    pub fn load(&self, key: &str, tree: Arc<CodingTree>) -> Result<Session, StoreError> {
        let (header, events) = self.read(key)?;
        Ok(Session::replay(header, tree, events)?)
    }

    /// Keys of stored sessions, sorted.
    pub fn keys(&self) -> Result<Vec<String>, StoreError> {
        let mut keys = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io_err(&self.dir))? {
            let entry = entry.map_err(io_err(&self.dir))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if let Some(key) = name.strip_suffix(".jsonl") {
                if valid_key(key) {
                    keys.push(key.to_string());
                }
            }
        }
        keys.sort();
        Ok(keys)
    }
}

/// A data directory: uploaded datasets next to session logs, all coded
/// against one tree.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    tree: Arc<CodingTree>,
    sessions: SessionLog,
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>, tree: Arc<CodingTree>) -> Result<Workspace, StoreError> {
        let root = root.into();
        let datasets = root.join("datasets");
        fs::create_dir_all(&datasets).map_err(io_err(&datasets))?;
        let sessions = SessionLog::open(root.join("sessions"))?;
        // Fail early on a read-only directory.
        let probe = root.join(".write-probe");
        File::create(&probe).map_err(io_err(&probe))?;
        let _ = fs::remove_file(&probe);
        Ok(Workspace { root, tree, sessions })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tree(&self) -> &Arc<CodingTree> {
        &self.tree
    }

    pub fn sessions(&self) -> &SessionLog {
        &self.sessions
    }

    fn dataset_path(&self, id: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{id}.json"))
    }

    /// Bundled datasets first, then uploaded ones sorted by id.
    pub fn datasets(&self) -> Result<Vec<Dataset>, StoreError> {
        let mut out = corpus::bundled_datasets();
        let dir = self.root.join("datasets");
        let mut stored = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("json") {
                let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                stored.push(corpus::parse_dataset_json(&text)?);
            }
        }
        stored.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));
        out.extend(stored);
        Ok(out)
    }

    pub fn dataset(&self, id: &str) -> Result<Dataset, StoreError> {
        if let Some(d) = corpus::bundled_dataset(id) {
            return Ok(d);
        }
        if !valid_key(id) {
            return Err(StoreError::NoDataset(id.to_string()));
        }
        let path = self.dataset_path(id);
        if !path.is_file() {
            return Err(StoreError::NoDataset(id.to_string()));
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(corpus::parse_dataset_json(&text)?)
    }

    /// Stores an uploaded dataset. Re-adding identical content is a no-op.
    pub fn add_dataset(&self, dataset: &Dataset) -> Result<(), StoreError> {
        let id = &dataset.dataset_id;
        if corpus::BUNDLED_DATASET_IDS.contains(&id.as_str()) {
            return Err(StoreError::BundledDataset(id.clone()));
        }
        if !valid_key(id) {
            return Err(StoreError::InvalidKey(id.clone()));
        }
        let path = self.dataset_path(id);
        if path.is_file() {
            return match self.dataset(id) {
                Ok(existing) if &existing == dataset => Ok(()),
                _ => Err(StoreError::DatasetExists(id.clone())),
            };
        }
        let tmp = self.root.join("datasets").join(format!(".{id}.json.tmp"));
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(dataset.to_json().as_bytes()).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(())
    }

    pub fn load_session(&self, key: &str) -> Result<Session, StoreError> {
        let session = self.sessions.load(key, self.tree.clone())?;
        let dataset = self.dataset(session.dataset_id())?;
        if session.items() != dataset.item_ids().as_slice() {
            return Err(SessionError::ItemsMismatch(dataset.dataset_id).into());
        }
        Ok(session)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Code;
    use crate::corpus::bundled_dataset;
    use crate::tree::Answer;

    fn tree() -> Arc<CodingTree> {
        Arc::new(CodingTree::default_tree())
    }

    #[test]
    fn log_round_trip_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let log = SessionLog::open(dir.path()).unwrap();
        let etsi = bundled_dataset("etsi").unwrap();
        let mut s = Session::create(&etsi, tree(), "c");
        log.create("s1", &s).unwrap();
        assert!(matches!(log.create("s1", &s), Err(StoreError::SessionExists(_))));

        let before = s.events().len();
        s.answer("ETSI-1-1", Answer::No).unwrap();
        s.record_code("ETSI-1-2", Code::P5).unwrap();
        log.append("s1", &s.events()[before..]).unwrap();

        let loaded = log.load("s1", tree()).unwrap();
        assert_eq!(loaded, s);
        assert_eq!(log.keys().unwrap(), vec!["s1".to_string()]);
    }

    #[test]
    fn torn_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let log = SessionLog::open(dir.path()).unwrap();
        let etsi = bundled_dataset("etsi").unwrap();
        let mut s = Session::create(&etsi, tree(), "c");
        s.answer("ETSI-1-1", Answer::No).unwrap();
        log.write("s", &s).unwrap();
        let mut f = OpenOptions::new().append(true).open(log.path("s")).unwrap();
        f.write_all(b"{\"type\":\"answ").unwrap();
        drop(f);
        assert_eq!(log.load("s", tree()).unwrap(), s);
    }

    #[test]
    fn bad_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let log = SessionLog::open(dir.path()).unwrap();
        let etsi = bundled_dataset("etsi").unwrap();
        let s = Session::create(&etsi, tree(), "c");
        assert!(matches!(log.write("../x", &s), Err(StoreError::InvalidKey(_))));
        assert!(matches!(log.load("missing", tree()), Err(StoreError::NoSession(_))));
    }

    #[test]
    fn workspace_datasets() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path(), tree()).unwrap();
        assert_eq!(ws.datasets().unwrap().len(), 3);
        let mut d = bundled_dataset("dcms-full").unwrap();
        assert!(matches!(ws.add_dataset(&d), Err(StoreError::BundledDataset(_))));
        d.dataset_id = "my-set".into();
        ws.add_dataset(&d).unwrap();
        ws.add_dataset(&d).unwrap();
        assert_eq!(ws.dataset("my-set").unwrap(), d);
        d.title = "changed".into();
        assert!(matches!(ws.add_dataset(&d), Err(StoreError::DatasetExists(_))));
        let ids: Vec<_> = ws.datasets().unwrap().into_iter().map(|d| d.dataset_id).collect();
        assert_eq!(ids, vec!["dcms-full", "dcms-sub", "etsi", "my-set"]);
        assert!(matches!(ws.dataset("nope"), Err(StoreError::NoDataset(_))));
    }
}
