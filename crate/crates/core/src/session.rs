//! A coder's progress through one dataset.
//!
//! Session state is a fold over an append-only event log. Every mutation is
//! validated, turned into an [`Event`], and applied through the same
//! [`Session::apply`] path that replay uses, so `replay(log) == state`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::code::Code;
use crate::corpus::{Assignment, Dataset};
use crate::tree::{Answer, AnswerStep, CodingTree, Position, QuestionId};

pub const CHECKPOINT_SCHEMA: &str = "sacode.session/1";

/// The only supplementary tag with a code restriction.
pub const UNFOCUSED: &str = "Unfocused";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingDecision {
    pub item_id: String,
    pub path: Vec<AnswerStep>,
    pub code: Code,
    #[serde(default)]
    pub supplementary_tags: BTreeSet<String>,
    pub pathless: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Answered {
        item_id: String,
        question: QuestionId,
        answer: Answer,
        at: DateTime<Utc>,
    },
    Undone {
        item_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        token: Option<String>,
        at: DateTime<Utc>,
    },
    TagsSet {
        item_id: String,
        tags: BTreeSet<String>,
        at: DateTime<Utc>,
    },
    /// A final code recorded without an answer path.
    Finalized {
        item_id: String,
        code: Code,
        at: DateTime<Utc>,
    },
}

impl Event {
    pub fn item_id(&self) -> &str {
        match self {
            Event::Answered { item_id, .. }
            | Event::Undone { item_id, .. }
            | Event::TagsSet { item_id, .. }
            | Event::Finalized { item_id, .. } => item_id,
        }
    }

    pub fn at(&self) -> DateTime<Utc> {
        match self {
            Event::Answered { at, .. }
            | Event::Undone { at, .. }
            | Event::TagsSet { at, .. }
            | Event::Finalized { at, .. } => *at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("item `{0}` is already finalized; undo first")]
    AlreadyFinalized(String),
    #[error("item `{0}` has not been finalized")]
    NotFinalized(String),
    #[error("item `{0}` has nothing to undo")]
    NothingToUndo(String),
    #[error("item `{0}` is in progress; undo its answers before recording a code")]
    InProgress(String),
    #[error("tag `{tag}` is not allowed with code {code}")]
    TagNotAllowed { tag: String, code: Code },
    #[error("empty supplementary tag")]
    EmptyTag,
    #[error("unknown code `{0}`")]
    UnknownCode(String),
    #[error("code {0} is not a leaf of this tree")]
    CodeNotInTree(Code),
    #[error("duplicate assignment for item `{0}`")]
    DuplicateAssignment(String),
    #[error("checkpoint is for dataset `{found}`, expected `{expected}`")]
    DatasetMismatch { expected: String, found: String },
    #[error("checkpoint tree fingerprint {found} does not match loaded tree {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("unsupported checkpoint schema `{0}`")]
    SchemaMismatch(String),
    #[error("checkpoint item list does not match dataset `{0}`")]
    ItemsMismatch(String),
    #[error("answer for `{item_id}` recorded at {recorded}, but the item is at {expected}")]
    WrongQuestion {
        item_id: String,
        recorded: QuestionId,
        expected: QuestionId,
    },
    #[error("checkpoint parse error: {0}")]
    Parse(String),
    #[error("event log is inconsistent at event {index}: {source}")]
    Replay {
        index: usize,
        #[source]
        source: Box<SessionError>,
    },
    #[error("materialized decisions disagree with the event log")]
    Corrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Pending,
    InProgress,
    Finalized,
}

/// Snapshot of one item's coding state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemState {
    pub item_id: String,
    pub status: ItemStatus,
    pub path: Vec<AnswerStep>,
    pub current_question: Option<QuestionId>,
    pub decision: Option<CodingDecision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AnswerOutcome {
    Next { question: QuestionId, path: Vec<AnswerStep> },
    Finalized { decision: CodingDecision },
}

/// Identity and data fixed at creation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub dataset_id: String,
    pub tree_fingerprint: String,
    pub coder_id: String,
    pub created_at: DateTime<Utc>,
    pub items: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Session {
    header: SessionHeader,
    tree: Arc<CodingTree>,
    item_set: HashSet<String>,
    updated_at: DateTime<Utc>,
    decisions: BTreeMap<String, CodingDecision>,
    in_progress: BTreeMap<String, Vec<AnswerStep>>,
    events: Vec<Event>,
}

impl PartialEq for Session {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header
            && self.updated_at == other.updated_at
            && self.decisions == other.decisions
            && self.in_progress == other.in_progress
            && self.events == other.events
    }
}

impl Eq for Session {}

impl Session {
    /// Starts an empty session with a fresh id.
    pub fn create(dataset: &Dataset, tree: Arc<CodingTree>, coder_id: &str) -> Session {
        let now = Utc::now();
        let header = SessionHeader {
            session_id: uuid::Uuid::new_v4().to_string(),
            dataset_id: dataset.dataset_id.clone(),
            tree_fingerprint: tree.fingerprint().to_string(),
            coder_id: coder_id.to_string(),
            created_at: now,
            items: dataset.item_ids(),
        };
        Session::from_header(header, tree)
    }

    fn from_header(header: SessionHeader, tree: Arc<CodingTree>) -> Session {
        Session {
            item_set: header.items.iter().cloned().collect(),
            updated_at: header.created_at,
            header,
            tree,
            decisions: BTreeMap::new(),
            in_progress: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    /// Rebuilds a session by folding `events` over an empty one.
    pub fn replay(header: SessionHeader, tree: Arc<CodingTree>, events: Vec<Event>) -> Result<Session, SessionError> {
        if header.tree_fingerprint != tree.fingerprint() {
            return Err(SessionError::FingerprintMismatch {
                expected: tree.fingerprint().to_string(),
                found: header.tree_fingerprint,
            });
        }
        let mut session = Session::from_header(header, tree);
        for (index, event) in events.into_iter().enumerate() {
            session.check(&event).map_err(|e| SessionError::Replay {
                index,
                source: Box::new(e),
            })?;
            session.apply(event);
        }
        Ok(session)
    }

    /// Builds a pathless session from final code assignments.
    pub fn import_recorded_codes(
        dataset: &Dataset,
        tree: Arc<CodingTree>,
        coder_id: &str,
        assignments: &[Assignment],
    ) -> Result<Session, SessionError> {
        let mut session = Session::create(dataset, tree, coder_id);
        let mut seen = HashSet::new();
        for a in assignments {
            let item_id = dataset
                .resolve_item_id(a.item_id.trim())
                .ok_or_else(|| SessionError::UnknownItem(a.item_id.clone()))?
                .to_string();
            let code: Code = a.code.parse().map_err(|_| SessionError::UnknownCode(a.code.clone()))?;
            if !seen.insert(item_id.clone()) {
                return Err(SessionError::DuplicateAssignment(item_id));
            }
            session.record_code(&item_id, code)?;
        }
        Ok(session)
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn session_id(&self) -> &str {
        &self.header.session_id
    }

    pub fn dataset_id(&self) -> &str {
        &self.header.dataset_id
    }

    pub fn coder_id(&self) -> &str {
        &self.header.coder_id
    }

    pub fn tree_fingerprint(&self) -> &str {
        &self.header.tree_fingerprint
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.header.created_at
    }

    pub fn updated_at(&self) -> DateTime<Utc> {
        self.updated_at
    }

    pub fn tree(&self) -> &Arc<CodingTree> {
        &self.tree
    }

    /// Item ids in dataset order.
    pub fn items(&self) -> &[String] {
        &self.header.items
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn decisions(&self) -> &BTreeMap<String, CodingDecision> {
        &self.decisions
    }

    pub fn decision(&self, item_id: &str) -> Option<&CodingDecision> {
        self.decisions.get(item_id)
    }

    pub fn in_progress(&self) -> &BTreeMap<String, Vec<AnswerStep>> {
        &self.in_progress
    }

    pub fn coded_count(&self) -> usize {
        self.decisions.len()
    }

    pub fn item_count(&self) -> usize {
        self.header.items.len()
    }

    /// Items without a decision, in dataset order.
    pub fn pending_items(&self) -> impl Iterator<Item = &str> {
        self.header
            .items
            .iter()
            .map(String::as_str)
            .filter(|id| !self.decisions.contains_key(*id))
    }

    pub fn next_pending(&self) -> Option<&str> {
        self.pending_items().next()
    }

    pub fn is_complete(&self) -> bool {
        self.decisions.len() == self.header.items.len()
    }

    pub fn has_pathless(&self) -> bool {
        self.decisions.values().any(|d| d.pathless)
    }

    pub fn item_state(&self, item_id: &str) -> Result<ItemState, SessionError> {
        self.known(item_id)?;
        if let Some(d) = self.decisions.get(item_id) {
            return Ok(ItemState {
                item_id: item_id.to_string(),
                status: ItemStatus::Finalized,
                path: d.path.clone(),
                current_question: None,
                decision: Some(d.clone()),
            });
        }
        let path = self.in_progress.get(item_id).cloned().unwrap_or_default();
        let current = match self.tree.walk(&path) {
            Ok(Position::At(q)) => Some(q),
            _ => None,
        };
        Ok(ItemState {
            item_id: item_id.to_string(),
            status: if path.is_empty() {
                ItemStatus::Pending
            } else {
                ItemStatus::InProgress
            },
            path,
            current_question: current,
            decision: None,
        })
    }

    /// Records one answer for `item_id` at its current question.
    pub fn answer(&mut self, item_id: &str, answer: Answer) -> Result<AnswerOutcome, SessionError> {
        let question = self.current_question(item_id)?;
        self.apply(Event::Answered {
            item_id: item_id.to_string(),
            question,
            answer,
            at: Utc::now(),
        });
        Ok(match self.decisions.get(item_id) {
            Some(d) => AnswerOutcome::Finalized { decision: d.clone() },
            None => {
                let path = self.in_progress.get(item_id).cloned().unwrap_or_default();
                let Ok(Position::At(question)) = self.tree.walk(&path) else {
                    unreachable!("in-progress path ends at a question");
                };
                AnswerOutcome::Next { question, path }
            }
        })
    }

    /// Removes the latest answer (or reopens a decision).
    pub fn undo(&mut self, item_id: &str) -> Result<ItemState, SessionError> {
        self.undo_with_token(item_id, None)
    }

    /// Like [`undo`](Self::undo), but a token already seen for this item
    /// makes the call a no-op that reports the current state.
    pub fn undo_with_token(&mut self, item_id: &str, token: Option<&str>) -> Result<ItemState, SessionError> {
        self.known(item_id)?;
        if let Some(token) = token {
            let replayed = self.events.iter().any(|e| {
                matches!(e, Event::Undone { item_id: i, token: Some(t), .. } if i == item_id && t == token)
            });
            if replayed {
                return self.item_state(item_id);
            }
        }
        let event = Event::Undone {
            item_id: item_id.to_string(),
            token: token.map(str::to_string),
            at: Utc::now(),
        };
        self.check(&event)?;
        self.apply(event);
        self.item_state(item_id)
    }

    pub fn set_supplementary_tags(
        &mut self,
        item_id: &str,
        tags: BTreeSet<String>,
    ) -> Result<CodingDecision, SessionError> {
        let tags: BTreeSet<String> = tags.into_iter().map(|t| t.trim().to_string()).collect();
        let event = Event::TagsSet {
            item_id: item_id.to_string(),
            tags,
            at: Utc::now(),
        };
        self.check(&event)?;
        self.apply(event);
        Ok(self.decisions[item_id].clone())
    }

    /// Finalizes a pending item with a code and no answer path.
    pub fn record_code(&mut self, item_id: &str, code: Code) -> Result<CodingDecision, SessionError> {
        let event = Event::Finalized {
            item_id: item_id.to_string(),
            code,
            at: Utc::now(),
        };
        self.check(&event)?;
        self.apply(event);
        Ok(self.decisions[item_id].clone())
    }

    /// Every path-bearing decision replays to its stored code.
    pub fn check_path_consistency(&self) -> Result<(), String> {
        for d in self.decisions.values() {
            if d.pathless {
                if !d.path.is_empty() {
                    return Err(format!("pathless decision `{}` carries a path", d.item_id));
                }
                continue;
            }
            match self.tree.walk(&d.path) {
                Ok(Position::Leaf(code)) if code == d.code => {}
                other => return Err(format!("decision `{}` replays to {other:?}, stored {}", d.item_id, d.code)),
            }
        }
        if let Some(k) = self.in_progress.keys().find(|k| self.decisions.contains_key(*k)) {
            return Err(format!("item `{k}` is both in progress and finalized"));
        }
        Ok(())
    }

    fn known(&self, item_id: &str) -> Result<(), SessionError> {
        if self.item_set.contains(item_id) {
            Ok(())
        } else {
            Err(SessionError::UnknownItem(item_id.to_string()))
        }
    }

    fn current_question(&self, item_id: &str) -> Result<QuestionId, SessionError> {
        self.known(item_id)?;
        if self.decisions.contains_key(item_id) {
            return Err(SessionError::AlreadyFinalized(item_id.to_string()));
        }
        let path = self.in_progress.get(item_id).map(Vec::as_slice).unwrap_or(&[]);
        match self.tree.walk(path) {
            Ok(Position::At(q)) => Ok(q),
            _ => unreachable!("in-progress paths never reach a leaf"),
        }
    }

    /// Validates an event against the current state without applying it.
    fn check(&self, event: &Event) -> Result<(), SessionError> {
        let item_id = event.item_id();
        self.known(item_id)?;
        match event {
            Event::Answered { question, .. } => {
                let at = self.current_question(item_id)?;
                if &at != question {
                    return Err(SessionError::WrongQuestion {
                        item_id: item_id.to_string(),
                        recorded: question.clone(),
                        expected: at,
                    });
                }
            }
            Event::Undone { .. } => {
                let has_steps = self.in_progress.get(item_id).is_some_and(|p| !p.is_empty());
                if !has_steps && !self.decisions.contains_key(item_id) {
                    return Err(SessionError::NothingToUndo(item_id.to_string()));
                }
            }
            Event::TagsSet { tags, .. } => {
                let d = self
                    .decisions
                    .get(item_id)
                    .ok_or_else(|| SessionError::NotFinalized(item_id.to_string()))?;
                if tags.iter().any(|t| t.trim().is_empty()) {
                    return Err(SessionError::EmptyTag);
                }
                if tags.contains(UNFOCUSED) && d.code != Code::M1 {
                    return Err(SessionError::TagNotAllowed {
                        tag: UNFOCUSED.to_string(),
                        code: d.code,
                    });
                }
            }
            Event::Finalized { code, .. } => {
                if self.decisions.contains_key(item_id) {
                    return Err(SessionError::AlreadyFinalized(item_id.to_string()));
                }
                if self.in_progress.contains_key(item_id) {
                    return Err(SessionError::InProgress(item_id.to_string()));
                }
                if !self.tree.has_leaf(*code) {
                    return Err(SessionError::CodeNotInTree(*code));
                }
            }
        }
        Ok(())
    }

    /// The fold step. Assumes `check` passed.
    fn apply(&mut self, event: Event) {
        self.updated_at = event.at();
        match &event {
            Event::Answered {
                item_id,
                question,
                answer,
                ..
            } => {
                let mut path = self.in_progress.remove(item_id).unwrap_or_default();
                path.push(AnswerStep {
                    question: question.clone(),
                    answer: *answer,
                });
                match self.tree.walk(&path) {
                    Ok(Position::Leaf(code)) => {
                        self.decisions.insert(
                            item_id.clone(),
                            CodingDecision {
                                item_id: item_id.clone(),
                                path,
                                code,
                                supplementary_tags: BTreeSet::new(),
                                pathless: false,
                            },
                        );
                    }
                    _ => {
                        self.in_progress.insert(item_id.clone(), path);
                    }
                }
            }
            Event::Undone { item_id, .. } => {
                if let Some(d) = self.decisions.remove(item_id) {
                    let mut path = d.path;
                    path.pop();
                    if !path.is_empty() {
                        self.in_progress.insert(item_id.clone(), path);
                    }
                } else if let Some(path) = self.in_progress.get_mut(item_id) {
                    path.pop();
                    if path.is_empty() {
                        self.in_progress.remove(item_id);
                    }
                }
            }
            Event::TagsSet { item_id, tags, .. } => {
                if let Some(d) = self.decisions.get_mut(item_id) {
                    d.supplementary_tags = tags.clone();
                }
            }
            Event::Finalized { item_id, code, .. } => {
                self.decisions.insert(
                    item_id.clone(),
                    CodingDecision {
                        item_id: item_id.clone(),
                        path: Vec::new(),
                        code: *code,
                        supplementary_tags: BTreeSet::new(),
                        pathless: true,
                    },
                );
            }
        }
        self.events.push(event);
    }

    // -----------------------------------------------------------------------
    // Checkpoints

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.to_string(),
            header: self.header.clone(),
            updated_at: self.updated_at,
            events: self.events.clone(),
            decisions: self.decisions.values().cloned().collect(),
        }
    }

    pub fn checkpoint_json(&self) -> String {
        self.checkpoint().to_json()
    }

    /// Rebuilds a session from a checkpoint, verifying it against the dataset
    /// and tree it is restored into.
    pub fn restore(checkpoint: Checkpoint, dataset: &Dataset, tree: Arc<CodingTree>) -> Result<Session, SessionError> {
        if checkpoint.schema != CHECKPOINT_SCHEMA {
            return Err(SessionError::SchemaMismatch(checkpoint.schema));
        }
        if checkpoint.header.dataset_id != dataset.dataset_id {
            return Err(SessionError::DatasetMismatch {
                expected: dataset.dataset_id.clone(),
                found: checkpoint.header.dataset_id,
            });
        }
        if checkpoint.header.items != dataset.item_ids() {
            return Err(SessionError::ItemsMismatch(dataset.dataset_id.clone()));
        }
        let mut session = Session::replay(checkpoint.header, tree, checkpoint.events)?;
        let materialized: BTreeMap<_, _> = checkpoint
            .decisions
            .into_iter()
            .map(|d| (d.item_id.clone(), d))
            .collect();
        if materialized != session.decisions {
            return Err(SessionError::Corrupt);
        }
        if session.events.is_empty() {
            session.updated_at = checkpoint.updated_at;
        } else if session.updated_at != checkpoint.updated_at {
            return Err(SessionError::Corrupt);
        }
        Ok(session)
    }

    pub fn restore_json(document: &str, dataset: &Dataset, tree: Arc<CodingTree>) -> Result<Session, SessionError> {
        Session::restore(Checkpoint::parse(document)?, dataset, tree)
    }
}

/// Self-contained session document: metadata, event log and the decisions
/// the log materializes to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    #[serde(flatten)]
    pub header: SessionHeader,
    pub updated_at: DateTime<Utc>,
    pub events: Vec<Event>,
    pub decisions: Vec<CodingDecision>,
}

impl Checkpoint {
    pub fn parse(document: &str) -> Result<Checkpoint, SessionError> {
        let value: serde_json::Value =
            serde_json::from_str(document).map_err(|e| SessionError::Parse(e.to_string()))?;
        match value.get("schema").and_then(|s| s.as_str()) {
            Some(CHECKPOINT_SCHEMA) => {}
            Some(other) => return Err(SessionError::SchemaMismatch(other.to_string())),
            None => return Err(SessionError::SchemaMismatch(String::new())),
        }
        serde_json::from_value(value).map_err(|e| SessionError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{bundled_assignments_for, bundled_dataset};

    fn tree() -> Arc<CodingTree> {
        Arc::new(CodingTree::default_tree())
    }

    fn etsi() -> Dataset {
        bundled_dataset("etsi").unwrap()
    }

    #[test]
    fn create_session_is_empty() {
        let s = Session::create(&etsi(), tree(), "coder-1");
        assert_eq!(s.coded_count(), 0);
        assert_eq!(s.pending_items().count(), 67);
        assert_eq!(s.next_pending(), Some("ETSI-1-1"));
        assert_eq!(s.item_state("ETSI-1-1").unwrap().current_question, Some("Q1".into()));
        let other = Session::create(&etsi(), tree(), "coder-1");
        assert_ne!(s.session_id(), other.session_id());
    }

    #[test]
    fn empty_dataset_is_complete() {
        let d = Dataset {
            dataset_id: "empty".into(),
            title: "Empty".into(),
            categories: vec![],
            items: vec![],
        };
        let s = Session::create(&d, tree(), "c");
        assert!(s.is_complete());
        assert_eq!(s.next_pending(), None);
    }

    #[test]
    fn answer_no_at_q1_gives_m1() {
        let mut s = Session::create(&etsi(), tree(), "c");
        match s.answer("ETSI-1-1", Answer::No).unwrap() {
            AnswerOutcome::Finalized { decision } => {
                assert_eq!(decision.code, Code::M1);
                assert_eq!(decision.path.len(), 1);
                assert!(!decision.pathless);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            s.answer("ETSI-1-1", Answer::Yes),
            Err(SessionError::AlreadyFinalized("ETSI-1-1".into()))
        );
        assert_eq!(s.events().len(), 1);
    }

    #[test]
    fn answer_sequence_to_p1() {
        let mut s = Session::create(&etsi(), tree(), "c");
        let seq = [Answer::Yes, Answer::Yes, Answer::No, Answer::Yes];
        for a in seq {
            assert!(matches!(s.answer("ETSI-1-2", a).unwrap(), AnswerOutcome::Next { .. }));
        }
        match s.answer("ETSI-1-2", Answer::No).unwrap() {
            AnswerOutcome::Finalized { decision } => assert_eq!(decision.code, Code::P1),
            other => panic!("{other:?}"),
        }
        s.check_path_consistency().unwrap();
    }

    #[test]
    fn unknown_item() {
        let mut s = Session::create(&etsi(), tree(), "c");
        assert_eq!(s.answer("nope", Answer::No), Err(SessionError::UnknownItem("nope".into())));
    }

    #[test]
    fn undo_reopens_decision() {
        let mut s = Session::create(&etsi(), tree(), "c");
        s.answer("ETSI-1-1", Answer::No).unwrap();
        let state = s.undo("ETSI-1-1").unwrap();
        assert_eq!(state.status, ItemStatus::Pending);
        assert!(state.path.is_empty());
        assert_eq!(state.current_question, Some("Q1".into()));
        assert_eq!(s.coded_count(), 0);
    }

    #[test]
    fn undo_one_of_two_answers() {
        let mut s = Session::create(&etsi(), tree(), "c");
        s.answer("ETSI-1-1", Answer::Yes).unwrap();
        s.answer("ETSI-1-1", Answer::Yes).unwrap();
        let state = s.undo("ETSI-1-1").unwrap();
        assert_eq!(state.path.len(), 1);
        assert_eq!(state.current_question, Some("Q2".into()));
        assert_eq!(s.undo("ETSI-1-2"), Err(SessionError::NothingToUndo("ETSI-1-2".into())));
    }

    #[test]
    fn undo_token_is_idempotent() {
        let mut s = Session::create(&etsi(), tree(), "c");
        s.answer("ETSI-1-1", Answer::Yes).unwrap();
        s.answer("ETSI-1-1", Answer::Yes).unwrap();
        s.undo_with_token("ETSI-1-1", Some("tok-1")).unwrap();
        let again = s.undo_with_token("ETSI-1-1", Some("tok-1")).unwrap();
        assert_eq!(again.path.len(), 1);
        assert_eq!(s.events().len(), 3);
    }

    #[test]
    fn unfocused_only_on_m1() {
        let mut s = Session::create(&etsi(), tree(), "c");
        s.answer("ETSI-1-1", Answer::No).unwrap();
        let d = s
            .set_supplementary_tags("ETSI-1-1", [UNFOCUSED.to_string()].into())
            .unwrap();
        assert!(d.supplementary_tags.contains(UNFOCUSED));
        let d = s.set_supplementary_tags("ETSI-1-1", BTreeSet::new()).unwrap();
        assert!(d.supplementary_tags.is_empty());

        s.record_code("ETSI-1-2", Code::P5).unwrap();
        assert_eq!(
            s.set_supplementary_tags("ETSI-1-2", [UNFOCUSED.to_string()].into()),
            Err(SessionError::TagNotAllowed {
                tag: UNFOCUSED.into(),
                code: Code::P5
            })
        );
        assert_eq!(
            s.set_supplementary_tags("ETSI-1-3", BTreeSet::new()),
            Err(SessionError::NotFinalized("ETSI-1-3".into()))
        );
    }

    #[test]
    fn import_appendix_codes() {
        let s = Session::import_recorded_codes(&etsi(), tree(), "appendix", &bundled_assignments_for("etsi").unwrap())
            .unwrap();
        assert_eq!(s.coded_count(), 67);
        assert_eq!(s.decision("ETSI-3-4").unwrap().code, Code::M1);
        assert!(s.decisions().values().all(|d| d.pathless && d.path.is_empty()));

        let full = bundled_dataset("dcms-full").unwrap();
        let s = Session::import_recorded_codes(&full, tree(), "a", &bundled_assignments_for("dcms-full").unwrap())
            .unwrap();
        assert_eq!(s.coded_count(), 13);
        assert_eq!(s.decision("DCMS-1").unwrap().code, Code::P5);

        let s = Session::import_recorded_codes(&full, tree(), "a", &[]).unwrap();
        assert_eq!(s.coded_count(), 0);
    }

    #[test]
    fn import_errors() {
        let a = |i: &str, c: &str| Assignment {
            item_id: i.into(),
            code: c.into(),
        };
        assert_eq!(
            Session::import_recorded_codes(&etsi(), tree(), "c", &[a("99-1", "P1")]).unwrap_err(),
            SessionError::UnknownItem("99-1".into())
        );
        assert_eq!(
            Session::import_recorded_codes(&etsi(), tree(), "c", &[a("1-1", "Q7")]).unwrap_err(),
            SessionError::UnknownCode("Q7".into())
        );
        assert_eq!(
            Session::import_recorded_codes(&etsi(), tree(), "c", &[a("1-1", "P1"), a("ETSI-1-1", "P2")]).unwrap_err(),
            SessionError::DuplicateAssignment("ETSI-1-1".into())
        );
    }

    #[test]
    fn undo_pathless_returns_to_pending() {
        let mut s = Session::create(&etsi(), tree(), "c");
        s.record_code("ETSI-1-1", Code::T).unwrap();
        let st = s.undo("ETSI-1-1").unwrap();
        assert_eq!(st.status, ItemStatus::Pending);
        assert!(s.decision("ETSI-1-1").is_none());
    }

    #[test]
    fn replay_reproduces_state() {
        let mut s = Session::create(&etsi(), tree(), "c");
        s.answer("ETSI-1-1", Answer::No).unwrap();
        s.set_supplementary_tags("ETSI-1-1", [UNFOCUSED.to_string()].into()).unwrap();
        s.answer("ETSI-1-2", Answer::Yes).unwrap();
        s.record_code("ETSI-2-1", Code::P2).unwrap();
        s.undo("ETSI-1-2").unwrap();
        let replayed = Session::replay(s.header().clone(), tree(), s.events().to_vec()).unwrap();
        assert_eq!(replayed, s);
    }

    #[test]
    fn replay_rejects_bad_log() {
        let s = Session::create(&etsi(), tree(), "c");
        let bad = vec![Event::Undone {
            item_id: "ETSI-1-1".into(),
            token: None,
            at: Utc::now(),
        }];
        assert!(matches!(
            Session::replay(s.header().clone(), tree(), bad),
            Err(SessionError::Replay { index: 0, .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip_and_mismatch() {
        let mut s = Session::create(&etsi(), tree(), "c");
        s.answer("ETSI-1-1", Answer::No).unwrap();
        let doc = s.checkpoint_json();
        let back = Session::restore_json(&doc, &etsi(), tree()).unwrap();
        assert_eq!(back, s);

        let mut def = CodingTree::default_tree().definition().clone();
        def.name = Some("other".into());
        let other = Arc::new(CodingTree::from_definition(def).unwrap());
        assert!(matches!(
            Session::restore_json(&doc, &etsi(), other),
            Err(SessionError::FingerprintMismatch { .. })
        ));

        let full = bundled_dataset("dcms-full").unwrap();
        assert!(matches!(
            Session::restore_json(&doc, &full, tree()),
            Err(SessionError::DatasetMismatch { .. })
        ));

        let bumped = doc.replace(CHECKPOINT_SCHEMA, "sacode.session/999");
        assert_eq!(
            Session::restore_json(&bumped, &etsi(), tree()).unwrap_err(),
            SessionError::SchemaMismatch("sacode.session/999".into())
        );
    }

    #[test]
    fn empty_session_checkpoint() {
        let s = Session::create(&etsi(), tree(), "c");
        let back = Session::restore_json(&s.checkpoint_json(), &etsi(), tree()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.coded_count(), 0);
    }

    #[test]
    fn tampered_decisions_detected() {
        let mut s = Session::create(&etsi(), tree(), "c");
        s.answer("ETSI-1-1", Answer::No).unwrap();
        let mut cp = s.checkpoint();
        cp.decisions[0].code = Code::P5;
        assert_eq!(Session::restore(cp, &etsi(), tree()).unwrap_err(), SessionError::Corrupt);
    }
}
