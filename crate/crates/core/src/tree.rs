//! The coding tree: a binary decision structure whose leaves are [`Code`]s.
//!
//! Topology is data. A tree is loaded from a JSON definition document, checked
//! against the structural invariants (single root, acyclic, every reference
//! resolves, every question and declared leaf reachable, each question has
//! one parent), and is immutable afterwards.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::code::{Code, UnknownCode};

pub const TREE_SCHEMA: u32 = 1;

const DEFAULT_TREE: &str = include_str!("../data/default-tree.json");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(String);

impl QuestionId {
    pub fn new(id: impl Into<String>) -> Self {
        QuestionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QuestionId {
    fn from(s: &str) -> Self {
        QuestionId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
        }
    }

    /// Accepts `yes`/`no` and the single-letter forms, case-insensitively.
    pub fn parse(s: &str) -> Option<Answer> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Some(Answer::Yes),
            "no" | "n" => Some(Answer::No),
            _ => None,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnswerStep {
    pub question: QuestionId,
    pub answer: Answer,
}

impl AnswerStep {
    pub fn new(question: impl Into<QuestionId>, answer: Answer) -> Self {
        AnswerStep {
            question: question.into(),
            answer,
        }
    }
}

impl fmt::Display for AnswerStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = match self.answer {
            Answer::Yes => 'y',
            Answer::No => 'n',
        };
        write!(f, "{}:{}", self.question, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum NodeRef {
    Question(QuestionId),
    Leaf(Code),
}

// ---------------------------------------------------------------------------
// Definition document

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDefinition {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub root: String,
    pub questions: Vec<QuestionDef>,
    pub leaves: Vec<LeafDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionDef {
    pub id: String,
    pub text: String,
    pub yes: String,
    pub no: String,
    /// Edges whose wiring is a reconstruction rather than documented.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reconstructed: Vec<Answer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafDef {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
    pub actionable: bool,
}

impl TreeDefinition {
    pub fn parse(document: &str) -> Result<Self, TreeError> {
        serde_json::from_str(document).map_err(|e| TreeError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("tree definition serializes");
        out.push('\n');
        out
    }

    /// `sha256:` digest of the compact serialization.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("tree definition serializes");
        format!("sha256:{}", hex::encode(Sha256::digest(&bytes)))
    }
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("tree definition parse error: {0}")]
    Parse(String),
    #[error("unsupported tree schema {0} (expected {TREE_SCHEMA})")]
    UnsupportedSchema(u32),
    #[error("tree defines no questions")]
    Empty,
    #[error("question `{0}` has empty text")]
    EmptyText(String),
    #[error("leaf `{0}` has empty label")]
    EmptyLabel(String),
    #[error("duplicate question id `{0}`")]
    DuplicateQuestion(String),
    #[error("duplicate leaf id `{0}`")]
    DuplicateLeaf(String),
    #[error(transparent)]
    UnknownCode(#[from] UnknownCode),
    #[error("id `{0}` names both a question and a leaf")]
    AmbiguousNode(String),
    #[error("root `{0}` is not a defined question")]
    UnknownRoot(String),
    #[error("dangling reference: {question}.{answer} points to undefined node `{target}`")]
    DanglingReference {
        question: String,
        answer: Answer,
        target: String,
    },
    #[error("cycle detected through question `{0}`")]
    Cycle(String),
    #[error("root question `{0}` is the target of an edge")]
    RootHasParent(String),
    #[error("question `{0}` has more than one parent")]
    SharedQuestion(String),
    #[error("question `{0}` is unreachable from the root")]
    UnreachableQuestion(String),
    #[error("leaf code `{0}` is declared but unreachable")]
    UnreachableLeaf(Code),
    #[error("leaf `{code}` declares actionable={declared}, taxonomy says {expected}")]
    ActionableMismatch {
        code: Code,
        declared: bool,
        expected: bool,
    },
    #[error("unknown question `{0}`")]
    UnknownQuestion(String),
}

// ---------------------------------------------------------------------------
// Validated tree

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Question {
    pub id: QuestionId,
    pub text: String,
    pub yes: NodeRef,
    pub no: NodeRef,
    pub reconstructed: BTreeSet<Answer>,
}

impl Question {
    pub fn edge(&self, answer: Answer) -> &NodeRef {
        match answer {
            Answer::Yes => &self.yes,
            Answer::No => &self.no,
        }
    }

    pub fn is_pinned(&self, answer: Answer) -> bool {
        !self.reconstructed.contains(&answer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeafCode {
    pub code: Code,
    pub label: String,
    pub definition: Option<String>,
    pub actionable: bool,
}

/// One root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreePath {
    pub steps: Vec<AnswerStep>,
    pub leaf: Code,
}

/// Where a sequence of answers lands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Position {
    /// The next question to answer.
    At(QuestionId),
    /// A leaf was reached after consuming every answer.
    Leaf(Code),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WalkError {
    #[error("step {index} answers `{given}` but the tree is at `{expected}`")]
    WrongQuestion {
        index: usize,
        given: QuestionId,
        expected: QuestionId,
    },
    #[error("path continues past leaf `{leaf}` at step {index}")]
    PastLeaf { index: usize, leaf: Code },
}

#[derive(Debug, Clone)]
pub struct CodingTree {
    name: Option<String>,
    root: QuestionId,
    questions: Vec<Question>,
    index: HashMap<QuestionId, usize>,
    leaves: Vec<LeafCode>,
    definition: TreeDefinition,
    fingerprint: String,
}

impl PartialEq for CodingTree {
    fn eq(&self, other: &Self) -> bool {
        self.definition == other.definition
    }
}

impl Eq for CodingTree {}

/// Parses and validates a tree definition document.
pub fn load_tree(document: &str) -> Result<CodingTree, TreeError> {
    CodingTree::from_definition(TreeDefinition::parse(document)?)
}

impl CodingTree {
    /// The bundled default topology.
    pub fn default_tree() -> CodingTree {
        load_tree(DEFAULT_TREE).expect("bundled tree definition is valid")
    }

    pub fn default_definition_json() -> &'static str {
        DEFAULT_TREE
    }

    pub fn from_definition(def: TreeDefinition) -> Result<CodingTree, TreeError> {
        if def.schema != TREE_SCHEMA {
            return Err(TreeError::UnsupportedSchema(def.schema));
        }
        if def.questions.is_empty() {
            return Err(TreeError::Empty);
        }

        let mut index = HashMap::new();
        for (i, q) in def.questions.iter().enumerate() {
            if q.text.trim().is_empty() {
                return Err(TreeError::EmptyText(q.id.clone()));
            }
            if index.insert(QuestionId::new(q.id.clone()), i).is_some() {
                return Err(TreeError::DuplicateQuestion(q.id.clone()));
            }
        }

        let mut leaves: Vec<LeafCode> = Vec::with_capacity(def.leaves.len());
        for l in &def.leaves {
            let code: Code = l.id.parse()?;
            if index.contains_key(&QuestionId::new(l.id.clone())) {
                return Err(TreeError::AmbiguousNode(l.id.clone()));
            }
            if leaves.iter().any(|x| x.code == code) {
                return Err(TreeError::DuplicateLeaf(l.id.clone()));
            }
            if l.label.trim().is_empty() {
                return Err(TreeError::EmptyLabel(l.id.clone()));
            }
            if l.actionable != code.is_actionable() {
                return Err(TreeError::ActionableMismatch {
                    code,
                    declared: l.actionable,
                    expected: code.is_actionable(),
                });
            }
            leaves.push(LeafCode {
                code,
                label: l.label.clone(),
                definition: l.definition.clone(),
                actionable: l.actionable,
            });
        }

        let resolve = |q: &QuestionDef, answer: Answer, target: &str| -> Result<NodeRef, TreeError> {
            let qid = QuestionId::new(target);
            if index.contains_key(&qid) {
                return Ok(NodeRef::Question(qid));
            }
            match target.parse::<Code>() {
                Ok(code) if leaves.iter().any(|l| l.code == code) => Ok(NodeRef::Leaf(code)),
                _ => Err(TreeError::DanglingReference {
                    question: q.id.clone(),
                    answer,
                    target: target.to_string(),
                }),
            }
        };

        let mut questions = Vec::with_capacity(def.questions.len());
        for q in &def.questions {
            questions.push(Question {
                id: QuestionId::new(q.id.clone()),
                text: q.text.clone(),
                yes: resolve(q, Answer::Yes, &q.yes)?,
                no: resolve(q, Answer::No, &q.no)?,
                reconstructed: q.reconstructed.iter().copied().collect(),
            });
        }

        let root = QuestionId::new(def.root.clone());
        let Some(&root_idx) = index.get(&root) else {
            return Err(TreeError::UnknownRoot(def.root.clone()));
        };

        let children = |i: usize| {
            let q = &questions[i];
            [&q.yes, &q.no].into_iter().filter_map(|n| match n {
                NodeRef::Question(id) => Some(index[id]),
                NodeRef::Leaf(_) => None,
            })
        };

        // Cycles first, over every question, so a cycle detached from the
        // root is reported as a cycle rather than as unreachable.
        let n = questions.len();
        let mut color = vec![0u8; n];
        for start in 0..n {
            if color[start] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, Vec<usize>)> = vec![(start, children(start).collect())];
            color[start] = 1;
            while let Some((node, pending)) = stack.last_mut() {
                if let Some(next) = pending.pop() {
                    match color[next] {
                        0 => {
                            color[next] = 1;
                            let kids = children(next).collect();
                            stack.push((next, kids));
                        }
                        1 => return Err(TreeError::Cycle(questions[next].id.to_string())),
                        _ => {}
                    }
                } else {
                    color[*node] = 2;
                    stack.pop();
                }
            }
        }

        let mut parents = vec![0usize; n];
        for i in 0..n {
            for c in children(i) {
                parents[c] += 1;
            }
        }
        if parents[root_idx] > 0 {
            return Err(TreeError::RootHasParent(root.to_string()));
        }
        if let Some(i) = parents.iter().position(|&p| p > 1) {
            return Err(TreeError::SharedQuestion(questions[i].id.to_string()));
        }

        let mut seen = vec![false; n];
        let mut reached_leaves = BTreeSet::new();
        let mut stack = vec![root_idx];
        while let Some(i) = stack.pop() {
            seen[i] = true;
            for edge in [&questions[i].yes, &questions[i].no] {
                match edge {
                    NodeRef::Question(id) => stack.push(index[id]),
                    NodeRef::Leaf(code) => {
                        reached_leaves.insert(*code);
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(TreeError::UnreachableQuestion(questions[i].id.to_string()));
        }
        if let Some(l) = leaves.iter().find(|l| !reached_leaves.contains(&l.code)) {
            return Err(TreeError::UnreachableLeaf(l.code));
        }

        let fingerprint = def.fingerprint();
        Ok(CodingTree {
            name: def.name.clone(),
            root,
            questions,
            index,
            leaves,
            definition: def,
            fingerprint,
        })
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn root(&self) -> &QuestionId {
        &self.root
    }

    /// Questions in definition order.
    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn question(&self, id: &QuestionId) -> Option<&Question> {
        self.index.get(id).map(|&i| &self.questions[i])
    }

    pub fn leaves(&self) -> &[LeafCode] {
        &self.leaves
    }

    pub fn leaf(&self, code: Code) -> Option<&LeafCode> {
        self.leaves.iter().find(|l| l.code == code)
    }

    pub fn has_leaf(&self, code: Code) -> bool {
        self.leaf(code).is_some()
    }

    pub fn leaf_set(&self) -> BTreeSet<Code> {
        self.leaves.iter().map(|l| l.code).collect()
    }

    pub fn definition(&self) -> &TreeDefinition {
        &self.definition
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Number of edges that end in a leaf.
    pub fn leaf_positions(&self) -> usize {
        self.questions
            .iter()
            .flat_map(|q| [&q.yes, &q.no])
            .filter(|n| matches!(n, NodeRef::Leaf(_)))
            .count()
    }

    /// Follows one edge.
    pub fn step(&self, at: &QuestionId, answer: Answer) -> Result<&NodeRef, TreeError> {
        self.question(at)
            .map(|q| q.edge(answer))
            .ok_or_else(|| TreeError::UnknownQuestion(at.to_string()))
    }

    /// Replays recorded steps from the root, checking each names the
    /// question the tree is actually at.
    pub fn walk(&self, steps: &[AnswerStep]) -> Result<Position, WalkError> {
        let mut at = self.root.clone();
        for (index, step) in steps.iter().enumerate() {
            if step.question != at {
                return Err(WalkError::WrongQuestion {
                    index,
                    given: step.question.clone(),
                    expected: at,
                });
            }
            match self.question(&at).expect("validated").edge(step.answer) {
                NodeRef::Question(next) => at = next.clone(),
                NodeRef::Leaf(code) => {
                    if index + 1 != steps.len() {
                        return Err(WalkError::PastLeaf {
                            index: index + 1,
                            leaf: *code,
                        });
                    }
                    return Ok(Position::Leaf(*code));
                }
            }
        }
        Ok(Position::At(at))
    }

    /// Replays bare answers from the root. Stops at the first leaf and
    /// reports how many answers were consumed.
    pub fn walk_answers(&self, answers: &[Answer]) -> (Position, usize) {
        let mut at = self.root.clone();
        for (i, &a) in answers.iter().enumerate() {
            match self.question(&at).expect("validated").edge(a) {
                NodeRef::Question(next) => at = next.clone(),
                NodeRef::Leaf(code) => return (Position::Leaf(*code), i + 1),
            }
        }
        (Position::At(at), answers.len())
    }

    /// Every root-to-leaf path, depth first, yes before no.
    pub fn enumerate_paths(&self) -> Vec<TreePath> {
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        self.collect_paths(&self.root, &mut prefix, &mut out);
        out
    }

    fn collect_paths(&self, at: &QuestionId, prefix: &mut Vec<AnswerStep>, out: &mut Vec<TreePath>) {
        let q = self.question(at).expect("validated");
        for answer in [Answer::Yes, Answer::No] {
            prefix.push(AnswerStep::new(at.clone(), answer));
            match q.edge(answer) {
                NodeRef::Question(next) => self.collect_paths(next, prefix, out),
                NodeRef::Leaf(code) => out.push(TreePath {
                    steps: prefix.clone(),
                    leaf: *code,
                }),
            }
            prefix.pop();
        }
    }

    /// The first (yes-first depth-first) path that ends at `code`.
    pub fn path_to(&self, code: Code) -> Option<Vec<AnswerStep>> {
        self.enumerate_paths()
            .into_iter()
            .find(|p| p.leaf == code)
            .map(|p| p.steps)
    }
}

impl Default for CodingTree {
    fn default() -> Self {
        CodingTree::default_tree()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(id: &str, yes: &str, no: &str) -> QuestionDef {
        QuestionDef {
            id: id.into(),
            text: format!("question {id}?"),
            yes: yes.into(),
            no: no.into(),
            reconstructed: vec![],
        }
    }

    fn leaf(code: &str) -> LeafDef {
        let c: Code = code.parse().unwrap();
        LeafDef {
            id: code.into(),
            label: format!("label {code}"),
            definition: None,
            actionable: c.is_actionable(),
        }
    }

    fn def(questions: Vec<QuestionDef>, leaves: &[&str]) -> TreeDefinition {
        TreeDefinition {
            schema: TREE_SCHEMA,
            name: None,
            root: questions[0].id.clone(),
            questions,
            leaves: leaves.iter().map(|l| leaf(l)).collect(),
        }
    }

    #[test]
    fn default_tree_shape() {
        let tree = CodingTree::default_tree();
        assert_eq!(tree.questions().len(), 11);
        assert_eq!(tree.leaf_positions(), 12);
        assert_eq!(tree.leaves().len(), 12);
        assert_eq!(tree.leaf_positions(), tree.questions().len() + 1);
        let ids: Vec<_> = tree.questions().iter().map(|q| q.id.to_string()).collect();
        let expected: Vec<_> = (1..=11).map(|i| format!("Q{i}")).collect();
        assert_eq!(ids, expected);
        assert_eq!(tree.leaf_set(), Code::ALL.into_iter().collect());
        assert_eq!(tree.leaf(Code::T).unwrap().label, tree.leaf(Code::Tprime).unwrap().label);
    }

    #[test]
    fn default_question_text_is_verbatim() {
        let tree = CodingTree::default_tree();
        let q2 = tree.question(&"Q2".into()).unwrap();
        assert_eq!(q2.text, "Is it arguably helpful for security?");
        for q in tree.questions() {
            assert_ne!(q.yes, q.no);
        }
    }

    #[test]
    fn step_pinned_edges() {
        let tree = CodingTree::default_tree();
        assert_eq!(tree.step(&"Q1".into(), Answer::No).unwrap(), &NodeRef::Leaf(Code::M1));
        assert_eq!(tree.step(&"Q5".into(), Answer::No).unwrap(), &NodeRef::Leaf(Code::P1));
        assert_eq!(tree.step(&"Q2".into(), Answer::No).unwrap(), &NodeRef::Leaf(Code::M2));
        assert_eq!(tree.step(&"Q7".into(), Answer::Yes).unwrap(), &NodeRef::Leaf(Code::P6));
        assert_eq!(
            tree.step(&"Q12".into(), Answer::No),
            Err(TreeError::UnknownQuestion("Q12".into()))
        );
    }

    #[test]
    fn dangling_reference() {
        let mut d = CodingTree::default_tree().definition().clone();
        d.questions[4].no = "Q42".into();
        assert_eq!(
            CodingTree::from_definition(d).unwrap_err(),
            TreeError::DanglingReference {
                question: "Q5".into(),
                answer: Answer::No,
                target: "Q42".into()
            }
        );
    }

    #[test]
    fn leaf_target_must_be_declared() {
        let d = def(vec![q("Q1", "P5", "M1")], &["P5"]);
        assert!(matches!(
            CodingTree::from_definition(d),
            Err(TreeError::DanglingReference { target, .. }) if target == "M1"
        ));
    }

    #[test]
    fn declared_but_unused_leaf_is_unreachable() {
        // Q6.no would normally end at P3; route it to P5 instead.
        let mut d = CodingTree::default_tree().definition().clone();
        d.questions[5].no = "P5".into();
        assert_eq!(
            CodingTree::from_definition(d).unwrap_err(),
            TreeError::UnreachableLeaf(Code::P3)
        );
    }

    #[test]
    fn cycle_detected() {
        let d = def(vec![q("Q1", "Q2", "M1"), q("Q2", "Q1", "P5")], &["M1", "P5"]);
        let err = CodingTree::from_definition(d).unwrap_err();
        assert!(matches!(err, TreeError::Cycle(_) | TreeError::RootHasParent(_)), "{err}");
    }

    #[test]
    fn detached_cycle_reported_as_cycle() {
        let d = def(
            vec![q("Q1", "P5", "M1"), q("Q2", "Q3", "P1"), q("Q3", "Q2", "P2")],
            &["M1", "P5", "P1", "P2"],
        );
        assert!(matches!(CodingTree::from_definition(d), Err(TreeError::Cycle(_))));
    }

    #[test]
    fn unreachable_question() {
        let d = def(vec![q("Q1", "P5", "M1"), q("Q2", "P1", "P2")], &["M1", "P5", "P1", "P2"]);
        assert_eq!(
            CodingTree::from_definition(d).unwrap_err(),
            TreeError::UnreachableQuestion("Q2".into())
        );
    }

    #[test]
    fn shared_question_rejected() {
        let d = def(
            vec![q("Q1", "Q2", "Q3"), q("Q2", "Q3", "M1"), q("Q3", "P5", "P1")],
            &["M1", "P5", "P1"],
        );
        assert_eq!(
            CodingTree::from_definition(d).unwrap_err(),
            TreeError::SharedQuestion("Q3".into())
        );
    }

    #[test]
    fn actionable_flag_checked() {
        let mut d = def(vec![q("Q1", "P5", "M1")], &["P5", "M1"]);
        d.leaves[0].actionable = false;
        assert!(matches!(
            CodingTree::from_definition(d),
            Err(TreeError::ActionableMismatch { code: Code::P5, .. })
        ));
    }

    #[test]
    fn misc_validation_errors() {
        assert!(matches!(load_tree("{ not json"), Err(TreeError::Parse(_))));
        let mut d = def(vec![q("Q1", "P5", "M1")], &["P5", "M1"]);
        d.schema = 9;
        assert_eq!(CodingTree::from_definition(d).unwrap_err(), TreeError::UnsupportedSchema(9));
        let mut d = def(vec![q("Q1", "P5", "M1")], &["P5", "M1"]);
        d.root = "Q0".into();
        assert_eq!(CodingTree::from_definition(d).unwrap_err(), TreeError::UnknownRoot("Q0".into()));
        let mut d = def(vec![q("Q1", "P5", "M1")], &["P5", "M1"]);
        d.questions[0].text = "  ".into();
        assert_eq!(CodingTree::from_definition(d).unwrap_err(), TreeError::EmptyText("Q1".into()));
        let d = def(vec![q("Q1", "P5", "M1"), q("Q1", "P5", "M1")], &["P5", "M1"]);
        assert_eq!(
            CodingTree::from_definition(d).unwrap_err(),
            TreeError::DuplicateQuestion("Q1".into())
        );
        let d = def(vec![q("Q1", "P5", "M1")], &["P5", "M1", "P5"]);
        assert_eq!(CodingTree::from_definition(d).unwrap_err(), TreeError::DuplicateLeaf("P5".into()));
        let mut d = def(vec![q("Q1", "P5", "M1")], &["P5", "M1"]);
        d.leaves[0].id = "X9".into();
        assert!(matches!(CodingTree::from_definition(d), Err(TreeError::UnknownCode(_))));
    }

    #[test]
    fn minimal_tree_paths() {
        let tree = CodingTree::from_definition(def(vec![q("Q1", "P5", "M1")], &["P5", "M1"])).unwrap();
        let paths = tree.enumerate_paths();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].leaf, Code::P5);
        assert_eq!(paths[1].leaf, Code::M1);
    }

    #[test]
    fn walk_rejects_bad_paths() {
        let tree = CodingTree::default_tree();
        let bad = [AnswerStep::new("Q2", Answer::Yes)];
        assert!(matches!(tree.walk(&bad), Err(WalkError::WrongQuestion { index: 0, .. })));
        let past = [AnswerStep::new("Q1", Answer::No), AnswerStep::new("Q2", Answer::No)];
        assert!(matches!(tree.walk(&past), Err(WalkError::PastLeaf { leaf: Code::M1, .. })));
        assert_eq!(tree.walk(&[]).unwrap(), Position::At("Q1".into()));
    }

    #[test]
    fn definition_round_trips() {
        let tree = CodingTree::default_tree();
        let json = tree.definition().to_json();
        let again = load_tree(&json).unwrap();
        assert_eq!(again, tree);
        assert_eq!(again.fingerprint(), tree.fingerprint());
        assert!(tree.fingerprint().starts_with("sha256:"));
    }
}
