//! Tallies over coding sessions.
//!
//! Counts are exact integers; proportions keep numerator and denominator and
//! are only rounded for display (one decimal, half up).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::code::{Code, REPORT_CODES};
use crate::corpus::Dataset;
use crate::published::published_flow;
use crate::session::Session;
use crate::tree::{Answer, QuestionId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("session is for dataset `{session}`, not `{dataset}`")]
    DatasetMismatch { session: String, dataset: String },
    #[error("at least one session is required")]
    NoSessions,
    #[error("session `{0}` uses a different code taxonomy")]
    TaxonomyMismatch(String),
    #[error("flow mode {mode} is unavailable: {reason}")]
    ModeUnavailable { mode: FlowMode, reason: String },
    #[error("the sessions have no coded item in common")]
    NoOverlap,
}

// ---------------------------------------------------------------------------
// Proportion

/// `count / total`, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Proportion {
    pub count: u64,
    pub total: u64,
}

impl Proportion {
    pub fn new(count: u64, total: u64) -> Self {
        Proportion { count, total }
    }

    pub fn is_defined(&self) -> bool {
        self.total > 0
    }

    pub fn fraction(&self) -> Option<f64> {
        self.is_defined().then(|| self.count as f64 / self.total as f64)
    }

    /// Percentage in tenths, rounded half up: 11/28 -> 393.
    pub fn percent_tenths(&self) -> Option<u64> {
        self.is_defined()
            .then(|| (2 * 1000 * self.count + self.total) / (2 * self.total))
    }

    /// `39.3%`, or `n/a` when the denominator is zero.
    pub fn display(&self) -> String {
        match self.percent_tenths() {
            Some(t) => format!("{}.{}%", t / 10, t % 10),
            None => "n/a".to_string(),
        }
    }
}

impl fmt::Display for Proportion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({})", self.count, self.total, self.display())
    }
}

impl Serialize for Proportion {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            count: u64,
            total: u64,
            fraction: Option<f64>,
            percent: Option<String>,
        }
        Repr {
            count: self.count,
            total: self.total,
            fraction: self.fraction(),
            percent: self.is_defined().then(|| self.display()),
        }
        .serialize(serializer)
    }
}

/// Decisions tallied by report column.
fn tally(session: &Session) -> BTreeMap<Code, u64> {
    let mut counts: BTreeMap<Code, u64> = REPORT_CODES.iter().map(|&c| (c, 0)).collect();
    for d in session.decisions().values() {
        *counts.entry(d.code.report_column()).or_default() += 1;
    }
    counts
}

fn actionable_count(counts: &BTreeMap<Code, u64>) -> u64 {
    counts.iter().filter(|(c, _)| c.is_actionable()).map(|(_, n)| n).sum()
}

// ---------------------------------------------------------------------------
// Frequency table

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCounts {
    pub category_id: String,
    pub title: String,
    /// Items in the category.
    pub n: u64,
    pub coded: u64,
    /// Non-zero counts only.
    pub counts: BTreeMap<Code, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub dataset_id: String,
    pub title: String,
    pub item_count: u64,
    pub coded_count: u64,
    pub categories: Vec<CategoryCounts>,
    /// Every report column, zeros included.
    pub totals: BTreeMap<Code, u64>,
    pub proportions: BTreeMap<Code, Proportion>,
    pub actionable: Proportion,
}

impl FrequencyReport {
    /// Columns with a non-zero total, in report order.
    pub fn used_codes(&self) -> Vec<Code> {
        REPORT_CODES
            .iter()
            .copied()
            .filter(|c| self.totals.get(c).copied().unwrap_or(0) > 0)
            .collect()
    }

    pub fn total(&self, code: Code) -> u64 {
        self.totals.get(&code.report_column()).copied().unwrap_or(0)
    }

    pub fn proportion(&self, code: Code) -> Proportion {
        Proportion::new(self.total(code), self.coded_count)
    }

    pub fn actionable_fraction(&self) -> Option<f64> {
        self.actionable.fraction()
    }
}

fn check_dataset(session: &Session, dataset: &Dataset) -> Result<(), AnalyticsError> {
    if session.dataset_id() != dataset.dataset_id || session.items() != dataset.item_ids().as_slice() {
        return Err(AnalyticsError::DatasetMismatch {
            session: session.dataset_id().to_string(),
            dataset: dataset.dataset_id.clone(),
        });
    }
    Ok(())
}

pub fn frequency_table(session: &Session, dataset: &Dataset) -> Result<FrequencyReport, AnalyticsError> {
    check_dataset(session, dataset)?;
    let category_of: HashMap<&str, &str> = dataset
        .items
        .iter()
        .map(|i| (i.item_id.as_str(), i.category_id.as_str()))
        .collect();
    let mut per_category: HashMap<&str, BTreeMap<Code, u64>> = HashMap::new();
    for d in session.decisions().values() {
        let cat = category_of[d.item_id.as_str()];
        *per_category
            .entry(cat)
            .or_default()
            .entry(d.code.report_column())
            .or_default() += 1;
    }
    let sizes = dataset.category_sizes();
    let categories = dataset
        .categories
        .iter()
        .map(|c| {
            let counts = per_category.remove(c.category_id.as_str()).unwrap_or_default();
            CategoryCounts {
                category_id: c.category_id.clone(),
                title: c.title.clone(),
                n: sizes[c.category_id.as_str()] as u64,
                coded: counts.values().sum(),
                counts,
            }
        })
        .collect();

    let totals = tally(session);
    let coded = session.coded_count() as u64;
    let proportions = totals.iter().map(|(&c, &n)| (c, Proportion::new(n, coded))).collect();
    Ok(FrequencyReport {
        dataset_id: dataset.dataset_id.clone(),
        title: dataset.title.clone(),
        item_count: dataset.items.len() as u64,
        coded_count: coded,
        categories,
        actionable: Proportion::new(actionable_count(&totals), coded),
        totals,
        proportions,
    })
}

// ---------------------------------------------------------------------------
// Actionability

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Actionability {
    pub dataset_id: String,
    /// Counts of each actionable code, zeros included.
    pub by_code: BTreeMap<Code, u64>,
    /// Undefined (`total == 0`) for a session with no coded items.
    pub proportion: Proportion,
}

impl Actionability {
    pub fn fraction(&self) -> Option<f64> {
        self.proportion.fraction()
    }
}

pub fn actionability(session: &Session) -> Actionability {
    let counts = tally(session);
    Actionability {
        dataset_id: session.dataset_id().to_string(),
        by_code: counts.iter().filter(|(c, _)| c.is_actionable()).map(|(&c, &n)| (c, n)).collect(),
        proportion: Proportion::new(actionable_count(&counts), session.coded_count() as u64),
    }
}

// ---------------------------------------------------------------------------
// Comparison across sessions

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKey {
    Code(Code),
    Actionable,
}

impl RowKey {
    pub fn label(&self) -> String {
        match self {
            RowKey::Code(c) => c.heading(),
            RowKey::Actionable => "Actionable".to_string(),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            RowKey::Code(c) => c.as_str(),
            RowKey::Actionable => "Actionable",
        }
    }
}

impl Serialize for RowKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonColumn {
    pub label: String,
    pub dataset_id: String,
    pub coder_id: String,
    pub coded_count: u64,
    pub item_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub key: RowKey,
    pub actionable: bool,
    pub cells: Vec<Proportion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonMatrix {
    pub columns: Vec<ComparisonColumn>,
    /// The eleven report codes, then `Actionable`.
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonMatrix {
    pub fn row(&self, key: RowKey) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.key == key)
    }

    pub fn cell(&self, key: RowKey, column: usize) -> Option<Proportion> {
        self.row(key).and_then(|r| r.cells.get(column).copied())
    }
}

fn column_labels(sessions: &[&Session]) -> Vec<String> {
    let mut by_dataset: HashMap<&str, usize> = HashMap::new();
    for s in sessions {
        *by_dataset.entry(s.dataset_id()).or_default() += 1;
    }
    let mut labels: Vec<String> = sessions
        .iter()
        .map(|s| {
            if by_dataset[s.dataset_id()] == 1 {
                s.dataset_id().to_string()
            } else {
                format!("{}:{}", s.dataset_id(), s.coder_id())
            }
        })
        .collect();
    // Same dataset and coder twice: number them.
    let mut seen: HashMap<String, usize> = HashMap::new();
    for l in labels.iter_mut() {
        let n = seen.entry(l.clone()).or_default();
        *n += 1;
        if *n > 1 {
            *l = format!("{l}#{n}");
        }
    }
    labels
}

pub fn compare(sessions: &[&Session]) -> Result<ComparisonMatrix, AnalyticsError> {
    let first = sessions.first().ok_or(AnalyticsError::NoSessions)?;
    let taxonomy = first.tree().leaf_set();
    for s in sessions {
        if s.tree().leaf_set() != taxonomy {
            return Err(AnalyticsError::TaxonomyMismatch(s.session_id().to_string()));
        }
    }
    let tallies: Vec<_> = sessions.iter().map(|s| tally(s)).collect();
    let columns = sessions
        .iter()
        .zip(column_labels(sessions))
        .map(|(s, label)| ComparisonColumn {
            label,
            dataset_id: s.dataset_id().to_string(),
            coder_id: s.coder_id().to_string(),
            coded_count: s.coded_count() as u64,
            item_count: s.item_count() as u64,
        })
        .collect();
    let mut rows: Vec<ComparisonRow> = REPORT_CODES
        .iter()
        .map(|&code| ComparisonRow {
            key: RowKey::Code(code),
            actionable: code.is_actionable(),
            cells: sessions
                .iter()
                .zip(&tallies)
                .map(|(s, t)| Proportion::new(t[&code], s.coded_count() as u64))
                .collect(),
        })
        .collect();
    rows.push(ComparisonRow {
        key: RowKey::Actionable,
        actionable: true,
        cells: sessions
            .iter()
            .zip(&tallies)
            .map(|(s, t)| Proportion::new(actionable_count(t), s.coded_count() as u64))
            .collect(),
    });
    Ok(ComparisonMatrix { columns, rows })
}

// ---------------------------------------------------------------------------
// Question flow

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMode {
    RecordedPaths,
    InferredFromCodes,
}

impl fmt::Display for FlowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowMode::RecordedPaths => "recorded-paths",
            FlowMode::InferredFromCodes => "inferred-from-codes",
        })
    }
}

impl FromStr for FlowMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recorded-paths" | "recorded" => Ok(FlowMode::RecordedPaths),
            "inferred-from-codes" | "inferred" => Ok(FlowMode::InferredFromCodes),
            other => Err(format!("unknown flow mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionFlow {
    pub question: QuestionId,
    pub reached: u64,
    pub yes: u64,
    pub no: u64,
    /// Reached, but the answer is not pinned by the tree's documented edges.
    pub unknown: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowStats {
    pub dataset_id: String,
    pub mode: FlowMode,
    /// Finalized decisions the tallies are over.
    pub considered: u64,
    pub per_question: Vec<QuestionFlow>,
    pub notes: Vec<String>,
}

impl FlowStats {
    pub fn get(&self, question: &str) -> Option<&QuestionFlow> {
        self.per_question.iter().find(|q| q.question.as_str() == question)
    }

    /// Share of considered decisions that gave `answer` at `question`.
    pub fn share(&self, question: &str, answer: Answer) -> Proportion {
        let n = self.get(question).map_or(0, |q| match answer {
            Answer::Yes => q.yes,
            Answer::No => q.no,
        });
        Proportion::new(n, self.considered)
    }
}

pub fn question_flow_stats(session: &Session, mode: FlowMode) -> Result<FlowStats, AnalyticsError> {
    let tree = session.tree();
    let mut flows: Vec<QuestionFlow> = tree
        .questions()
        .iter()
        .map(|q| QuestionFlow {
            question: q.id.clone(),
            reached: 0,
            yes: 0,
            no: 0,
            unknown: 0,
        })
        .collect();
    let slot: HashMap<QuestionId, usize> = flows.iter().enumerate().map(|(i, f)| (f.question.clone(), i)).collect();

    match mode {
        FlowMode::RecordedPaths => {
            if let Some(d) = session.decisions().values().find(|d| d.pathless) {
                return Err(AnalyticsError::ModeUnavailable {
                    mode,
                    reason: format!("decision for `{}` has no recorded path", d.item_id),
                });
            }
            let paths = session
                .decisions()
                .values()
                .map(|d| &d.path)
                .chain(session.in_progress().values());
            for path in paths {
                for step in path {
                    let f = &mut flows[slot[&step.question]];
                    f.reached += 1;
                    match step.answer {
                        Answer::Yes => f.yes += 1,
                        Answer::No => f.no += 1,
                    }
                }
            }
            for path in session.in_progress().values() {
                if let Ok(crate::tree::Position::At(q)) = tree.walk(path) {
                    flows[slot[&q]].reached += 1;
                }
            }
        }
        FlowMode::InferredFromCodes => {
            let mut paths = HashMap::new();
            for d in session.decisions().values() {
                let path = paths
                    .entry(d.code)
                    .or_insert_with(|| tree.path_to(d.code))
                    .as_ref()
                    .ok_or_else(|| AnalyticsError::ModeUnavailable {
                        mode,
                        reason: format!("code {} is not a leaf of the session's tree", d.code),
                    })?;
                for step in path {
                    let q = tree.question(&step.question).expect("path from tree");
                    let f = &mut flows[slot[&step.question]];
                    f.reached += 1;
                    match (q.is_pinned(step.answer), step.answer) {
                        (true, Answer::Yes) => f.yes += 1,
                        (true, Answer::No) => f.no += 1,
                        (false, _) => f.unknown += 1,
                    }
                }
            }
        }
    }

    let mut stats = FlowStats {
        dataset_id: session.dataset_id().to_string(),
        mode,
        considered: session.coded_count() as u64,
        per_question: flows,
        notes: Vec::new(),
    };
    if mode == FlowMode::InferredFromCodes {
        stats.notes = published_notes(&stats);
    }
    Ok(stats)
}

/// Compares inferred tallies with published figures for the same dataset.
fn published_notes(stats: &FlowStats) -> Vec<String> {
    published_flow(&stats.dataset_id)
        .filter(|p| p.total == stats.considered)
        .map(|p| {
            let ours = stats.share(p.question, p.answer);
            let agrees = match p.count {
                Some(n) => n == ours.count,
                None => percent_matches(&ours, p.percent),
            };
            let printed = match p.count {
                Some(n) => format!("{n} of {} ({})", p.total, p.percent),
                None => format!("{} of {}", p.percent, p.total),
            };
            format!(
                "{} {}: inferred {} of {} ({}); published {}; {}",
                p.question,
                p.answer,
                ours.count,
                ours.total,
                ours.display(),
                printed,
                if agrees { "consistent" } else { "DIFFERS" }
            )
        })
        .collect()
}

/// True when `ours`, rounded half up to the printed precision, equals the
/// printed percentage.
fn percent_matches(ours: &Proportion, printed: &str) -> bool {
    let digits = printed.trim_end_matches('%');
    let decimals = digits.split_once('.').map_or(0, |(_, f)| f.len()) as u32;
    let Ok(value) = digits.replace('.', "").parse::<u64>() else {
        return false;
    };
    if ours.total == 0 {
        return false;
    }
    let scale = 100 * 10u64.pow(decimals);
    let rounded = (2 * scale * ours.count + ours.total) / (2 * ours.total);
    rounded == value
}

// ---------------------------------------------------------------------------
// Agreement between coders

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub common_items: u64,
    pub agreeing: u64,
    pub percent: Proportion,
    pub observed: f64,
    pub expected: f64,
    pub kappa: f64,
}

/// Percent agreement and Cohen's kappa over items both sessions coded, with
/// `T` and `Tprime` treated as one category.
pub fn agreement(a: &Session, b: &Session) -> Result<Agreement, AnalyticsError> {
    if a.dataset_id() != b.dataset_id() {
        return Err(AnalyticsError::DatasetMismatch {
            session: b.dataset_id().to_string(),
            dataset: a.dataset_id().to_string(),
        });
    }
    let pairs: Vec<(Code, Code)> = a
        .decisions()
        .iter()
        .filter_map(|(id, da)| {
            b.decision(id)
                .map(|db| (da.code.report_column(), db.code.report_column()))
        })
        .collect();
    if pairs.is_empty() {
        return Err(AnalyticsError::NoOverlap);
    }
    let n = pairs.len() as u64;
    let agreeing = pairs.iter().filter(|(x, y)| x == y).count() as u64;
    let mut left: BTreeMap<Code, u64> = BTreeMap::new();
    let mut right: BTreeMap<Code, u64> = BTreeMap::new();
    for (x, y) in &pairs {
        *left.entry(*x).or_default() += 1;
        *right.entry(*y).or_default() += 1;
    }
    let nf = n as f64;
    let observed = agreeing as f64 / nf;
    let expected: f64 = left
        .iter()
        .map(|(c, &l)| l as f64 * right.get(c).copied().unwrap_or(0) as f64)
        .sum::<f64>()
        / (nf * nf);
    // Both coders used a single shared category throughout.
    let kappa = if (1.0 - expected).abs() < f64::EPSILON {
        1.0
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(Agreement {
        common_items: n,
        agreeing,
        percent: Proportion::new(agreeing, n),
        observed,
        expected,
        kappa,
    })
}
