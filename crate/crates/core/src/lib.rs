//! Coding-tree engine for classifying security advice.
//!
//! A [`CodingTree`] turns yes/no answers into a code; a [`Session`] records
//! one coder's answers over a [`Dataset`] as an event log; [`analytics`]
//! tallies finished sessions and [`report`] renders the results.

pub mod analytics;
pub mod code;
pub mod corpus;
pub mod published;
pub mod report;
pub mod session;
pub mod store;
pub mod tree;

pub use analytics::{
    actionability, agreement, compare, frequency_table, question_flow_stats, AnalyticsError, ComparisonMatrix,
    FlowMode, FlowStats, FrequencyReport, Proportion, RowKey,
};
pub use code::{Code, REPORT_CODES};
pub use corpus::{bundled_assignments, bundled_dataset, bundled_datasets, parse_dataset, Assignment, Dataset, DatasetFormat};
pub use report::{ReportError, ReportFormat};
pub use session::{Checkpoint, CodingDecision, Event, Session, SessionError};
pub use store::{SessionLog, StoreError, Workspace};
pub use tree::{load_tree, Answer, AnswerStep, CodingTree, Position, QuestionId, TreeError};
