//! Question-flow figures published alongside the bundled appendix codings.
//!
//! Inferred flow statistics for a bundled dataset are compared against these
//! and any disagreement is reported as a note instead of being adjusted away.

use crate::tree::Answer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublishedFlow {
    pub dataset_id: &'static str,
    pub question: &'static str,
    pub answer: Answer,
    /// Printed item count, when one was given.
    pub count: Option<u64>,
    pub total: u64,
    /// Printed percentage, exactly as printed.
    pub percent: &'static str,
}

pub const PUBLISHED_FLOW: [PublishedFlow; 5] = [
    PublishedFlow {
        dataset_id: "dcms-sub",
        question: "Q4",
        answer: Answer::Yes,
        count: Some(17),
        total: 28,
        percent: "61%",
    },
    PublishedFlow {
        dataset_id: "dcms-sub",
        question: "Q5",
        answer: Answer::No,
        count: Some(11),
        total: 28,
        percent: "39.3%",
    },
    PublishedFlow {
        dataset_id: "dcms-sub",
        question: "Q5",
        answer: Answer::Yes,
        count: Some(7),
        total: 28,
        percent: "25%",
    },
    PublishedFlow {
        dataset_id: "etsi",
        question: "Q4",
        answer: Answer::Yes,
        count: None,
        total: 67,
        percent: "78%",
    },
    PublishedFlow {
        dataset_id: "etsi",
        question: "Q5",
        answer: Answer::Yes,
        count: None,
        total: 67,
        percent: "43.3%",
    },
];

pub fn published_flow(dataset_id: &str) -> impl Iterator<Item = &'static PublishedFlow> + '_ {
    PUBLISHED_FLOW.iter().filter(move |p| p.dataset_id == dataset_id)
}
