//! Leaf codes of the coding tree.
//!
//! Twelve leaf identities exist. `T` and `Tprime` are distinct positions in
//! the tree but share one label and are merged into a single `T` column in
//! every report.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Code {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    T,
    Tprime,
    N1,
    #[serde(rename = "N1.1")]
    N1_1,
    M1,
    M2,
}

/// Codes in report order, with `Tprime` folded into `T`.
pub const REPORT_CODES: [Code; 11] = [
    Code::P1,
    Code::P2,
    Code::P3,
    Code::P4,
    Code::P5,
    Code::P6,
    Code::T,
    Code::N1,
    Code::N1_1,
    Code::M1,
    Code::M2,
];

impl Code {
    pub const ALL: [Code; 12] = [
        Code::P1,
        Code::P2,
        Code::P3,
        Code::P4,
        Code::P5,
        Code::P6,
        Code::T,
        Code::Tprime,
        Code::N1,
        Code::N1_1,
        Code::M1,
        Code::M2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Code::P1 => "P1",
            Code::P2 => "P2",
            Code::P3 => "P3",
            Code::P4 => "P4",
            Code::P5 => "P5",
            Code::P6 => "P6",
            Code::T => "T",
            Code::Tprime => "Tprime",
            Code::N1 => "N1",
            Code::N1_1 => "N1.1",
            Code::M1 => "M1",
            Code::M2 => "M2",
        }
    }

    /// Actionable codes are exactly the specific and infeasible practices.
    pub fn is_actionable(self) -> bool {
        matches!(self, Code::P3 | Code::P4 | Code::P5 | Code::P6)
    }

    /// The column this code is tallied under in reports.
    pub fn report_column(self) -> Code {
        match self {
            Code::Tprime => Code::T,
            other => other,
        }
    }

    /// Column heading, with actionable codes starred.
    pub fn heading(self) -> String {
        let col = self.report_column();
        if col.is_actionable() {
            format!("*{}", col.as_str())
        } else {
            col.as_str().to_string()
        }
    }
}

/// Free function form used by callers that think in terms of classification.
pub fn classify_actionable(code: Code) -> bool {
    code.is_actionable()
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown leaf code `{0}`")]
pub struct UnknownCode(pub String);

impl FromStr for Code {
    type Err = UnknownCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let code = match trimmed {
            "P1" => Code::P1,
            "P2" => Code::P2,
            "P3" => Code::P3,
            "P4" => Code::P4,
            "P5" => Code::P5,
            "P6" => Code::P6,
            "T" => Code::T,
            "Tprime" | "T'" => Code::Tprime,
            "N1" => Code::N1,
            "N1.1" => Code::N1_1,
            "M1" => Code::M1,
            "M2" => Code::M2,
            _ => return Err(UnknownCode(trimmed.to_string())),
        };
        Ok(code)
    }
}
