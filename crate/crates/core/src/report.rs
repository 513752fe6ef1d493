//! Serialization of analytics results.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::analytics::{Agreement, ComparisonMatrix, FlowStats, FrequencyReport, Proportion, RowKey};
use crate::code::REPORT_CODES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
    Chart,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 4] = [
        ReportFormat::Table,
        ReportFormat::Csv,
        ReportFormat::Json,
        ReportFormat::Chart,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportFormat::Table => "table",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Chart => "chart",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ReportFormat::Table => "text/plain; charset=utf-8",
            ReportFormat::Csv => "text/csv; charset=utf-8",
            ReportFormat::Json | ReportFormat::Chart => "application/json",
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table" | "table-text" | "text" => Ok(ReportFormat::Table),
            "csv" | "delimited" => Ok(ReportFormat::Csv),
            "json" | "structured" => Ok(ReportFormat::Json),
            "chart" | "chart-data" => Ok(ReportFormat::Chart),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("unknown report format `{0}` (expected table, csv, json or chart)")]
    UnknownFormat(String),
    #[error("{what} cannot be rendered as {format}")]
    Unsupported { format: ReportFormat, what: &'static str },
}

// ---------------------------------------------------------------------------
// Chart data

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartSeries {
    pub name: String,
    /// One fraction per x group; `null` when the column has no coded items.
    pub values: Vec<Option<f64>>,
    pub counts: Vec<u64>,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartData {
    pub kind: &'static str,
    /// Group ids: the eleven codes then `Actionable`.
    pub groups: Vec<&'static str>,
    /// Display labels, actionable codes starred.
    pub labels: Vec<String>,
    pub series: Vec<ChartSeries>,
}

pub fn chart_data(matrix: &ComparisonMatrix) -> ChartData {
    ChartData {
        kind: "grouped-bar",
        groups: matrix.rows.iter().map(|r| r.key.id()).collect(),
        labels: matrix.rows.iter().map(|r| r.key.label()).collect(),
        series: matrix
            .columns
            .iter()
            .enumerate()
            .map(|(i, col)| ChartSeries {
                name: col.label.clone(),
                values: matrix.rows.iter().map(|r| r.cells[i].fraction()).collect(),
                counts: matrix.rows.iter().map(|r| r.cells[i].count).collect(),
                total: col.coded_count,
            })
            .collect(),
    }
}

fn frequency_chart(report: &FrequencyReport) -> ChartData {
    let mut groups: Vec<&'static str> = REPORT_CODES.iter().map(|c| c.as_str()).collect();
    let mut labels: Vec<String> = REPORT_CODES.iter().map(|c| c.heading()).collect();
    let mut cells: Vec<Proportion> = REPORT_CODES.iter().map(|&c| report.proportion(c)).collect();
    groups.push(RowKey::Actionable.id());
    labels.push(RowKey::Actionable.label());
    cells.push(report.actionable);
    ChartData {
        kind: "grouped-bar",
        groups,
        labels,
        series: vec![ChartSeries {
            name: report.dataset_id.clone(),
            values: cells.iter().map(|p| p.fraction()).collect(),
            counts: cells.iter().map(|p| p.count).collect(),
            total: report.coded_count,
        }],
    }
}

// ---------------------------------------------------------------------------
// Plain-text tables

enum Line {
    Row(Vec<String>),
    Rule,
}

/// First column left-aligned, the rest right-aligned.
fn aligned(lines: &[Line]) -> String {
    let mut widths: Vec<usize> = Vec::new();
    for line in lines {
        if let Line::Row(cells) = line {
            for (i, c) in cells.iter().enumerate() {
                let w = c.chars().count();
                match widths.get_mut(i) {
                    Some(x) => *x = (*x).max(w),
                    None => widths.push(w),
                }
            }
        }
    }
    let full = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
    let mut out = String::new();
    for line in lines {
        match line {
            Line::Rule => out.push_str(&"-".repeat(full)),
            Line::Row(cells) => {
                let mut row = String::new();
                for (i, w) in widths.iter().enumerate() {
                    let c = cells.get(i).map(String::as_str).unwrap_or("");
                    if i == 0 {
                        row.push_str(&format!("{c:<w$}"));
                    } else {
                        row.push_str(&format!("  {c:>w$}"));
                    }
                }
                out.push_str(row.trim_end());
            }
        }
        out.push('\n');
    }
    out
}

fn blank_zero(n: u64) -> String {
    if n == 0 {
        String::new()
    } else {
        n.to_string()
    }
}

fn frequency_table_text(report: &FrequencyReport) -> String {
    let codes = report.used_codes();
    let mut lines = Vec::new();
    let mut header = vec![String::new(), "n".to_string()];
    header.extend(codes.iter().map(|c| c.heading()));
    lines.push(Line::Row(header));
    lines.push(Line::Rule);
    for cat in &report.categories {
        let mut row = vec![cat.category_id.clone(), cat.n.to_string()];
        row.extend(codes.iter().map(|c| blank_zero(cat.counts.get(c).copied().unwrap_or(0))));
        lines.push(Line::Row(row));
    }
    lines.push(Line::Rule);
    let mut total = vec![format!("Total ({})", report.coded_count), String::new()];
    total.extend(codes.iter().map(|&c| report.total(c).to_string()));
    lines.push(Line::Row(total));
    lines.push(Line::Rule);
    let mut share = vec!["Proportion of Total".to_string(), String::new()];
    share.extend(codes.iter().map(|&c| report.proportion(c).display()));
    lines.push(Line::Row(share));

    let mut out = format!("{} ({})\n", report.title, report.dataset_id);
    out.push_str(&aligned(&lines));
    out.push_str(&format!(
        "Actionable: {} of {} ({})\n",
        report.actionable.count,
        report.actionable.total,
        report.actionable.display()
    ));
    if report.coded_count < report.item_count {
        out.push_str(&format!(
            "Coverage: {} of {} items coded\n",
            report.coded_count, report.item_count
        ));
    }
    out
}

fn comparison_table_text(matrix: &ComparisonMatrix) -> String {
    let mut lines = Vec::new();
    let mut header = vec![String::new()];
    header.extend(matrix.columns.iter().map(|c| c.label.clone()));
    lines.push(Line::Row(header));
    lines.push(Line::Rule);
    for row in &matrix.rows {
        if row.key == RowKey::Actionable {
            lines.push(Line::Rule);
        }
        let mut cells = vec![row.key.label()];
        cells.extend(row.cells.iter().map(|p| p.display()));
        lines.push(Line::Row(cells));
    }
    lines.push(Line::Rule);
    let mut coded = vec!["Coded".to_string()];
    coded.extend(matrix.columns.iter().map(|c| format!("{}/{}", c.coded_count, c.item_count)));
    lines.push(Line::Row(coded));
    aligned(&lines)
}

fn flow_table_text(stats: &FlowStats) -> String {
    let mut lines = vec![
        Line::Row(
            ["", "reached", "yes", "no", "unknown", "yes share"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        ),
        Line::Rule,
    ];
    for q in &stats.per_question {
        lines.push(Line::Row(vec![
            q.question.to_string(),
            q.reached.to_string(),
            q.yes.to_string(),
            q.no.to_string(),
            q.unknown.to_string(),
            Proportion::new(q.yes, stats.considered).display(),
        ]));
    }
    let mut out = format!(
        "Question flow for {} ({}, {} coded items)\n",
        stats.dataset_id, stats.mode, stats.considered
    );
    out.push_str(&aligned(&lines));
    for note in &stats.notes {
        out.push_str(&format!("note: {note}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// CSV

fn csv_document<R: AsRef<[u8]>>(header: &[&str], rows: impl IntoIterator<Item = Vec<R>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for row in rows {
        w.write_record(&row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}

const LONG_HEADER: [&str; 5] = ["scope", "code", "count", "total", "percent"];

fn long_row(scope: &str, code: &str, p: Proportion) -> Vec<String> {
    let percent = p
        .percent_tenths()
        .map(|t| format!("{}.{}", t / 10, t % 10))
        .unwrap_or_default();
    vec![
        scope.to_string(),
        code.to_string(),
        p.count.to_string(),
        p.total.to_string(),
        percent,
    ]
}

/// Long format; only non-zero counts, so an empty report is the header alone.
fn frequency_csv(report: &FrequencyReport) -> String {
    let mut rows = Vec::new();
    for cat in &report.categories {
        for code in REPORT_CODES {
            if let Some(&n) = cat.counts.get(&code).filter(|&&n| n > 0) {
                rows.push(long_row(&cat.category_id, code.as_str(), Proportion::new(n, cat.coded)));
            }
        }
    }
    for code in report.used_codes() {
        rows.push(long_row("total", code.as_str(), report.proportion(code)));
    }
    if report.coded_count > 0 {
        rows.push(long_row("total", RowKey::Actionable.id(), report.actionable));
    }
    csv_document(&LONG_HEADER, rows)
}

fn comparison_csv(matrix: &ComparisonMatrix) -> String {
    let mut rows = Vec::new();
    for (i, col) in matrix.columns.iter().enumerate() {
        for row in &matrix.rows {
            rows.push(long_row(&col.label, row.key.id(), row.cells[i]));
        }
    }
    csv_document(&LONG_HEADER, rows)
}

fn flow_csv(stats: &FlowStats) -> String {
    csv_document(
        &["question", "reached", "yes", "no", "unknown", "considered"],
        stats.per_question.iter().map(|q| {
            vec![
                q.question.to_string(),
                q.reached.to_string(),
                q.yes.to_string(),
                q.no.to_string(),
                q.unknown.to_string(),
                stats.considered.to_string(),
            ]
        }),
    )
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Entry points

pub fn render_frequency(report: &FrequencyReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => frequency_table_text(report),
        ReportFormat::Csv => frequency_csv(report),
        ReportFormat::Json => json(report),
        ReportFormat::Chart => json(&frequency_chart(report)),
    }
}

pub fn render_comparison(matrix: &ComparisonMatrix, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => comparison_table_text(matrix),
        ReportFormat::Csv => comparison_csv(matrix),
        ReportFormat::Json => json(matrix),
        ReportFormat::Chart => json(&chart_data(matrix)),
    }
}

pub fn render_flow(stats: &FlowStats, format: ReportFormat) -> Result<String, ReportError> {
    match format {
        ReportFormat::Table => Ok(flow_table_text(stats)),
        ReportFormat::Csv => Ok(flow_csv(stats)),
        ReportFormat::Json => Ok(json(stats)),
        ReportFormat::Chart => Err(ReportError::Unsupported { format, what: "flow statistics" }),
    }
}

pub fn render_agreement(a: &Agreement, format: ReportFormat) -> Result<String, ReportError> {
    match format {
        ReportFormat::Table => Ok(format!(
            "Common items: {}\nAgreement: {} of {} ({})\nCohen's kappa: {:.4}\n",
            a.common_items,
            a.agreeing,
            a.common_items,
            a.percent.display(),
            a.kappa
        )),
        ReportFormat::Csv => Ok(csv_document(
            &["common_items", "agreeing", "percent", "observed", "expected", "kappa"],
            [vec![
                a.common_items.to_string(),
                a.agreeing.to_string(),
                a.percent.display().trim_end_matches('%').to_string(),
                a.observed.to_string(),
                a.expected.to_string(),
                a.kappa.to_string(),
            ]],
        )),
        ReportFormat::Json => Ok(json(a)),
        ReportFormat::Chart => Err(ReportError::Unsupported { format, what: "agreement" }),
    }
}
