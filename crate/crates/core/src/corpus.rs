//! Advice datasets: items grouped under ordered categories.
//!
//! Two document forms are accepted. JSON carries the whole dataset. CSV
//! carries one item per row (`item_id,category_id,text,notes`) below a
//! manifest of `#` lines:
//!
//! ```text
//! # dataset_id: etsi
//! # title: ETSI Provisions
//! # category: ETSI-1 | No universal default passwords
//! item_id,category_id,text,notes
//! ETSI-1-1,ETSI-1,...,
//! ```
//!
//! Without `# category:` lines the categories are taken from the items in
//! order of first appearance.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdviceItem {
    pub item_id: String,
    pub category_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Category {
    pub category_id: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub dataset_id: String,
    pub title: String,
    pub categories: Vec<Category>,
    #[serde(default)]
    pub items: Vec<AdviceItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("parse error at {locator}: {message}")]
    Parse { locator: String, message: String },
    #[error("missing or empty field `{field}` at {locator}")]
    EmptyField { field: &'static str, locator: String },
    #[error("duplicate category `{0}`")]
    DuplicateCategory(String),
    #[error("duplicate item id `{item_id}` at {locator}")]
    DuplicateItem { item_id: String, locator: String },
    #[error("item `{item_id}` refers to unknown category `{category_id}`")]
    UnknownCategory { item_id: String, category_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Json,
    Csv,
}

impl DatasetFormat {
    /// Picks a format from a file name, defaulting to JSON.
    pub fn from_path(path: &std::path::Path) -> DatasetFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Json,
        }
    }
}

impl Dataset {
    pub fn item(&self, item_id: &str) -> Option<&AdviceItem> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.item_id.clone()).collect()
    }

    /// Exact id, or a bare appendix id (`3-4`, `3.5`) that is the unique
    /// `-`-separated suffix of an item id.
    pub fn resolve_item_id(&self, id: &str) -> Option<&str> {
        if let Some(item) = self.item(id) {
            return Some(&item.item_id);
        }
        let suffix = format!("-{id}");
        let mut hits = self.items.iter().filter(|i| i.item_id.ends_with(&suffix));
        match (hits.next(), hits.next()) {
            (Some(item), None) => Some(&item.item_id),
            _ => None,
        }
    }

    pub fn category_sizes(&self) -> BTreeMap<&str, usize> {
        let mut sizes: BTreeMap<&str, usize> =
            self.categories.iter().map(|c| (c.category_id.as_str(), 0)).collect();
        for item in &self.items {
            *sizes.entry(item.category_id.as_str()).or_default() += 1;
        }
        sizes
    }

    /// Checks the dataset invariants and normalizes empty notes to `None`.
    pub fn validate(mut self) -> Result<Dataset, CorpusError> {
        let locators: Vec<String> = (0..self.items.len()).map(|i| format!("items[{i}]")).collect();
        self.validate_with(&locators)?;
        Ok(self)
    }

    fn validate_with(&mut self, locators: &[String]) -> Result<(), CorpusError> {
        if self.dataset_id.trim().is_empty() {
            return Err(CorpusError::EmptyField {
                field: "dataset_id",
                locator: "dataset".into(),
            });
        }
        let mut cats = HashSet::new();
        for (i, c) in self.categories.iter().enumerate() {
            if c.category_id.trim().is_empty() {
                return Err(CorpusError::EmptyField {
                    field: "category_id",
                    locator: format!("categories[{i}]"),
                });
            }
            if !cats.insert(c.category_id.as_str()) {
                return Err(CorpusError::DuplicateCategory(c.category_id.clone()));
            }
        }
        let mut ids = HashSet::new();
        for (item, locator) in self.items.iter_mut().zip(locators) {
            if item.item_id.trim().is_empty() {
                return Err(CorpusError::EmptyField {
                    field: "item_id",
                    locator: locator.clone(),
                });
            }
            if item.category_id.trim().is_empty() {
                return Err(CorpusError::EmptyField {
                    field: "category_id",
                    locator: locator.clone(),
                });
            }
            if item.text.trim().is_empty() {
                return Err(CorpusError::EmptyField {
                    field: "text",
                    locator: locator.clone(),
                });
            }
            if !ids.insert(item.item_id.clone()) {
                return Err(CorpusError::DuplicateItem {
                    item_id: item.item_id.clone(),
                    locator: locator.clone(),
                });
            }
            if !cats.contains(item.category_id.as_str()) {
                return Err(CorpusError::UnknownCategory {
                    item_id: item.item_id.clone(),
                    category_id: item.category_id.clone(),
                });
            }
            if item.notes.as_deref().is_some_and(|n| n.is_empty()) {
                item.notes = None;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("dataset serializes");
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# dataset_id: {}\n", manifest_value(&self.dataset_id)));
        out.push_str(&format!("# title: {}\n", manifest_value(&self.title)));
        for c in &self.categories {
            out.push_str(&format!(
                "# category: {} | {}\n",
                manifest_value(&c.category_id),
                manifest_value(&c.title)
            ));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["item_id", "category_id", "text", "notes"]).expect("in-memory write");
        for i in &self.items {
            w.write_record([
                i.item_id.as_str(),
                i.category_id.as_str(),
                i.text.as_str(),
                i.notes.as_deref().unwrap_or(""),
            ])
            .expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
        out
    }

    pub fn export(&self, format: DatasetFormat) -> String {
        match format {
            DatasetFormat::Json => self.to_json(),
            DatasetFormat::Csv => self.to_csv(),
        }
    }
}

pub fn parse_dataset(document: &str, format: DatasetFormat) -> Result<Dataset, CorpusError> {
    match format {
        DatasetFormat::Json => parse_dataset_json(document),
        DatasetFormat::Csv => parse_dataset_csv(document),
    }
}

pub fn parse_dataset_json(document: &str) -> Result<Dataset, CorpusError> {
    let dataset: Dataset = serde_json::from_str(document).map_err(|e| CorpusError::Parse {
        locator: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    dataset.validate()
}

pub fn parse_dataset_csv(document: &str) -> Result<Dataset, CorpusError> {
    let mut dataset_id = None;
    let mut title = None;
    let mut categories = Vec::new();
    let mut body_start = 0;
    let mut manifest_lines = 0;

    for line in document.split_inclusive('\n') {
        let trimmed = line.trim_end_matches(['\n', '\r']);
        let Some(rest) = trimmed.strip_prefix('#') else {
            break;
        };
        manifest_lines += 1;
        body_start += line.len();
        let locator = format!("line {manifest_lines}");
        let Some((key, value)) = rest.split_once(':') else {
            return Err(CorpusError::Parse {
                locator,
                message: "manifest line must be `# key: value`".into(),
            });
        };
        let bad = |message: String| CorpusError::Parse {
            locator: locator.clone(),
            message,
        };
        match key.trim() {
            "dataset_id" => dataset_id = Some(read_manifest_value(value, false).map_err(bad)?.0),
            "title" => title = Some(read_manifest_value(value, false).map_err(bad)?.0),
            "category" => {
                let (id, rest) = read_manifest_value(value, true).map_err(bad)?;
                let title = match rest.strip_prefix('|') {
                    Some(t) => read_manifest_value(t, false).map_err(bad)?.0,
                    None => id.clone(),
                };
                categories.push(Category { category_id: id, title });
            }
            other => {
                return Err(CorpusError::Parse {
                    locator,
                    message: format!("unknown manifest key `{other}`"),
                })
            }
        }
    }

    let dataset_id = dataset_id.ok_or_else(|| CorpusError::EmptyField {
        field: "dataset_id",
        locator: "manifest".into(),
    })?;
    let derive_categories = categories.is_empty();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(&document.as_bytes()[body_start..]);
    let headers = reader.headers().map_err(|e| csv_error(e, manifest_lines))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_id), Some(c_cat), Some(c_text)) = (col("item_id"), col("category_id"), col("text")) else {
        return Err(CorpusError::Parse {
            locator: format!("line {}", manifest_lines + 1),
            message: "header must contain item_id, category_id and text".into(),
        });
    };
    let c_notes = col("notes");

    let mut items = Vec::new();
    let mut locators = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, manifest_lines))?;
        let line = record.position().map(|p| p.line() as usize + manifest_lines).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let item = AdviceItem {
            item_id: field(c_id),
            category_id: field(c_cat),
            text: field(c_text),
            notes: c_notes.map(field).filter(|n| !n.is_empty()),
        };
        if derive_categories && !categories.iter().any(|c: &Category| c.category_id == item.category_id) {
            categories.push(Category {
                category_id: item.category_id.clone(),
                title: item.category_id.clone(),
            });
        }
        items.push(item);
        locators.push(format!("line {line}"));
    }

    let mut dataset = Dataset {
        title: title.unwrap_or_else(|| dataset_id.clone()),
        dataset_id,
        categories,
        items,
    };
    dataset.validate_with(&locators)?;
    Ok(dataset)
}

/// Manifest values are written bare unless they would not survive the
/// line-based manifest, in which case they are JSON string literals.
fn manifest_value(value: &str) -> String {
    let plain = value == value.trim()
        && !value.starts_with('"')
        && !value.contains(['\n', '\r', '|']);
    if plain {
        value.to_string()
    } else {
        serde_json::to_string(value).expect("strings serialize")
    }
}

/// Reads one manifest value, returning it and the unread remainder. A bare
/// value runs to the end of the line, or to `|` when `until_bar` is set.
fn read_manifest_value(raw: &str, until_bar: bool) -> Result<(String, &str), String> {
    let raw = raw.trim_start();
    if raw.starts_with('"') {
        let mut stream = serde_json::Deserializer::from_str(raw).into_iter::<String>();
        let value = match stream.next() {
            Some(Ok(v)) => v,
            Some(Err(e)) => return Err(format!("bad quoted value: {e}")),
            None => return Err("missing value".into()),
        };
        let rest = raw[stream.byte_offset()..].trim_start();
        return Ok((value, rest));
    }
    let end = if until_bar { raw.find('|').unwrap_or(raw.len()) } else { raw.len() };
    Ok((raw[..end].trim().to_string(), &raw[end..]))
}

fn csv_error(e: csv::Error, offset: usize) -> CorpusError {
    let locator = e
        .position()
        .map(|p| format!("line {}", p.line() as usize + offset))
        .unwrap_or_else(|| "csv".into());
    CorpusError::Parse {
        locator,
        message: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Code assignment files: `item_id,code` rows recording final codes only.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub item_id: String,
    pub code: String,
}

pub fn parse_assignments(document: &str) -> Result<Vec<Assignment>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(document.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(e, 0))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_id), Some(c_code)) = (col("item_id"), col("code")) else {
        return Err(CorpusError::Parse {
            locator: "line 1".into(),
            message: "header must contain item_id and code".into(),
        });
    };
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        out.push(Assignment {
            item_id: record.get(c_id).unwrap_or("").to_string(),
            code: record.get(c_code).unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Bundled corpora

const DCMS_FULL: &str = include_str!("../data/dcms-full.json");
const DCMS_SUB: &str = include_str!("../data/dcms-sub.json");
const ETSI: &str = include_str!("../data/etsi.json");

const CODES_DCMS_FULL: &str = include_str!("../data/appendix-dcms-full-codes.csv");
const CODES_DCMS_SUB: &str = include_str!("../data/appendix-dcms-sub-codes.csv");
const CODES_ETSI: &str = include_str!("../data/appendix-etsi-codes.csv");

pub const BUNDLED_DATASET_IDS: [&str; 3] = ["dcms-full", "dcms-sub", "etsi"];

/// The three bundled datasets: DCMS Full, DCMS Sub-Topics, ETSI Provisions.
pub fn bundled_datasets() -> Vec<Dataset> {
    [DCMS_FULL, DCMS_SUB, ETSI]
        .into_iter()
        .map(|doc| parse_dataset_json(doc).expect("bundled dataset is valid"))
        .collect()
}

pub fn bundled_dataset(dataset_id: &str) -> Option<Dataset> {
    bundled_datasets().into_iter().find(|d| d.dataset_id == dataset_id)
}

/// Names of the bundled code-assignment files and the dataset each codes.
pub const BUNDLED_ASSIGNMENTS: [(&str, &str); 3] = [
    ("appendix-dcms-full-codes", "dcms-full"),
    ("appendix-dcms-sub-codes", "dcms-sub"),
    ("appendix-etsi-codes", "etsi"),
];

pub fn bundled_assignments(name: &str) -> Option<Vec<Assignment>> {
    let doc = match name.trim_end_matches(".csv") {
        "appendix-dcms-full-codes" => CODES_DCMS_FULL,
        "appendix-dcms-sub-codes" => CODES_DCMS_SUB,
        "appendix-etsi-codes" => CODES_ETSI,
        _ => return None,
    };
    Some(parse_assignments(doc).expect("bundled assignments parse"))
}

/// Bundled final codes for a bundled dataset.
pub fn bundled_assignments_for(dataset_id: &str) -> Option<Vec<Assignment>> {
    BUNDLED_ASSIGNMENTS
        .iter()
        .find(|(_, d)| *d == dataset_id)
        .and_then(|(name, _)| bundled_assignments(name))
}
