//! Label taxonomy: the 17 top-level IPTC Media Topic labels plus the three
//! auxiliary labels human annotators use to discard a text.
//!
//! The built-in schema is shipped as a versioned label file
//! (`assets/iptc_mediatopic_2023-10-24.jsonl`) and parsed the same way a user
//! supplied file is, so a newer IPTC revision is a data change only.
//!
//! Label file format: UTF-8, one JSON object per line with fields
//! `{id, display_name, description, kind}` where `kind` is `"topic"` or
//! `"auxiliary"`. An optional first line `{"version_date": "YYYY-MM-DD"}`
//! sets the schema version; without it the version defaults to 2023-10-24.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const TOPIC_LABEL_COUNT: usize = 17;

pub const DO_NOT_KNOW: &str = "do not know";
pub const NOT_NEWS: &str = "not news";
pub const MULTIPLE: &str = "multiple";
pub const AUXILIARY_LABELS: [&str; 3] = [DO_NOT_KNOW, NOT_NEWS, MULTIPLE];

const BUILTIN_SCHEMA: &str = include_str!("../assets/iptc_mediatopic_2023-10-24.jsonl");

pub fn default_version_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 10, 24).expect("valid date")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Topic,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicLabel {
    pub id: String,
    pub display_name: String,
    pub description: String,
    pub kind: LabelKind,
}

impl TopicLabel {
    pub fn is_topic(&self) -> bool {
        self.kind == LabelKind::Topic
    }
}

/// Where to load a schema from.
#[derive(Debug, Clone, Copy)]
pub enum SchemaSource<'a> {
    BuiltIn,
    File(&'a Path),
}

/// An ordered, validated label set. The order is the order of the label
/// file and defines the axes of every confusion matrix.
#[derive(Debug, Clone, Serialize)]
pub struct LabelSchema {
    version_date: NaiveDate,
    labels: Vec<TopicLabel>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

impl PartialEq for LabelSchema {
    fn eq(&self, other: &Self) -> bool {
        self.version_date == other.version_date && self.labels == other.labels
    }
}

impl Eq for LabelSchema {}

impl LabelSchema {
    /// Builds a schema from labels, enforcing unique ids, non-empty topic
    /// descriptions, at least one topic label and exactly the three
    /// auxiliary labels. The 17-topic count is enforced by [`load_schema`].
    pub fn new(version_date: NaiveDate, labels: Vec<TopicLabel>) -> Result<Self> {
        let mut lookup = HashMap::new();
        for (idx, label) in labels.iter().enumerate() {
            if label.id.trim().is_empty() {
                return Err(Error::InvalidSchema(format!("label #{} has an empty id", idx + 1)));
            }
            if label.kind == LabelKind::Topic && label.description.trim().is_empty() {
                return Err(Error::InvalidSchema(format!(
                    "topic label {:?} has an empty description",
                    label.id
                )));
            }
            if lookup.insert(normalize(&label.id), idx).is_some() {
                return Err(Error::DuplicateLabel(label.id.clone()));
            }
        }
        // display names may coincide with their own id but not with another label
        for (idx, label) in labels.iter().enumerate() {
            let key = normalize(&label.display_name);
            match lookup.get(&key) {
                Some(&other) if other != idx => {
                    return Err(Error::DuplicateLabel(label.display_name.clone()))
                }
                Some(_) => {}
                None => {
                    lookup.insert(key, idx);
                }
            }
        }

        let topics = labels.iter().filter(|l| l.is_topic()).count();
        if topics == 0 {
            return Err(Error::InvalidSchema("no topic labels".into()));
        }
        let mut aux: Vec<&str> = labels
            .iter()
            .filter(|l| l.kind == LabelKind::Auxiliary)
            .map(|l| l.id.as_str())
            .collect();
        aux.sort_unstable();
        let mut expected = AUXILIARY_LABELS.to_vec();
        expected.sort_unstable();
        if aux != expected {
            let missing: Vec<&str> = expected.iter().copied().filter(|e| !aux.contains(e)).collect();
            return Err(Error::InvalidSchema(if missing.is_empty() {
                format!("unexpected auxiliary labels {aux:?}; expected exactly {expected:?}")
            } else {
                format!("auxiliary labels missing: {missing:?}")
            }));
        }

        Ok(Self {
            version_date,
            labels,
            lookup,
        })
    }

    pub fn builtin() -> Self {
        parse_label_file(BUILTIN_SCHEMA).expect("built-in schema is valid")
    }

    pub fn version_date(&self) -> NaiveDate {
        self.version_date
    }

    pub fn labels(&self) -> &[TopicLabel] {
        &self.labels
    }

    pub fn topics(&self) -> impl Iterator<Item = &TopicLabel> {
        self.labels.iter().filter(|l| l.is_topic())
    }

    pub fn auxiliary(&self) -> impl Iterator<Item = &TopicLabel> {
        self.labels.iter().filter(|l| !l.is_topic())
    }

    /// Topic label ids in schema order.
    pub fn topic_ids(&self) -> Vec<String> {
        self.topics().map(|l| l.id.clone()).collect()
    }

    pub fn all_ids(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&TopicLabel> {
        self.labels.iter().find(|l| l.id == id)
    }

    pub fn is_auxiliary(&self, id: &str) -> bool {
        self.get(id).is_some_and(|l| !l.is_topic())
    }

    /// Maps free text onto a label by case-insensitive, whitespace-normalized
    /// comparison with ids and display names.
    pub fn canonicalize(&self, raw: &str) -> Result<&TopicLabel> {
        self.lookup
            .get(&normalize(raw))
            .map(|&idx| &self.labels[idx])
            .ok_or_else(|| Error::UnknownLabel { raw: raw.to_string() })
    }

    /// Serializes the schema back into the label file format.
    pub fn to_label_file(&self) -> String {
        let mut out = serde_json::json!({ "version_date": self.version_date }).to_string();
        out.push('\n');
        for label in &self.labels {
            out.push_str(&serde_json::to_string(label).expect("label serializes"));
            out.push('\n');
        }
        out
    }
}

/// Free-function form of [`LabelSchema::canonicalize`].
pub fn canonicalize_label<'a>(raw: &str, schema: &'a LabelSchema) -> Result<&'a TopicLabel> {
    schema.canonicalize(raw)
}

pub(crate) fn normalize(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Loads the built-in schema or a label file and checks every invariant,
/// including the 17 topic labels.
pub fn load_schema(source: SchemaSource<'_>) -> Result<LabelSchema> {
    let schema = match source {
        SchemaSource::BuiltIn => LabelSchema::builtin(),
        SchemaSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_label_file(&text)?
        }
    };
    let topics = schema.topics().count();
    if topics != TOPIC_LABEL_COUNT {
        return Err(Error::InvalidSchema(format!(
            "expected {TOPIC_LABEL_COUNT} topic labels, found {topics}"
        )));
    }
    Ok(schema)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VersionHeader {
    version_date: NaiveDate,
}

/// Parses label-file text without the topic-count check.
pub fn parse_label_file(text: &str) -> Result<LabelSchema> {
    let mut version = None;
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if labels.is_empty() && version.is_none() {
            if let Ok(header) = serde_json::from_str::<VersionHeader>(line) {
                version = Some(header.version_date);
                continue;
            }
        }
        let label: TopicLabel = serde_json::from_str(line).map_err(|e| Error::SchemaParse {
            line: lineno,
            message: format!("{e} in entry {}", truncate_for_error(line)),
        })?;
        labels.push(label);
    }
    LabelSchema::new(version.unwrap_or_else(default_version_date), labels)
}

fn truncate_for_error(line: &str) -> String {
    let mut s: String = line.chars().take(80).collect();
    if s.len() < line.len() {
        s.push_str("...");
    }
    s
}

/// Renders the annotator guidelines: general instructions, every topic label
/// with its description, then the discard labels. Output is deterministic.
pub fn render_guidelines(schema: &LabelSchema) -> String {
    let mut out = String::new();
    let topics: Vec<&TopicLabel> = schema.topics().collect();
    let _ = writeln!(out, "IPTC MEDIA TOPIC ANNOTATION GUIDELINES");
    let _ = writeln!(out, "Schema version: {}", schema.version_date());
    out.push('\n');
    let _ = writeln!(out, "General instructions");
    let _ = writeln!(
        out,
        "Give every text exactly one of the {} topic labels below. When two labels seem \
         equally plausible, the lower levels of the IPTC Media Topic tree \
         (https://www.iptc.org/std/NewsCodes/treeview/mediatopic/mediatopic-en-GB.html) \
         can show which top-level label a specific subject belongs to. Do not linger on \
         hard cases: use a discard label instead.",
        topics.len()
    );
    out.push('\n');
    let _ = writeln!(out, "Topic labels");
    for (idx, label) in topics.iter().enumerate() {
        let _ = writeln!(out, "{:>2}. {}", idx + 1, label.id);
        let _ = writeln!(out, "    {}", label.description);
    }
    out.push('\n');
    let _ = writeln!(out, "Discard labels");
    for label in schema.auxiliary() {
        let _ = writeln!(out, " - {}", label.id);
        let _ = writeln!(out, "    {}", label.description);
    }
    out
}
