use std::collections::BTreeSet;

use crate::corpus::Document;
use crate::rng::sha256_hex;
use crate::schema::{normalize, LabelSchema, TopicLabel};
use crate::{Error, Result};

pub const PROMPT_VERSION: &str = "v1";
const TEMPLATE_V1: &str = include_str!("../../assets/prompt_v1.txt");

/// The zero-shot annotation prompt with the label block already rendered.
///
/// The template lives in `assets/prompt_v1.txt`; [`PromptTemplate::hash`]
/// pins it (template text plus label block) in run records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    version: String,
    prefix: String,
    suffix: String,
}

impl PromptTemplate {
    pub fn new(schema: &LabelSchema) -> Self {
        Self::from_template(PROMPT_VERSION, TEMPLATE_V1, schema)
    }

    /// Builds a template from raw text containing the `<<LABEL_COUNT>>`,
    /// `<<LABELS>>` and `<<TEXT>>` placeholders.
    pub fn from_template(version: &str, template: &str, schema: &LabelSchema) -> Self {
        let topics: Vec<&TopicLabel> = schema.topics().collect();
        let labels = topics
            .iter()
            .map(|l| format!("- {}: {}", l.id, l.description))
            .collect::<Vec<_>>()
            .join("\n");
        let filled = template
            .replace("<<LABEL_COUNT>>", &topics.len().to_string())
            .replace("<<LABELS>>", &labels);
        let (prefix, suffix) = filled
            .split_once("<<TEXT>>")
            .expect("prompt template has a <<TEXT>> placeholder");
        Self {
            version: version.to_string(),
            prefix: prefix.to_string(),
            suffix: suffix.to_string(),
        }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn render(&self, text: &str) -> String {
        let mut out = String::with_capacity(self.prefix.len() + text.len() + self.suffix.len());
        out.push_str(&self.prefix);
        out.push_str(text);
        out.push_str(&self.suffix);
        out
    }

    pub fn hash(&self) -> String {
        sha256_hex(&format!("{}\u{0}{}\u{0}{}", self.version, self.prefix, self.suffix))
    }

    /// Recovers the document text from a prompt rendered by this template.
    pub fn extract_text<'a>(&self, prompt: &'a str) -> Option<&'a str> {
        prompt.strip_prefix(self.prefix.as_str())?.strip_suffix(self.suffix.as_str())
    }
}

pub fn build_prompt(doc: &Document, schema: &LabelSchema) -> String {
    PromptTemplate::new(schema).render(&doc.body)
}

/// Reads a label out of a teacher reply.
///
/// A JSON object with a `label` field wins (code fences and surrounding
/// prose are tolerated). Otherwise the text is scanned for topic label names
/// as whole phrases; exactly one distinct name must appear.
pub fn parse_label_response<'a>(raw: &str, schema: &'a LabelSchema) -> Result<&'a TopicLabel> {
    if let Some(value) = structured_label(raw) {
        let label = schema.canonicalize(&value)?;
        if !label.is_topic() {
            return Err(Error::InvalidLabel {
                label: value,
                options: schema.topic_ids(),
            });
        }
        return Ok(label);
    }

    let haystack = normalize(raw);
    let found: BTreeSet<&str> = schema
        .topics()
        .filter(|l| contains_phrase(&haystack, &l.id))
        .map(|l| l.id.as_str())
        .collect();
    match found.len() {
        0 => Err(Error::UnparseableResponse(raw.to_string())),
        1 => Ok(schema.get(found.first().expect("one label")).expect("label exists")),
        _ => Err(Error::AmbiguousResponse {
            candidates: found.into_iter().map(str::to_string).collect(),
        }),
    }
}

fn structured_label(raw: &str) -> Option<String> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    if end <= start {
        return None;
    }
    let value: serde_json::Value = serde_json::from_str(&raw[start..=end]).ok()?;
    value.get("label")?.as_str().map(str::to_string)
}

fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    let boundary = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric());
    haystack.match_indices(phrase).any(|(pos, m)| {
        boundary(haystack[..pos].chars().next_back()) && boundary(haystack[pos + m.len()..].chars().next())
    })
}
