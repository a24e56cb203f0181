//! Document ingestion, news filtering and word truncation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{jsonl, Error, Result};

pub const DEFAULT_WORD_LIMIT: usize = 512;
pub const DEFAULT_NEWS_TAG: &str = "News";

/// One news text as it flows through the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub lang: String,
    pub genre: String,
    pub body: String,
    #[serde(skip)]
    pub word_count: usize,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        lang: impl Into<String>,
        genre: impl Into<String>,
        body: impl Into<String>,
    ) -> Self {
        let body = body.into();
        Self {
            id: id.into(),
            lang: lang.into(),
            genre: genre.into(),
            word_count: count_words(&body),
            body,
        }
    }
}

/// A document reduced to what classifiers need, as used in the trainer
/// contract files (`{id, lang, text, label}`). `label` is absent on
/// unlabeled test files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDoc {
    pub id: String,
    pub lang: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl LabeledDoc {
    pub fn new(
        id: impl Into<String>,
        lang: impl Into<String>,
        text: impl Into<String>,
        label: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            lang: lang.into(),
            text: text.into(),
            label: Some(label.into()),
        }
    }

    pub fn from_document(doc: &Document, label: Option<String>) -> Self {
        Self {
            id: doc.id.clone(),
            lang: doc.lang.clone(),
            text: doc.body.clone(),
            label,
        }
    }

    pub fn label(&self) -> Result<&str> {
        self.label
            .as_deref()
            .ok_or_else(|| Error::Unlabeled(self.id.clone()))
    }

    pub fn without_label(&self) -> Self {
        Self {
            label: None,
            ..self.clone()
        }
    }
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Malformed,
    MissingField,
    UnsupportedLanguage,
    DuplicateId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_ingested: usize,
    pub accepted: usize,
    pub per_language: BTreeMap<String, usize>,
    pub per_genre: BTreeMap<String, usize>,
    pub rejected: BTreeMap<RejectReason, usize>,
    pub truncated: usize,
}

impl CorpusStats {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }
}

/// Append-only document store, ordered by ingest sequence.
#[derive(Debug, Clone, Default)]
pub struct DocumentStore {
    docs: Vec<Document>,
    ids: HashSet<String>,
}

impl DocumentStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a document; returns `false` if its id is already present.
    pub fn push(&mut self, doc: Document) -> bool {
        if !self.ids.insert(doc.id.clone()) {
            return false;
        }
        self.docs.push(doc);
        true
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn into_docs(self) -> Vec<Document> {
        self.docs
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut store = Self::new();
        for doc in jsonl::read::<Document>(path)? {
            let doc = Document::new(doc.id, doc.lang, doc.genre, doc.body);
            store.push(doc);
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonl::write(path, &self.docs)
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    lang: Option<String>,
    genre: Option<String>,
    body: Option<String>,
}

/// Ingests JSONL records `{id, lang, genre, body}`. Bad records are logged
/// and counted, never fatal.
pub fn ingest(
    source: impl BufRead,
    langs: &BTreeSet<String>,
) -> Result<(DocumentStore, CorpusStats)> {
    let mut store = DocumentStore::new();
    let mut stats = CorpusStats::default();
    for (idx, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<ingest source>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        stats.total_ingested += 1;
        let reason = match serde_json::from_str::<RawRecord>(&line) {
            Err(e) => {
                log::warn!("record {}: malformed JSON: {e}", idx + 1);
                Some(RejectReason::Malformed)
            }
            Ok(raw) => match (raw.id, raw.lang, raw.genre, raw.body) {
                (Some(id), Some(lang), Some(genre), Some(body)) => {
                    accept(&mut store, &mut stats, langs, Document::new(id, lang, genre, body))
                }
                _ => {
                    log::warn!("record {}: missing one of id, lang, genre, body", idx + 1);
                    Some(RejectReason::MissingField)
                }
            },
        };
        if let Some(reason) = reason {
            *stats.rejected.entry(reason).or_default() += 1;
        }
    }
    Ok((store, stats))
}

/// Ingests already-parsed documents under the same rules as [`ingest`].
pub fn ingest_documents(
    docs: impl IntoIterator<Item = Document>,
    langs: &BTreeSet<String>,
) -> (DocumentStore, CorpusStats) {
    let mut store = DocumentStore::new();
    let mut stats = CorpusStats::default();
    for doc in docs {
        stats.total_ingested += 1;
        if let Some(reason) = accept(&mut store, &mut stats, langs, doc) {
            *stats.rejected.entry(reason).or_default() += 1;
        }
    }
    (store, stats)
}

fn accept(
    store: &mut DocumentStore,
    stats: &mut CorpusStats,
    langs: &BTreeSet<String>,
    doc: Document,
) -> Option<RejectReason> {
    if !langs.contains(&doc.lang) {
        log::warn!("document {}: language {:?} not in {:?}", doc.id, doc.lang, langs);
        return Some(RejectReason::UnsupportedLanguage);
    }
    let (lang, genre, id) = (doc.lang.clone(), doc.genre.clone(), doc.id.clone());
    if !store.push(doc) {
        log::warn!("document {id}: duplicate id");
        return Some(RejectReason::DuplicateId);
    }
    stats.accepted += 1;
    *stats.per_language.entry(lang).or_default() += 1;
    *stats.per_genre.entry(genre).or_default() += 1;
    None
}

/// Keeps documents whose genre equals `news_tag` exactly.
pub fn filter_news<'a>(docs: &'a [Document], news_tag: &str) -> Vec<&'a Document> {
    docs.iter().filter(|d| d.genre == news_tag).collect()
}

/// Keeps the first `limit` whitespace-delimited words, joined by single
/// spaces. Documents at or under the limit pass through untouched.
pub fn truncate_words(doc: &Document, limit: usize) -> Document {
    assert!(limit >= 1, "word limit must be at least 1");
    if doc.word_count <= limit {
        return doc.clone();
    }
    let body = doc
        .body
        .split_whitespace()
        .take(limit)
        .collect::<Vec<_>>()
        .join(" ");
    Document {
        body,
        word_count: limit,
        ..doc.clone()
    }
}

/// Truncates every document, recording how many were cut in `stats`.
pub fn preprocess(docs: &[Document], limit: usize, stats: &mut CorpusStats) -> Vec<Document> {
    docs.iter()
        .map(|d| {
            let t = truncate_words(d, limit);
            if t.word_count < d.word_count {
                stats.truncated += 1;
            }
            t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn langs() -> BTreeSet<String> {
        ["sl", "hr", "el", "ca"].iter().map(|s| s.to_string()).collect()
    }

    fn rec(id: &str, lang: &str, genre: &str) -> String {
        serde_json::json!({"id": id, "lang": lang, "genre": genre, "body": "some words here"})
            .to_string()
    }

    #[test]
    fn ingest_one_per_language() {
        let input = ["sl", "hr", "el", "ca"]
            .iter()
            .enumerate()
            .map(|(i, l)| rec(&i.to_string(), l, "News"))
            .collect::<Vec<_>>()
            .join("\n");
        let (store, stats) = ingest(input.as_bytes(), &langs()).unwrap();
        assert_eq!(store.len(), 4);
        assert_eq!(stats.accepted, 4);
        assert_eq!(stats.per_language.len(), 4);
    }

    #[test]
    fn ingest_rejects_foreign_language_and_duplicates() {
        let input = [
            rec("a", "en", "News"),
            rec("b", "sl", "News"),
            rec("b", "hr", "News"),
            "{\"id\": \"c\", \"lang\": \"sl\"}".to_string(),
            "not json".to_string(),
        ]
        .join("\n");
        let (store, stats) = ingest(input.as_bytes(), &langs()).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(stats.rejected[&RejectReason::UnsupportedLanguage], 1);
        assert_eq!(stats.rejected[&RejectReason::DuplicateId], 1);
        assert_eq!(stats.rejected[&RejectReason::MissingField], 1);
        assert_eq!(stats.rejected[&RejectReason::Malformed], 1);
        assert_eq!(
            stats.per_language.values().sum::<usize>() + stats.rejected_total(),
            stats.total_ingested
        );
        assert_eq!(store.docs()[0].lang, "sl");
    }

    #[test]
    fn filter_news_by_genre() {
        let docs: Vec<Document> = ["News", "Promotion", "News"]
            .iter()
            .enumerate()
            .map(|(i, g)| Document::new(i.to_string(), "sl", *g, "x"))
            .collect();
        assert_eq!(filter_news(&docs, DEFAULT_NEWS_TAG).len(), 2);
        let promo: Vec<Document> = (0..3)
            .map(|i| Document::new(i.to_string(), "sl", "Promotion", "x"))
            .collect();
        assert!(filter_news(&promo, DEFAULT_NEWS_TAG).is_empty());

        // 10-doc fixture, counted directly: 6 News
        let genres = [
            "News", "Opinion/Argumentation", "News", "News", "Promotion", "News", "Legal", "News",
            "Promotion", "News",
        ];
        let expected = genres.iter().filter(|g| **g == "News").count();
        let docs: Vec<Document> = genres
            .iter()
            .enumerate()
            .map(|(i, g)| Document::new(i.to_string(), "hr", *g, "x"))
            .collect();
        assert_eq!(expected, 6);
        assert_eq!(filter_news(&docs, DEFAULT_NEWS_TAG).len(), expected);
    }

    #[test]
    fn truncation_examples() {
        let long: Vec<String> = (0..600).map(|i| format!("w{i}")).collect();
        let doc = Document::new("d", "el", "News", long.join("  \n"));
        let t = truncate_words(&doc, DEFAULT_WORD_LIMIT);
        assert_eq!(t.word_count, 512);
        assert_eq!(t.body, long[..512].join(" "));

        let short = Document::new("s", "el", "News", "ένα  δύο\tτρία τέσσερα πέντε έξι επτά οκτώ εννέα δέκα");
        assert_eq!(truncate_words(&short, 512), short);

        let exact = Document::new("e", "ca", "News", long[..512].join("\n"));
        assert_eq!(truncate_words(&exact, 512).body, exact.body);
    }

    #[test]
    fn preprocess_counts_truncations() {
        let docs = vec![
            Document::new("a", "sl", "News", "one two three"),
            Document::new("b", "sl", "News", "one two"),
        ];
        let mut stats = CorpusStats::default();
        let out = preprocess(&docs, 2, &mut stats);
        assert_eq!(stats.truncated, 1);
        assert_eq!(out[0].body, "one two");
    }

    proptest! {
        #[test]
        fn truncation_is_idempotent_prefix(words in proptest::collection::vec("[a-zα-ω]{1,6}", 0..40),
                                          seps in proptest::collection::vec(prop_oneof![Just(" "), Just("\n"), Just("\t "), Just("\u{a0}")], 40),
                                          limit in 1usize..30) {
            let body: String = words.iter().zip(seps.iter()).map(|(w, s)| format!("{w}{s}")).collect();
            let doc = Document::new("p", "sl", "News", body);
            let once = truncate_words(&doc, limit);
            let twice = truncate_words(&once, limit);
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.word_count <= limit);
            let orig: Vec<&str> = doc.body.split_whitespace().collect();
            let cut: Vec<&str> = once.body.split_whitespace().collect();
            prop_assert_eq!(&orig[..cut.len()], &cut[..]);
        }
    }
}
