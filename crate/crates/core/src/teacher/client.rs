use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::Utc;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::prompt::{parse_label_response, PromptTemplate};
use crate::corpus::Document;
use crate::rng::sha256_hex;
use crate::schema::LabelSchema;
use crate::service::AnnotationRecord;
use crate::{jsonl, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before retry `i` is `backoff_ms[min(i, len - 1)]`.
    pub backoff_ms: Vec<u64>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            backoff_ms: vec![1_000, 2_000, 4_000, 8_000],
        }
    }
}

impl RetryPolicy {
    fn delay(&self, retry: u32) -> Duration {
        match self.backoff_ms.len() {
            0 => Duration::ZERO,
            n => Duration::from_millis(self.backoff_ms[(retry as usize).min(n - 1)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_tokens: 32,
        }
    }
}

/// Per-token prices used to fill the cost ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    pub input_per_million: f64,
    pub output_per_million: f64,
    pub currency: String,
}

impl Default for Pricing {
    fn default() -> Self {
        Self {
            input_per_million: 5.0,
            output_per_million: 15.0,
            currency: "USD".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key_env: String,
    pub max_concurrency: usize,
    pub retry: RetryPolicy,
    pub iterations: u32,
    pub decoding: Decoding,
    pub pricing: Pricing,
    pub request_timeout_secs: u64,
    pub cache_path: Option<PathBuf>,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4o-2024-05-13".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_concurrency: 8,
            retry: RetryPolicy::default(),
            iterations: 3,
            decoding: Decoding::default(),
            pricing: Pricing::default(),
            request_timeout_secs: 60,
            cache_path: None,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_concurrency == 0 {
            return Err(Error::Config("max_concurrency must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(Error::Config("retry.max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherAnnotation {
    pub doc_id: String,
    pub iteration: u32,
    pub label: String,
    pub raw_response: String,
    pub request_cost: f64,
    pub latency_ms: u64,
    pub prompt_hash: String,
    pub model_name: String,
    pub temperature: f64,
    pub cached: bool,
}

impl TeacherAnnotation {
    /// The annotation as a campaign record; the iteration becomes the round.
    pub fn to_record(&self, annotator_id: &str) -> AnnotationRecord {
        AnnotationRecord {
            doc_id: self.doc_id.clone(),
            annotator_id: annotator_id.to_string(),
            round: self.iteration,
            label: self.label.clone(),
            timestamp: Utc::now(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFailure {
    pub doc_id: String,
    pub iteration: u32,
    pub error: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub total_requests: u64,
    pub cache_hits: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub total_cost: f64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutcome {
    /// Ordered by input document order, then iteration.
    pub annotations: Vec<TeacherAnnotation>,
    pub failures: Vec<AnnotationFailure>,
    pub ledger: CostLedger,
}

impl BatchOutcome {
    /// Documents with at least one failed iteration.
    pub fn unannotated_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.failures.iter().map(|f| f.doc_id.clone()).collect();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
struct CacheKey {
    doc_id: String,
    iteration: u32,
    prompt_hash: String,
    model_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub doc_id: String,
    pub iteration: u32,
    pub prompt_hash: String,
    pub model_name: String,
    pub label: String,
    pub raw_response: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl CacheEntry {
    fn key(&self) -> CacheKey {
        CacheKey {
            doc_id: self.doc_id.clone(),
            iteration: self.iteration,
            prompt_hash: self.prompt_hash.clone(),
            model_name: self.model_name.clone(),
        }
    }
}

/// Append-only JSONL cache of successful teacher answers.
#[derive(Debug, Default)]
pub struct AnnotationCache {
    entries: HashMap<CacheKey, CacheEntry>,
    file: Option<File>,
}

impl AnnotationCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for entry in jsonl::read_from::<CacheEntry>(BufReader::new(file), &path.display().to_string())? {
                entries.insert(entry.key(), entry);
            }
        }
        Ok(Self {
            entries,
            file: Some(jsonl::open_append(path)?),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, key: &CacheKey) -> Option<&CacheEntry> {
        self.entries.get(key)
    }

    fn insert(&mut self, entry: CacheEntry) -> Result<()> {
        if let Some(file) = self.file.as_mut() {
            jsonl::append_durable(file, &entry).map_err(|e| Error::io("<teacher cache>", e))?;
        }
        self.entries.insert(entry.key(), entry);
        Ok(())
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
    response_format: ResponseFormat,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ResponseFormat {
    #[serde(rename = "type")]
    kind: &'static str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

enum Attempt {
    Done(String, Usage),
    Retry(String),
    Fatal(String),
}

pub struct TeacherClient {
    config: TeacherConfig,
    schema: LabelSchema,
    template: PromptTemplate,
    http: reqwest::Client,
    api_key: String,
    cache: Mutex<AnnotationCache>,
}

impl TeacherClient {
    /// Fails at startup when the API key variable is unset.
    pub fn new(config: TeacherConfig, schema: LabelSchema) -> Result<Self> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| Error::MissingApiKey(config.api_key_env.clone()))?;
        let cache = match &config.cache_path {
            Some(path) => AnnotationCache::open(path)?,
            None => AnnotationCache::in_memory(),
        };
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| Error::Teacher(e.to_string()))?;
        Ok(Self {
            template: PromptTemplate::new(&schema),
            config,
            schema,
            http,
            api_key,
            cache: Mutex::new(cache),
        })
    }

    pub fn config(&self) -> &TeacherConfig {
        &self.config
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    /// Annotates every document `config.iterations` times. Failures are
    /// recorded per (document, iteration); the batch always completes.
    pub async fn annotate_batch(&self, docs: &[Document]) -> BatchOutcome {
        let started = Instant::now();
        let ledger = Mutex::new(CostLedger::default());
        let jobs: Vec<(usize, &Document, u32)> = docs
            .iter()
            .enumerate()
            .flat_map(|(i, d)| (1..=self.config.iterations).map(move |it| (i, d, it)))
            .collect();
        let mut results: Vec<(usize, u32, std::result::Result<TeacherAnnotation, AnnotationFailure>)> =
            stream::iter(jobs)
                .map(|(i, doc, it)| {
                    let ledger = &ledger;
                    async move { (i, it, self.annotate_one(doc, it, ledger).await) }
                })
                .buffer_unordered(self.config.max_concurrency)
                .collect()
                .await;
        results.sort_by_key(|(i, it, _)| (*i, *it));

        let mut annotations = Vec::new();
        let mut failures = Vec::new();
        for (_, _, r) in results {
            match r {
                Ok(a) => annotations.push(a),
                Err(f) => failures.push(f),
            }
        }
        let mut ledger = ledger.into_inner().expect("ledger lock");
        ledger.wall_time_ms = started.elapsed().as_millis() as u64;
        BatchOutcome {
            annotations,
            failures,
            ledger,
        }
    }

    async fn annotate_one(
        &self,
        doc: &Document,
        iteration: u32,
        ledger: &Mutex<CostLedger>,
    ) -> std::result::Result<TeacherAnnotation, AnnotationFailure> {
        let prompt = self.template.render(&doc.body);
        let prompt_hash = sha256_hex(&prompt);
        let key = CacheKey {
            doc_id: doc.id.clone(),
            iteration,
            prompt_hash: prompt_hash.clone(),
            model_name: self.config.model_name.clone(),
        };
        let annotation = |label: String, raw: String, cost: f64, latency: u64, cached: bool| TeacherAnnotation {
            doc_id: doc.id.clone(),
            iteration,
            label,
            raw_response: raw,
            request_cost: cost,
            latency_ms: latency,
            prompt_hash: prompt_hash.clone(),
            model_name: self.config.model_name.clone(),
            temperature: self.config.decoding.temperature,
            cached,
        };
        let hit = self.cache.lock().expect("cache lock").get(&key).cloned();
        if let Some(entry) = hit {
            ledger.lock().expect("ledger lock").cache_hits += 1;
            return Ok(annotation(entry.label, entry.raw_response, 0.0, 0, true));
        }

        let fail = |error: String, attempts: u32| AnnotationFailure {
            doc_id: doc.id.clone(),
            iteration,
            error,
            attempts,
        };
        let started = Instant::now();
        let mut attempt = 0;
        let (raw, usage) = loop {
            attempt += 1;
            ledger.lock().expect("ledger lock").total_requests += 1;
            match self.send(&prompt).await {
                Attempt::Done(raw, usage) => break (raw, usage),
                Attempt::Fatal(e) => return Err(fail(e, attempt)),
                Attempt::Retry(e) => {
                    if attempt >= self.config.retry.max_attempts {
                        return Err(fail(format!("retries exhausted: {e}"), attempt));
                    }
                    log::debug!("doc {} iteration {iteration}: {e}; retrying", doc.id);
                    tokio::time::sleep(self.config.retry.delay(attempt - 1)).await;
                }
            }
        };
        let latency = started.elapsed().as_millis() as u64;
        let pricing = &self.config.pricing;
        let cost = (usage.prompt_tokens as f64 * pricing.input_per_million
            + usage.completion_tokens as f64 * pricing.output_per_million)
            / 1e6;
        {
            let mut l = ledger.lock().expect("ledger lock");
            l.input_tokens += usage.prompt_tokens;
            l.output_tokens += usage.completion_tokens;
            l.total_cost += cost;
        }
        let label = match parse_label_response(&raw, &self.schema) {
            Ok(l) => l.id.clone(),
            Err(e) => return Err(fail(e.to_string(), attempt)),
        };
        let entry = CacheEntry {
            doc_id: doc.id.clone(),
            iteration,
            prompt_hash: prompt_hash.clone(),
            model_name: self.config.model_name.clone(),
            label: label.clone(),
            raw_response: raw.clone(),
            input_tokens: usage.prompt_tokens,
            output_tokens: usage.completion_tokens,
        };
        if let Err(e) = self.cache.lock().expect("cache lock").insert(entry) {
            log::warn!("could not persist cache entry for {}: {e}", doc.id);
        }
        Ok(annotation(label, raw, cost, latency, false))
    }

    async fn send(&self, prompt: &str) -> Attempt {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = ChatRequest {
            model: &self.config.model_name,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.config.decoding.temperature,
            max_tokens: self.config.decoding.max_output_tokens,
            response_format: ResponseFormat { kind: "json_object" },
        };
        let response = match self
            .http
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .await
        {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !status.is_success() {
            let text = response.text().await.unwrap_or_default();
            return Attempt::Fatal(format!("HTTP {status}: {text}"));
        }
        match response.json::<ChatResponse>().await {
            Ok(parsed) => {
                let content = parsed
                    .choices
                    .into_iter()
                    .next()
                    .and_then(|c| c.message.content)
                    .unwrap_or_default();
                Attempt::Done(content, parsed.usage.unwrap_or_default())
            }
            Err(e) => Attempt::Retry(format!("bad response body: {e}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_schedule_saturates() {
        let p = RetryPolicy {
            max_attempts: 4,
            backoff_ms: vec![10, 20],
        };
        assert_eq!(p.delay(0), Duration::from_millis(10));
        assert_eq!(p.delay(5), Duration::from_millis(20));
        let none = RetryPolicy {
            max_attempts: 1,
            backoff_ms: vec![],
        };
        assert_eq!(none.delay(3), Duration::ZERO);
    }

    #[test]
    fn config_validation_and_missing_key() {
        let mut c = TeacherConfig::default();
        assert!(c.validate().is_ok());
        c.max_concurrency = 0;
        assert!(c.validate().is_err());
        let c = TeacherConfig {
            api_key_env: "MEDIATOPIC_TEST_SURELY_UNSET_KEY".into(),
            ..TeacherConfig::default()
        };
        assert!(matches!(
            TeacherClient::new(c, LabelSchema::builtin()),
            Err(Error::MissingApiKey(_))
        ));
    }
}
