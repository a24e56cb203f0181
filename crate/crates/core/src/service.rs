//! Backend for a manual annotation campaign.
//!
//! [`Campaign`] holds the campaign state and all rules; [`router`] exposes it
//! over HTTP:
//!
//! | method | path | purpose |
//! |---|---|---|
//! | GET  | `/api/task?annotator=&round=` | next unlabeled document (204 when done) |
//! | POST | `/api/label` | `{doc_id, annotator, round, label}` |
//! | GET  | `/api/progress?annotator=&round=` | done / total / per-label counts |
//! | GET  | `/api/guidelines` | rendered annotation guidelines |
//! | GET  | `/api/export` | every record as JSONL |
//!
//! Requests authenticate with `Authorization: Bearer <token>` (or
//! `X-Annotator-Token`), using the annotator's own token or the campaign's
//! shared secret. Judgments go to an append-only journal that is synced to
//! disk before the request is acknowledged; the latest judgment for a
//! (document, annotator, round) wins.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::rng::{derive_seed, seeded};
use crate::schema::{render_guidelines, LabelSchema};
use crate::{jsonl, Error, Result};

/// One judgment: a label given to a document by an annotator in a round
/// (1 = initial annotation, 2 = re-annotation).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub doc_id: String,
    pub annotator_id: String,
    pub round: u32,
    pub label: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// Round-1 task set, as document ids.
    pub tasks: Vec<String>,
    /// Round-2 task set; must be a subset of `tasks`. Defaults to `tasks`.
    #[serde(default)]
    pub round2_tasks: Option<Vec<String>>,
    /// Annotator id → access token.
    pub annotators: BTreeMap<String, String>,
    #[serde(default)]
    pub shared_secret: Option<String>,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    /// Hide an annotator's own round-1 label when serving round 2.
    #[serde(default = "default_blind")]
    pub blind: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_rounds() -> u32 {
    1
}

fn default_blind() -> bool {
    true
}

impl CampaignConfig {
    pub fn new(tasks: Vec<String>, annotators: BTreeMap<String, String>) -> Self {
        Self {
            tasks,
            round2_tasks: None,
            annotators,
            shared_secret: None,
            rounds: default_rounds(),
            blind: default_blind(),
            seed: 0,
        }
    }

    fn tasks_for(&self, round: u32) -> &[String] {
        match (round, &self.round2_tasks) {
            (2, Some(r2)) => r2,
            _ => &self.tasks,
        }
    }
}

/// What an annotator sees. Never carries teacher or other annotators' labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub doc_id: String,
    pub body: String,
    pub lang: String,
    pub round: u32,
    /// The annotator's own earlier label; only set in non-blind round 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub annotator: String,
    pub round: u32,
    pub done: usize,
    pub total: usize,
    pub per_label: BTreeMap<String, usize>,
}

/// One journal line. `replaces` is set when the entry overrides an earlier
/// judgment for the same key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub record: AnnotationRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaces: Option<String>,
}

type Key = (String, String, u32);

#[derive(Debug)]
pub struct Campaign {
    config: CampaignConfig,
    schema: LabelSchema,
    docs: HashMap<String, Document>,
    orders: HashMap<(String, u32), Vec<String>>,
    records: BTreeMap<Key, AnnotationRecord>,
    journal: Vec<JournalEntry>,
    journal_file: Option<File>,
}

impl Campaign {
    /// Creates a campaign, replaying `journal_path` if it already exists.
    pub fn open(
        config: CampaignConfig,
        docs: Vec<Document>,
        schema: LabelSchema,
        journal_path: Option<&Path>,
    ) -> Result<Self> {
        let docs: HashMap<String, Document> = docs.into_iter().map(|d| (d.id.clone(), d)).collect();
        for id in &config.tasks {
            if !docs.contains_key(id) {
                return Err(Error::Config(format!("task {id:?} has no document")));
            }
        }
        if config.rounds == 0 {
            return Err(Error::Config("a campaign needs at least one round".into()));
        }
        if let Some(r2) = &config.round2_tasks {
            let r1: BTreeSet<&String> = config.tasks.iter().collect();
            if let Some(extra) = r2.iter().find(|id| !r1.contains(id)) {
                return Err(Error::Config(format!(
                    "round-2 task {extra:?} is not a round-1 task"
                )));
            }
        }
        let mut orders = HashMap::new();
        for annotator in config.annotators.keys() {
            for round in 1..=config.rounds {
                let mut order = config.tasks_for(round).to_vec();
                let seed = derive_seed(config.seed, &[annotator, &round.to_string()]);
                order.shuffle(&mut seeded(seed));
                orders.insert((annotator.clone(), round), order);
            }
        }
        let mut campaign = Self {
            config,
            schema,
            docs,
            orders,
            records: BTreeMap::new(),
            journal: Vec::new(),
            journal_file: None,
        };
        if let Some(path) = journal_path {
            if path.exists() {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                let entries: Vec<JournalEntry> =
                    jsonl::read_from(BufReader::new(file), &path.display().to_string())?;
                for entry in entries {
                    campaign.materialize(entry);
                }
            }
            campaign.journal_file = Some(jsonl::open_append(path)?);
        }
        Ok(campaign)
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    fn materialize(&mut self, entry: JournalEntry) {
        let r = &entry.record;
        self.records
            .insert((r.doc_id.clone(), r.annotator_id.clone(), r.round), r.clone());
        self.journal.push(entry);
    }

    /// Checks that `token` grants access as `annotator`.
    pub fn authenticate(&self, annotator: &str, token: Option<&str>) -> Result<()> {
        let expected = self
            .config
            .annotators
            .get(annotator)
            .ok_or_else(|| Error::Unauthorized(format!("unknown annotator {annotator:?}")))?;
        match token {
            Some(t) if t == expected => Ok(()),
            Some(t) if self.config.shared_secret.as_deref() == Some(t) => Ok(()),
            _ => Err(Error::Unauthorized(format!("bad token for {annotator:?}"))),
        }
    }

    /// Accepts any roster token or the shared secret.
    pub fn authenticate_any(&self, token: Option<&str>) -> Result<()> {
        let Some(t) = token else {
            return Err(Error::Unauthorized("missing token".into()));
        };
        if self.config.shared_secret.as_deref() == Some(t)
            || self.config.annotators.values().any(|v| v == t)
        {
            Ok(())
        } else {
            Err(Error::Unauthorized("unknown token".into()))
        }
    }

    fn check_round(&self, round: u32) -> Result<()> {
        if round == 0 || round > self.config.rounds {
            return Err(Error::Config(format!(
                "round {round} outside 1..={}",
                self.config.rounds
            )));
        }
        Ok(())
    }

    fn order(&self, annotator: &str, round: u32) -> Result<&[String]> {
        if !self.config.annotators.contains_key(annotator) {
            return Err(Error::Unauthorized(format!("unknown annotator {annotator:?}")));
        }
        self.check_round(round)?;
        Ok(self
            .orders
            .get(&(annotator.to_string(), round))
            .expect("order built for every annotator and round"))
    }

    pub fn next_task(&self, annotator: &str, round: u32) -> Result<Option<Task>> {
        let order = self.order(annotator, round)?;
        let next = order.iter().find(|id| {
            !self
                .records
                .contains_key(&((*id).clone(), annotator.to_string(), round))
        });
        Ok(next.map(|id| {
            let doc = &self.docs[id];
            let previous_label = if round > 1 && !self.config.blind {
                self.records
                    .get(&(id.clone(), annotator.to_string(), 1))
                    .map(|r| r.label.clone())
            } else {
                None
            };
            Task {
                doc_id: id.clone(),
                body: doc.body.clone(),
                lang: doc.lang.clone(),
                round,
                previous_label,
            }
        }))
    }

    pub fn submit_label(
        &mut self,
        doc_id: &str,
        annotator: &str,
        round: u32,
        raw_label: &str,
    ) -> Result<AnnotationRecord> {
        let order = self.order(annotator, round)?;
        if !order.iter().any(|id| id == doc_id) {
            return Err(Error::NotFound(format!(
                "document {doc_id:?} is not a round-{round} task"
            )));
        }
        let label = self
            .schema
            .canonicalize(raw_label)
            .map_err(|_| Error::InvalidLabel {
                label: raw_label.to_string(),
                options: self.schema.all_ids(),
            })?
            .id
            .clone();
        let record = AnnotationRecord {
            doc_id: doc_id.to_string(),
            annotator_id: annotator.to_string(),
            round,
            label,
            timestamp: Utc::now(),
        };
        let key = (doc_id.to_string(), annotator.to_string(), round);
        let entry = JournalEntry {
            seq: self.journal.len() as u64 + 1,
            record: record.clone(),
            replaces: self.records.get(&key).map(|r| r.label.clone()),
        };
        if let Some(file) = self.journal_file.as_mut() {
            jsonl::append_durable(file, &entry).map_err(|e| Error::io("<journal>", e))?;
        }
        self.materialize(entry);
        Ok(record)
    }

    pub fn progress(&self, annotator: &str, round: u32) -> Result<Progress> {
        let total = self.order(annotator, round)?.len();
        let mut per_label = BTreeMap::new();
        let mut done = 0;
        for r in self
            .records
            .values()
            .filter(|r| r.annotator_id == annotator && r.round == round)
        {
            done += 1;
            *per_label.entry(r.label.clone()).or_default() += 1;
        }
        Ok(Progress {
            annotator: annotator.to_string(),
            round,
            done,
            total,
            per_label,
        })
    }

    /// Current records ordered by (doc_id, annotator_id, round).
    pub fn export_records(&self) -> Vec<AnnotationRecord> {
        self.records.values().cloned().collect()
    }

    pub fn export_jsonl(&self) -> String {
        jsonl::to_string(&self.export_records()).expect("records serialize")
    }

    /// Full journal, including replaced judgments.
    pub fn audit(&self) -> &[JournalEntry] {
        &self.journal
    }
}

pub type SharedCampaign = Arc<Mutex<Campaign>>;

#[derive(Clone)]
struct AppState {
    campaign: SharedCampaign,
    guidelines: Arc<String>,
}

/// HTTP error body: `{"error": "...", "options": [...]}`.
struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::Unauthorized(_) => StatusCode::UNAUTHORIZED,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::InvalidLabel { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Config(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = serde_json::json!({ "error": self.0.to_string() });
        if let Error::InvalidLabel { options, .. } = &self.0 {
            body["options"] = serde_json::json!(options);
        }
        (status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

fn token(headers: &HeaderMap) -> Option<&str> {
    if let Some(v) = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()) {
        return v.strip_prefix("Bearer ").map(str::trim);
    }
    headers.get("x-annotator-token").and_then(|v| v.to_str().ok())
}

#[derive(Deserialize)]
struct TaskQuery {
    annotator: String,
    #[serde(default = "default_rounds")]
    round: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub doc_id: String,
    pub annotator: String,
    #[serde(default = "default_rounds")]
    pub round: u32,
    pub label: String,
}

async fn get_task(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<TaskQuery>,
) -> Result<Response, ApiError> {
    let campaign = state.campaign.lock().expect("campaign lock");
    campaign.authenticate(&q.annotator, token(&headers))?;
    Ok(match campaign.next_task(&q.annotator, q.round)? {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn post_label(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(sub): Json<LabelSubmission>,
) -> Result<Json<AnnotationRecord>, ApiError> {
    let mut campaign = state.campaign.lock().expect("campaign lock");
    campaign.authenticate(&sub.annotator, token(&headers))?;
    Ok(Json(campaign.submit_label(&sub.doc_id, &sub.annotator, sub.round, &sub.label)?))
}

async fn get_progress(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<TaskQuery>,
) -> Result<Json<Progress>, ApiError> {
    let campaign = state.campaign.lock().expect("campaign lock");
    campaign.authenticate(&q.annotator, token(&headers))?;
    Ok(Json(campaign.progress(&q.annotator, q.round)?))
}

async fn get_guidelines(State(state): State<AppState>) -> impl IntoResponse {
    (
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        state.guidelines.as_str().to_owned(),
    )
}

async fn get_export(State(state): State<AppState>, headers: HeaderMap) -> Result<Response, ApiError> {
    let campaign = state.campaign.lock().expect("campaign lock");
    campaign.authenticate_any(token(&headers))?;
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        campaign.export_jsonl(),
    )
        .into_response())
}

/// Builds the HTTP router. When `ui_dir` is given its files are served for
/// every path outside `/api`.
pub fn router(campaign: SharedCampaign, ui_dir: Option<PathBuf>) -> Router {
    let guidelines = {
        let c = campaign.lock().expect("campaign lock");
        Arc::new(render_guidelines(c.schema()))
    };
    let api = Router::new()
        .route("/api/task", get(get_task))
        .route("/api/label", post(post_label))
        .route("/api/progress", get(get_progress))
        .route("/api/guidelines", get(get_guidelines))
        .route("/api/export", get(get_export))
        .with_state(AppState {
            campaign,
            guidelines,
        });
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process is interrupted.
pub async fn serve(addr: SocketAddr, campaign: SharedCampaign, ui_dir: Option<PathBuf>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    log::info!("annotation service listening on http://{}", listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?);
    axum::serve(listener, router(campaign, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(n: usize) -> Vec<Document> {
        (0..n)
            .map(|i| Document::new(format!("d{i}"), if i % 2 == 0 { "sl" } else { "hr" }, "News", format!("body {i}")))
            .collect()
    }

    fn campaign(n: usize, rounds: u32) -> Campaign {
        let mut config = CampaignConfig::new(
            (0..n).map(|i| format!("d{i}")).collect(),
            BTreeMap::from([("ann1".to_string(), "t1".to_string()), ("ann2".to_string(), "t2".to_string())]),
        );
        config.rounds = rounds;
        config.seed = 11;
        Campaign::open(config, docs(n), LabelSchema::builtin(), None).unwrap()
    }

    #[test]
    fn fresh_campaign_serves_first_in_order() {
        let c = campaign(10, 1);
        let task = c.next_task("ann1", 1).unwrap().unwrap();
        assert_eq!(task.doc_id, c.orders[&("ann1".to_string(), 1)][0]);
        assert!(task.previous_label.is_none());
    }

    #[test]
    fn labeling_everything_exhausts_tasks() {
        let mut c = campaign(3, 1);
        while let Some(t) = c.next_task("ann1", 1).unwrap() {
            c.submit_label(&t.doc_id, "ann1", 1, "sport").unwrap();
        }
        assert!(c.next_task("ann1", 1).unwrap().is_none());
        assert!(c.next_task("ann2", 1).unwrap().is_some());
    }

    #[test]
    fn submit_validation() {
        let mut c = campaign(3, 1);
        let rec = c.submit_label("d0", "ann1", 1, "Do not know").unwrap();
        assert_eq!(rec.label, "do not know");
        match c.submit_label("d0", "ann1", 1, "newsy stuff") {
            Err(Error::InvalidLabel { options, .. }) => assert_eq!(options.len(), 20),
            other => panic!("{other:?}"),
        }
        assert!(matches!(c.submit_label("zz", "ann1", 1, "sport"), Err(Error::NotFound(_))));
        assert!(matches!(c.submit_label("d0", "eve", 1, "sport"), Err(Error::Unauthorized(_))));
    }

    #[test]
    fn progress_counts_replacements_once() {
        let mut c = campaign(10, 1);
        assert_eq!(c.progress("ann1", 1).unwrap().done, 0);
        for id in ["d1", "d2", "d3"] {
            c.submit_label(id, "ann1", 1, "sport").unwrap();
        }
        let p = c.progress("ann1", 1).unwrap();
        assert_eq!((p.done, p.total), (3, 10));
        c.submit_label("d1", "ann1", 1, "politics").unwrap();
        let p = c.progress("ann1", 1).unwrap();
        assert_eq!(p.done, 3);
        assert_eq!(p.per_label["politics"], 1);
        assert_eq!(c.audit().len(), 4);
        assert_eq!(c.audit()[3].replaces.as_deref(), Some("sport"));
        assert!(matches!(c.progress("nobody", 1), Err(Error::Unauthorized(_))));
    }

    #[test]
    fn export_is_sorted_and_stable() {
        let mut c = campaign(4, 1);
        assert_eq!(c.export_jsonl(), "");
        c.submit_label("d2", "ann2", 1, "sport").unwrap();
        c.submit_label("d0", "ann1", 1, "health").unwrap();
        c.submit_label("d0", "ann2", 1, "health").unwrap();
        let keys: Vec<(String, String)> = c
            .export_records()
            .into_iter()
            .map(|r| (r.doc_id, r.annotator_id))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("d0".into(), "ann1".into()),
                ("d0".into(), "ann2".into()),
                ("d2".into(), "ann2".into())
            ]
        );
        assert_eq!(c.export_jsonl(), c.export_jsonl());
    }

    #[test]
    fn round_two_is_blind_and_independent_of_round_one() {
        let mut labeled = campaign(6, 2);
        for i in 0..6 {
            labeled.submit_label(&format!("d{i}"), "ann1", 1, "sport").unwrap();
        }
        let redacted = campaign(6, 2);
        let mut served_a = Vec::new();
        let mut served_b = Vec::new();
        let mut a = labeled;
        let mut b = redacted;
        while let Some(t) = a.next_task("ann1", 2).unwrap() {
            let json = serde_json::to_value(&t).unwrap();
            assert!(json.get("previous_label").is_none());
            assert!(!json.to_string().contains("sport"));
            a.submit_label(&t.doc_id, "ann1", 2, "health").unwrap();
            served_a.push(t);
        }
        while let Some(t) = b.next_task("ann1", 2).unwrap() {
            b.submit_label(&t.doc_id, "ann1", 2, "health").unwrap();
            served_b.push(t);
        }
        assert_eq!(served_a, served_b);
    }

    #[test]
    fn non_blind_round_two_shows_own_label() {
        let mut c = campaign(2, 2);
        c.config.blind = false;
        c.submit_label("d0", "ann1", 1, "sport").unwrap();
        c.submit_label("d1", "ann1", 1, "sport").unwrap();
        let t = c.next_task("ann1", 2).unwrap().unwrap();
        assert_eq!(t.previous_label.as_deref(), Some("sport"));
    }

    #[test]
    fn round_two_subset_is_enforced() {
        let mut config = CampaignConfig::new(vec!["d0".into()], BTreeMap::from([("a".into(), "t".into())]));
        config.round2_tasks = Some(vec!["d1".into()]);
        config.rounds = 2;
        assert!(matches!(
            Campaign::open(config, docs(2), LabelSchema::builtin(), None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn journal_replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let config = campaign(4, 1).config.clone();
        {
            let mut c = Campaign::open(config.clone(), docs(4), LabelSchema::builtin(), Some(&path)).unwrap();
            c.submit_label("d1", "ann1", 1, "sport").unwrap();
            c.submit_label("d1", "ann1", 1, "weather").unwrap();
        }
        let c = Campaign::open(config, docs(4), LabelSchema::builtin(), Some(&path)).unwrap();
        assert_eq!(c.export_records().len(), 1);
        assert_eq!(c.export_records()[0].label, "weather");
        assert_eq!(c.audit().len(), 2);
    }

    #[test]
    fn authentication() {
        let mut c = campaign(1, 1);
        assert!(c.authenticate("ann1", Some("t1")).is_ok());
        assert!(c.authenticate("ann1", Some("t2")).is_err());
        assert!(c.authenticate("ann1", None).is_err());
        c.config.shared_secret = Some("s".into());
        assert!(c.authenticate("ann2", Some("s")).is_ok());
        assert!(c.authenticate_any(Some("t2")).is_ok());
        assert!(c.authenticate_any(Some("nope")).is_err());
    }
}
