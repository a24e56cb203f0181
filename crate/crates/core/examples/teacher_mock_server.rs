//! Annotates documents against a local mock of the chat completions API,
//! with a flaky start to show retries and a second pass served from cache.
//!
//! The same client talks to the real endpoint when `base_url` and the key
//! variable point there.

use std::time::Duration;

use mediatopic::corpus::Document;
use mediatopic::schema::LabelSchema;
use mediatopic::teacher::mock_server::{keyword_responder, MockServer, MockServerConfig};
use mediatopic::teacher::{RetryPolicy, TeacherClient, TeacherConfig};

#[tokio::main]
async fn main() -> mediatopic::Result<()> {
    let schema = LabelSchema::builtin();
    let server = MockServer::start(
        keyword_responder(schema.clone(), 0),
        MockServerConfig {
            delay: Duration::from_millis(20),
            fail_first: 2,
            ..MockServerConfig::default()
        },
    )
    .await?;
    std::env::set_var("MOCK_TEACHER_KEY", "local");
    let config = TeacherConfig {
        base_url: server.base_url(),
        api_key_env: "MOCK_TEACHER_KEY".into(),
        iterations: 2,
        max_concurrency: 4,
        retry: RetryPolicy {
            max_attempts: 4,
            backoff_ms: vec![50, 100],
        },
        ..TeacherConfig::default()
    };
    let client = TeacherClient::new(config, schema)?;
    let docs = vec![
        Document::new("a", "sl", "News", "Olimpija je zmagala kw_sport"),
        Document::new("b", "hr", "News", "Sabor je izglasao zakon kw_politics"),
        Document::new("c", "ca", "News", "Tempesta al litoral kw_weather"),
    ];

    let first = client.annotate_batch(&docs).await;
    for a in &first.annotations {
        println!("{} it{} -> {} ({} ms)", a.doc_id, a.iteration, a.label, a.latency_ms);
    }
    println!("ledger: {:?}", first.ledger);

    let second = client.annotate_batch(&docs).await;
    println!(
        "second pass: {} cache hits, {} requests; server saw {} in total",
        second.ledger.cache_hits,
        second.ledger.total_requests,
        server.stats().requests()
    );
    server.shutdown().await;
    Ok(())
}
