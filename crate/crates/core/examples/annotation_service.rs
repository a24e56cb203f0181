//! Runs the annotation backend for a small campaign.
//!
//! ```text
//! cargo run --example annotation_service
//! curl -H 'Authorization: Bearer tok-ana' 'http://127.0.0.1:8080/api/task?annotator=ana&round=1'
//! curl -H 'Authorization: Bearer tok-ana' -H 'content-type: application/json' \
//!      -d '{"doc_id":"n1","annotator":"ana","round":1,"label":"sport"}' http://127.0.0.1:8080/api/label
//! curl -H 'Authorization: Bearer tok-ana' http://127.0.0.1:8080/api/export
//! ```
//!
//! Pass `--once` to label every task in-process and exit instead.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use mediatopic::corpus::Document;
use mediatopic::schema::LabelSchema;
use mediatopic::service::{serve, Campaign, CampaignConfig};

#[tokio::main]
async fn main() -> mediatopic::Result<()> {
    let docs = vec![
        Document::new("n1", "sl", "News", "Košarkarji so osvojili zlato."),
        Document::new("n2", "hr", "News", "Inflacija je pala na tri posto."),
        Document::new("n3", "el", "News", "Σεισμός 5 Ρίχτερ στην Κρήτη."),
    ];
    let annotators = BTreeMap::from([("ana".to_string(), "tok-ana".to_string())]);
    let mut config = CampaignConfig::new(docs.iter().map(|d| d.id.clone()).collect(), annotators);
    config.rounds = 2;
    let journal = std::env::temp_dir().join("mediatopic-example-journal.jsonl");
    let mut campaign = Campaign::open(config, docs, LabelSchema::builtin(), Some(&journal))?;

    if std::env::args().any(|a| a == "--once") {
        while let Some(task) = campaign.next_task("ana", 1)? {
            campaign.submit_label(&task.doc_id, "ana", 1, "sport")?;
        }
        println!("{:?}", campaign.progress("ana", 1)?);
        print!("{}", campaign.export_jsonl());
        return Ok(());
    }
    println!("journal: {}", journal.display());
    serve("127.0.0.1:8080".parse().unwrap(), Arc::new(Mutex::new(campaign)), None).await
}
