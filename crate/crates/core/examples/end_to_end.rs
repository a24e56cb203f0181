//! The whole pipeline offline: synthetic corpus, keyword teacher served by
//! the mock API, stratified split, balanced gold test set, size sweep and
//! teacher-vs-gold agreement.

use mediatopic::agreement::{alpha_nominal, AgreementUnit};
use mediatopic::corpus::{filter_news, preprocess, CorpusStats, LabeledDoc, DEFAULT_NEWS_TAG};
use mediatopic::harness::{self, ManifestStore, MockTrainer, SweepConfig, SyntheticSpec};
use mediatopic::sampler::{balanced_test_selection, stratified_split, BalanceSpec, SplitSpec};
use mediatopic::schema::LabelSchema;
use mediatopic::teacher::mock_server::{keyword_responder, MockServer, MockServerConfig};
use mediatopic::teacher::{PromptTemplate, TeacherClient, TeacherConfig};

#[tokio::main]
async fn main() -> mediatopic::Result<()> {
    let schema = LabelSchema::builtin();
    let corpus = harness::generate_synthetic(
        &SyntheticSpec { n_docs: 2400, news_fraction: 0.9, seed: 21, ..SyntheticSpec::default() },
        &schema,
    )?;
    let news: Vec<_> = filter_news(&corpus.docs, DEFAULT_NEWS_TAG).into_iter().cloned().collect();
    let docs = preprocess(&news, 512, &mut CorpusStats::default());
    println!("{} news documents of {}", docs.len(), corpus.docs.len());

    let server = MockServer::start(keyword_responder(schema.clone(), 21), MockServerConfig::default()).await?;
    std::env::set_var("MOCK_TEACHER_KEY", "local");
    let teacher = TeacherClient::new(
        TeacherConfig {
            base_url: server.base_url(),
            api_key_env: "MOCK_TEACHER_KEY".into(),
            iterations: 1,
            ..TeacherConfig::default()
        },
        schema.clone(),
    )?;
    let outcome = teacher.annotate_batch(&docs).await;
    server.shutdown().await;
    println!("teacher: {} labels, {} failures", outcome.annotations.len(), outcome.failures.len());

    let pool: Vec<LabeledDoc> = docs
        .iter()
        .zip(&outcome.annotations)
        .map(|(d, a)| LabeledDoc::from_document(d, Some(a.label.clone())))
        .collect();
    let split = stratified_split(
        &pool,
        &SplitSpec { train_size: 1500, dev_size: 100, stratify_key: Default::default(), seed: 21 },
    )?;
    let used: std::collections::BTreeSet<&str> =
        split.train.iter().chain(&split.dev).map(|d| d.id.as_str()).collect();
    let rest: Vec<_> = docs.iter().filter(|d| !used.contains(d.id.as_str())).collect();
    let test = balanced_test_selection(&corpus.gold_for(rest), &BalanceSpec { per_cell: 4, seed: 21 })?.docs;

    let units: Vec<AgreementUnit> = test
        .iter()
        .filter_map(|d| {
            let teacher = pool.iter().find(|p| p.id == d.id)?.label.clone()?;
            Some(AgreementUnit::new(d.id.clone(), [teacher, d.label.clone()?]))
        })
        .collect();
    println!("teacher vs gold on the test set: alpha {:.3}", alpha_nominal(&units)?.alpha);

    let report = harness::run_sweep(
        &split.train,
        &split.dev,
        &test,
        &SweepConfig {
            sizes: vec![200, 500, 1000, 1500],
            iterations: 3,
            epochs_override: Some(1),
            prompt_hash: Some(PromptTemplate::new(&schema).hash()),
            ..SweepConfig::default()
        },
        &schema,
        &MockTrainer,
        &ManifestStore::in_memory(),
        harness::builtin_reference(),
    )?;
    println!("{}", report.render());
    Ok(())
}
