//! Training-size sweep with the offline mock trainer. Every run is written
//! to a manifest file; the report is rebuilt from those manifests.
//!
//! Swap `MockTrainer` for a `SubprocessTrainer` to drive a real model.

use mediatopic::harness::{self, ManifestStore, MockTrainer, SweepConfig, SweepReport, SyntheticSpec};
use mediatopic::schema::LabelSchema;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = LabelSchema::builtin();
    let corpus = harness::generate_synthetic(&SyntheticSpec { n_docs: 2400, seed: 3, ..SyntheticSpec::default() }, &schema)?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, doc) in corpus.gold().into_iter().enumerate() {
        if i % 6 == 0 { test.push(doc) } else { train.push(doc) }
    }

    let dir = tempfile::tempdir()?;
    let store = ManifestStore::open(dir.path().join("runs.jsonl"))?;
    let config = SweepConfig {
        sizes: vec![100, 400, 1600],
        iterations: 3,
        epochs_override: Some(1),
        ..SweepConfig::default()
    };
    let report = harness::run_sweep(&train, &[], &test, &config, &schema, &MockTrainer, &store, harness::builtin_reference())?;
    println!("{}", report.render());

    let reloaded = ManifestStore::open(store.path().unwrap())?.manifests();
    assert_eq!(SweepReport::from_manifests(&reloaded, vec![])?.rows, report.rows);
    println!("{} manifests in {}", reloaded.len(), store.path().unwrap().display());
    Ok(())
}
