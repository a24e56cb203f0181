//! Monolingual and multilingual models evaluated on every language: the
//! cross-lingual matrix. Diagonal cells (train language = test language)
//! are starred in the table.

use mediatopic::harness::{self, ManifestStore, MatrixConfig, MockTrainer, SyntheticSpec};
use mediatopic::schema::LabelSchema;

fn main() -> mediatopic::Result<()> {
    let schema = LabelSchema::builtin();
    let corpus = harness::generate_synthetic(&SyntheticSpec { n_docs: 2000, seed: 9, ..SyntheticSpec::default() }, &schema)?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, doc) in corpus.gold().into_iter().enumerate() {
        if i % 5 == 0 { test.push(doc) } else { train.push(doc) }
    }
    let config = MatrixConfig {
        n: 200,
        iterations: 3,
        epochs_override: Some(1),
        ..MatrixConfig::default()
    };
    let report = harness::run_crosslingual_matrix(
        &train,
        &[],
        &test,
        &config,
        &schema,
        &MockTrainer,
        &ManifestStore::in_memory(),
        harness::builtin_reference(),
    )?;
    println!("{}", report.render());
    if let Some(cell) = report.cell("sl", "hr") {
        println!("sl model on hr test: macro-F1 {:?}", cell.macro_f1.as_ref().map(ToString::to_string));
    }
    Ok(())
}
