//! Builds a balanced test set from a gold pool, then drops discard labels
//! and reports the exclusion rate.

use mediatopic::corpus::LabeledDoc;
use mediatopic::harness::{self, SyntheticSpec};
use mediatopic::sampler::{apply_exclusions, balanced_test_selection, BalanceSpec};
use mediatopic::schema::{LabelSchema, DO_NOT_KNOW, MULTIPLE};

fn main() -> mediatopic::Result<()> {
    let schema = LabelSchema::builtin();
    let corpus = harness::generate_synthetic(&SyntheticSpec { n_docs: 3000, ..SyntheticSpec::default() }, &schema)?;
    let sample = balanced_test_selection(&corpus.gold(), &BalanceSpec { per_cell: 10, seed: 1 })?;
    println!("selected {} documents", sample.docs.len());
    for (cell, n) in sample.manifest.counts.iter().take(5) {
        println!("  {cell}: {n:?}");
    }

    // Human annotators may answer with a discard label instead of a topic.
    let annotated: Vec<LabeledDoc> = sample
        .docs
        .iter()
        .enumerate()
        .map(|(i, d)| match i % 25 {
            0 => LabeledDoc { label: Some(DO_NOT_KNOW.into()), ..d.clone() },
            1 => LabeledDoc { label: Some(MULTIPLE.into()), ..d.clone() },
            _ => d.clone(),
        })
        .collect();
    let (kept, report) = apply_exclusions(&annotated, &schema)?;
    println!("{} documents kept\n{}", kept.len(), report.render());
    Ok(())
}
