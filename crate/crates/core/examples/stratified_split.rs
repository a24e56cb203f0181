//! Label-stratified train/dev split of a teacher-labeled pool, and
//! language-balanced training subsets of several sizes.

use mediatopic::harness::{self, mock_teacher, SyntheticSpec};
use mediatopic::corpus::LabeledDoc;
use mediatopic::sampler::{size_subsets, stratified_split, SplitSpec};
use mediatopic::schema::LabelSchema;

fn main() -> mediatopic::Result<()> {
    let schema = LabelSchema::builtin();
    let corpus = harness::generate_synthetic(&SyntheticSpec { n_docs: 1200, ..SyntheticSpec::default() }, &schema)?;
    let pool: Vec<LabeledDoc> = corpus
        .docs
        .iter()
        .map(|d| LabeledDoc::from_document(d, Some(mock_teacher(d, &schema, 0).id.clone())))
        .collect();

    let split = stratified_split(
        &pool,
        &SplitSpec { train_size: 1000, dev_size: 100, stratify_key: Default::default(), seed: 7 },
    )?;
    println!("{}", serde_json::to_string_pretty(&split.manifest).unwrap());

    for subset in size_subsets(&split.train, &[100, 400], 7)? {
        let mut per_lang = std::collections::BTreeMap::new();
        for d in &subset {
            *per_lang.entry(d.lang.as_str()).or_insert(0) += 1;
        }
        println!("subset of {}: {per_lang:?}", subset.len());
    }
    Ok(())
}
