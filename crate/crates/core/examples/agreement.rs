//! Inter- and intra-annotator agreement with nominal Krippendorff's alpha.

use chrono::Utc;
use mediatopic::agreement::{
    alpha_nominal, intra_annotator_alpha, label_level_alphas, pairwise_report, render_report, units_for_raters,
    AgreementOptions, AgreementUnit, Rater,
};
use mediatopic::service::AnnotationRecord;

fn rec(doc: usize, who: &str, round: u32, label: &str) -> AnnotationRecord {
    AnnotationRecord {
        doc_id: format!("doc-{doc}"),
        annotator_id: who.into(),
        round,
        label: label.into(),
        timestamp: Utc::now(),
    }
}

fn main() -> mediatopic::Result<()> {
    let worked = [
        AgreementUnit::new("1", ["a", "a"]),
        AgreementUnit::new("2", ["a", "b"]),
        AgreementUnit::new("3", ["b", "b"]),
        AgreementUnit::new("4", ["b", "b"]),
    ];
    println!("worked example: alpha = {:.4}", alpha_nominal(&worked)?.alpha);

    let labels = ["politics", "sport", "economy, business and finance", "health"];
    let mut records = Vec::new();
    for doc in 0..40 {
        let truth = labels[doc % 4];
        records.push(rec(doc, "human", 1, truth));
        records.push(rec(doc, "human", 2, if doc % 13 == 0 { "society" } else { truth }));
        records.push(rec(doc, "teacher", 1, if doc % 5 == 0 { "politics" } else { truth }));
        if doc == 7 {
            records.push(rec(doc, "human2", 1, "do not know"));
        }
    }

    let opts = AgreementOptions::default();
    let raters = [Rater::new("human", 1), Rater::new("human", 2), Rater::new("teacher", 1)];
    print!("{}", render_report(&pairwise_report(&records, &raters, &opts)));

    let (r1, r2): (Vec<_>, Vec<_>) = records.iter().filter(|r| r.annotator_id == "human").cloned().partition(|r| r.round == 1);
    println!("intra-annotator alpha {:.3}", intra_annotator_alpha(&r1, &r2, &opts)?.alpha);

    let units = units_for_raters(&records, &[Rater::new("human", 1), Rater::new("teacher", 1)], &opts);
    let ids: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    for (label, score) in label_level_alphas(&units, &ids)? {
        println!("  {label:<32} {:.3}", score.alpha);
    }
    Ok(())
}
