//! Micro/macro F1, a confusion matrix, per-language scores and mean ± std
//! over repeated runs.

use mediatopic::evaluation::{aggregate, confusion, evaluate, per_language_report, LabelAxis};

fn main() -> mediatopic::Result<()> {
    let axis = LabelAxis::new(["politics", "sport", "weather"]);
    let gold = ["politics", "politics", "sport", "weather", "sport", "weather"];
    let pred = ["politics", "sport", "sport", "weather", "sport", "politics"];
    let langs = ["sl", "sl", "hr", "hr", "ca", "ca"];

    let scores = evaluate(&gold, &pred, &axis)?;
    println!("micro-F1 {:.3}  macro-F1 {:.3}", scores.micro_f1, scores.macro_f1);
    for (label, s) in &scores.per_label {
        println!("  {label:<10} p={:.3} r={:.3} f1={:.3} n={}", s.precision, s.recall, s.f1, s.support);
    }

    let cm = confusion(&gold, &pred, &axis)?;
    cm.write_csv(std::io::stdout())?;

    let report = per_language_report(&gold, &pred, &langs, &axis)?;
    for (lang, s) in &report.per_language {
        println!("{lang}: macro-F1 {:.3}", s.macro_f1);
    }

    let runs = [
        scores.clone(),
        evaluate(&gold, &["politics", "politics", "sport", "weather", "sport", "weather"], &axis)?,
        evaluate(&gold, &["sport", "politics", "sport", "weather", "weather", "weather"], &axis)?,
    ];
    let agg = aggregate(&runs)?;
    println!("over {} runs: micro-F1 {}  macro-F1 {}", agg.macro_f1.k, agg.micro_f1, agg.macro_f1);
    Ok(())
}
