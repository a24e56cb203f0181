//! Nominal Krippendorff's alpha.
//!
//! Judgments are grouped into units (one per document). A unit holding
//! `m >= 2` judgments contributes every ordered pair of distinct judgments
//! to the coincidence matrix with weight `1 / (m - 1)`; units with fewer
//! judgments are skipped, so annotators who skipped a document simply
//! contribute fewer values. From the matrix:
//!
//! ```text
//! D_o = sum_{c != k} o_ck / n
//! D_e = sum_{c != k} n_c * n_k / (n * (n - 1))
//! alpha = 1 - D_o / D_e
//! ```
//!
//! Label-level agreement is computed one-vs-rest: each judgment is reduced
//! to "is `label`" / "is something else" before computing alpha.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::schema::AUXILIARY_LABELS;
use crate::service::AnnotationRecord;
use crate::{Error, Result};

/// Minimum alpha for reliable nominal annotation.
pub const ACCEPTABLE_ALPHA: f64 = 0.667;

/// All judgments recorded for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementUnit {
    pub unit_id: String,
    pub values: Vec<String>,
}

impl AgreementUnit {
    pub fn new<S: Into<String>>(unit_id: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Self {
            unit_id: unit_id.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_pairable(&self) -> bool {
        self.values.len() >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceMatrix {
    /// Value axis, sorted.
    pub labels: Vec<String>,
    /// `o[c][k]`: coincidence weight of the value pair (c, k). Symmetric.
    pub o: Vec<Vec<f64>>,
    /// Row marginals.
    pub n_c: Vec<f64>,
    pub n: f64,
    pub n_units: usize,
}

impl CoincidenceMatrix {
    pub fn get(&self, c: &str, k: &str) -> f64 {
        let i = self.labels.iter().position(|l| l == c);
        let j = self.labels.iter().position(|l| l == k);
        match (i, j) {
            (Some(i), Some(j)) => self.o[i][j],
            _ => 0.0,
        }
    }
}

pub fn coincidence_matrix(units: &[AgreementUnit]) -> Result<CoincidenceMatrix> {
    let pairable: Vec<&AgreementUnit> = units.iter().filter(|u| u.is_pairable()).collect();
    if pairable.is_empty() {
        return Err(Error::InsufficientData(
            "no unit carries two or more judgments".into(),
        ));
    }
    let labels: Vec<String> = pairable
        .iter()
        .flat_map(|u| u.values.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let k = labels.len();
    let mut o = vec![vec![0.0; k]; k];

    for unit in &pairable {
        let m = unit.values.len() as f64;
        let mut counts = vec![0usize; k];
        for v in &unit.values {
            counts[index[v.as_str()]] += 1;
        }
        let present: Vec<usize> = (0..k).filter(|&i| counts[i] > 0).collect();
        for &c in &present {
            for &d in &present {
                // ordered pairs of distinct judgments (positions), not distinct values
                let pairs = if c == d {
                    counts[c] * (counts[c] - 1)
                } else {
                    counts[c] * counts[d]
                };
                o[c][d] += pairs as f64 / (m - 1.0);
            }
        }
    }

    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n = n_c.iter().sum();
    Ok(CoincidenceMatrix {
        labels,
        o,
        n_c,
        n,
        n_units: pairable.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementScore {
    pub alpha: f64,
    pub observed_disagreement: f64,
    pub expected_disagreement: f64,
    pub n_units: usize,
    pub n_values: usize,
    /// Set when every pairable value is identical (D_e = 0); alpha is then 1.
    pub degenerate: bool,
}

impl AgreementScore {
    pub fn is_acceptable(&self) -> bool {
        is_acceptable_alpha(self.alpha)
    }
}

pub fn is_acceptable_alpha(alpha: f64) -> bool {
    alpha >= ACCEPTABLE_ALPHA
}

pub fn alpha_nominal(units: &[AgreementUnit]) -> Result<AgreementScore> {
    let cm = coincidence_matrix(units)?;
    Ok(score_from_matrix(&cm))
}

pub fn score_from_matrix(cm: &CoincidenceMatrix) -> AgreementScore {
    let k = cm.labels.len();
    let n = cm.n;
    let mut off_diag = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                off_diag += cm.o[c][d];
                expected += cm.n_c[c] * cm.n_c[d];
            }
        }
    }
    let d_o = off_diag / n;
    let d_e = expected / (n * (n - 1.0));
    let degenerate = d_e == 0.0;
    let alpha = if degenerate { 1.0 } else { 1.0 - d_o / d_e };
    AgreementScore {
        alpha,
        observed_disagreement: d_o,
        expected_disagreement: d_e,
        n_units: cm.n_units,
        n_values: n.round() as usize,
        degenerate,
    }
}

/// Which judgments enter the alpha computation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementOptions {
    /// Judgments carrying one of these labels are dropped before pairing.
    /// Defaults to the three discard labels.
    pub excluded_labels: BTreeSet<String>,
}

impl Default for AgreementOptions {
    fn default() -> Self {
        Self {
            excluded_labels: AUXILIARY_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl AgreementOptions {
    pub fn keep_all() -> Self {
        Self {
            excluded_labels: BTreeSet::new(),
        }
    }
}

/// Identifies one annotation pass: an annotator in a given round.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rater {
    pub annotator_id: String,
    pub round: u32,
}

impl Rater {
    pub fn new(annotator_id: impl Into<String>, round: u32) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            round,
        }
    }
}

impl std::fmt::Display for Rater {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.round == 1 {
            write!(f, "{}", self.annotator_id)
        } else {
            write!(f, "{} (round {})", self.annotator_id, self.round)
        }
    }
}

/// Builds one unit per document judged by every rater in `raters`.
pub fn units_for_raters(
    records: &[AnnotationRecord],
    raters: &[Rater],
    opts: &AgreementOptions,
) -> Vec<AgreementUnit> {
    let mut by_doc: BTreeMap<&str, BTreeMap<usize, &str>> = BTreeMap::new();
    for r in records {
        if let Some(pos) = raters
            .iter()
            .position(|rt| rt.annotator_id == r.annotator_id && rt.round == r.round)
        {
            by_doc
                .entry(r.doc_id.as_str())
                .or_default()
                .insert(pos, r.label.as_str());
        }
    }
    by_doc
        .into_iter()
        .filter(|(_, vals)| vals.len() == raters.len())
        .map(|(doc, vals)| {
            AgreementUnit::new(
                doc,
                vals.into_values()
                    .filter(|v| !opts.excluded_labels.contains(*v))
                    .map(str::to_string),
            )
        })
        .collect()
}

/// Alpha between two raters over the documents both of them labeled.
pub fn pairwise_alpha(
    records: &[AnnotationRecord],
    a: &Rater,
    b: &Rater,
    opts: &AgreementOptions,
) -> Result<AgreementScore> {
    let units = units_for_raters(records, &[a.clone(), b.clone()], opts);
    if units.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{a} and {b} labeled no document in common"
        )));
    }
    alpha_nominal(&units)
}

/// Alpha between two annotation rounds of the same annotator, treated as
/// two pseudo-annotators.
pub fn intra_annotator_alpha(
    round1: &[AnnotationRecord],
    round2: &[AnnotationRecord],
    opts: &AgreementOptions,
) -> Result<AgreementScore> {
    let first = Rater::new("round-1", 1);
    let second = Rater::new("round-2", 1);
    let relabel = |recs: &[AnnotationRecord], to: &Rater| -> Vec<AnnotationRecord> {
        recs.iter()
            .map(|r| AnnotationRecord {
                annotator_id: to.annotator_id.clone(),
                round: to.round,
                ..r.clone()
            })
            .collect()
    };
    let mut all = relabel(round1, &first);
    all.extend(relabel(round2, &second));
    pairwise_alpha(&all, &first, &second, opts)
}

const REST: &str = "\u{0}rest";

/// One-vs-rest alpha for `label`.
pub fn label_level_alpha(units: &[AgreementUnit], label: &str) -> Result<AgreementScore> {
    let binarized: Vec<AgreementUnit> = units
        .iter()
        .map(|u| {
            AgreementUnit::new(
                u.unit_id.clone(),
                u.values
                    .iter()
                    .map(|v| if v == label { label } else { REST }),
            )
        })
        .collect();
    alpha_nominal(&binarized)
}

/// [`label_level_alpha`] for every label, computed in parallel.
pub fn label_level_alphas(
    units: &[AgreementUnit],
    labels: &[String],
) -> Result<Vec<(String, AgreementScore)>> {
    labels
        .par_iter()
        .map(|l| label_level_alpha(units, l).map(|s| (l.clone(), s)))
        .collect()
}

/// Machine-readable line of an agreement report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRecord {
    pub pair: String,
    pub alpha: f64,
    pub d_o: f64,
    pub d_e: f64,
    pub n_units: usize,
    pub acceptable: bool,
}

impl AgreementRecord {
    pub fn new(pair: impl Into<String>, score: &AgreementScore) -> Self {
        Self {
            pair: pair.into(),
            alpha: score.alpha,
            d_o: score.observed_disagreement,
            d_e: score.expected_disagreement,
            n_units: score.n_units,
            acceptable: score.is_acceptable(),
        }
    }
}

/// Renders records as an aligned text table.
pub fn render_report(records: &[AgreementRecord]) -> String {
    let width = records
        .iter()
        .map(|r| r.pair.chars().count())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  acceptable (alpha >= {ACCEPTABLE_ALPHA})",
        "pair", "alpha", "D_o", "D_e", "units"
    );
    for r in records {
        let _ = writeln!(
            out,
            "{:<width$}  {:>7.3}  {:>7.4}  {:>7.4}  {:>7}  {}",
            r.pair,
            r.alpha,
            r.d_o,
            r.d_e,
            r.n_units,
            if r.acceptable { "yes" } else { "no" }
        );
    }
    out
}

/// Pairwise alpha for every pair of raters, plus label-level detail.
pub fn pairwise_report(
    records: &[AnnotationRecord],
    raters: &[Rater],
    opts: &AgreementOptions,
) -> Vec<AgreementRecord> {
    let mut out = Vec::new();
    for (i, a) in raters.iter().enumerate() {
        for b in &raters[i + 1..] {
            match pairwise_alpha(records, a, b, opts) {
                Ok(score) => out.push(AgreementRecord::new(format!("{a} & {b}"), &score)),
                Err(e) => log::warn!("skipping pair {a} & {b}: {e}"),
            }
        }
    }
    out
}
