//! Confusion matrices, micro/macro F1 and aggregation over repeated runs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::schema::LabelSchema;
use crate::{Error, Result};

/// Ordered label axis of a confusion matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAxis(Vec<String>);

impl LabelAxis {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Self(labels.into_iter().map(Into::into).collect())
    }

    /// The schema's topic labels, in schema order.
    pub fn topics(schema: &LabelSchema) -> Self {
        Self(schema.topic_ids())
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.0.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect()
    }
}

/// Rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub axis: LabelAxis,
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl ConfusionMatrix {
    pub fn get(&self, gold: &str, pred: &str) -> u64 {
        let idx = self.axis.index();
        match (idx.get(gold), idx.get(pred)) {
            (Some(&g), Some(&p)) => self.counts[g][p],
            _ => 0,
        }
    }

    pub fn trace(&self) -> u64 {
        (0..self.axis.len()).map(|i| self.counts[i][i]).sum()
    }

    /// CSV with schema-ordered axes: header `gold\predicted,<labels...>`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["gold\\predicted".to_string()];
        header.extend(self.axis.labels().iter().cloned());
        csv.write_record(&header)?;
        for (label, row) in self.axis.labels().iter().zip(&self.counts) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(u64::to_string));
            csv.write_record(&rec)?;
        }
        csv.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn confusion<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    axis: &LabelAxis,
) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::Empty("no instances to evaluate".into()));
    }
    let idx = axis.index();
    let lookup = |l: &str| {
        idx.get(l).copied().ok_or_else(|| Error::InvalidLabel {
            label: l.to_string(),
            options: axis.labels().to_vec(),
        })
    };
    let k = axis.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (g, p) in gold.iter().zip(pred) {
        counts[lookup(g.as_ref())?][lookup(p.as_ref())?] += 1;
    }
    Ok(ConfusionMatrix {
        axis: axis.clone(),
        counts,
        n: gold.len() as u64,
    })
}

/// Which labels enter the macro average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroAveraging {
    /// Labels with at least one gold instance.
    #[default]
    GoldSupported,
    /// Every label on the axis.
    AllLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Per-label scores in axis order.
    pub per_label: IndexMap<String, LabelScores>,
    pub n: u64,
}

impl EvalScores {
    pub fn f1(&self, label: &str) -> Option<f64> {
        self.per_label.get(label).map(|s| s.f1)
    }

    pub fn support(&self, label: &str) -> Option<u64> {
        self.per_label.get(label).map(|s| s.support)
    }
}

pub fn scores(cm: &ConfusionMatrix) -> EvalScores {
    scores_with(cm, MacroAveraging::default())
}

pub fn scores_with(cm: &ConfusionMatrix, averaging: MacroAveraging) -> EvalScores {
    let k = cm.axis.len();
    let mut per_label = IndexMap::with_capacity(k);
    let mut macro_sum = 0.0;
    let mut macro_n = 0usize;
    for (i, label) in cm.axis.labels().iter().enumerate() {
        let tp = cm.counts[i][i] as f64;
        let support: u64 = cm.counts[i].iter().sum();
        let predicted: u64 = (0..k).map(|g| cm.counts[g][i]).sum();
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if support > 0 { tp / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        if averaging == MacroAveraging::AllLabels || support > 0 {
            macro_sum += f1;
            macro_n += 1;
        }
        per_label.insert(
            label.clone(),
            LabelScores {
                precision,
                recall,
                f1,
                support,
            },
        );
    }
    EvalScores {
        micro_f1: cm.trace() as f64 / cm.n as f64,
        macro_f1: if macro_n > 0 { macro_sum / macro_n as f64 } else { 0.0 },
        per_label,
        n: cm.n,
    }
}

/// Shorthand for `scores(&confusion(gold, pred, axis)?)`.
pub fn evaluate<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    axis: &LabelAxis,
) -> Result<EvalScores> {
    Ok(scores(&confusion(gold, pred, axis)?))
}

/// Mean and population standard deviation over `k` runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub mean: f64,
    pub std: f64,
    pub k: usize,
}

impl AggregateScore {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("no runs to aggregate".into()));
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
        Ok(Self {
            mean,
            std: var.sqrt(),
            k: values.len(),
        })
    }
}

impl fmt::Display for AggregateScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedScores {
    pub micro_f1: AggregateScore,
    pub macro_f1: AggregateScore,
    pub per_label_f1: IndexMap<String, AggregateScore>,
}

pub fn aggregate(runs: &[EvalScores]) -> Result<AggregatedScores> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Empty("no runs to aggregate".into()))?;
    let collect = |f: &dyn Fn(&EvalScores) -> f64| -> Result<AggregateScore> {
        AggregateScore::from_values(&runs.iter().map(f).collect::<Vec<_>>())
    };
    let mut per_label_f1 = IndexMap::new();
    for label in first.per_label.keys() {
        per_label_f1.insert(
            label.clone(),
            collect(&|r: &EvalScores| r.f1(label).unwrap_or(0.0))?,
        );
    }
    Ok(AggregatedScores {
        micro_f1: collect(&|r: &EvalScores| r.micro_f1)?,
        macro_f1: collect(&|r: &EvalScores| r.macro_f1)?,
        per_label_f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageReport {
    pub per_language: BTreeMap<String, EvalScores>,
    pub overall: EvalScores,
}

/// Scores per language subset and on the union of all instances.
pub fn per_language_report<G: AsRef<str>, P: AsRef<str>, L: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    langs: &[L],
    axis: &LabelAxis,
) -> Result<LanguageReport> {
    if langs.len() != gold.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            pred: langs.len(),
        });
    }
    let overall = evaluate(gold, pred, axis)?;
    let mut groups: BTreeMap<&str, (Vec<&str>, Vec<&str>)> = BTreeMap::new();
    for ((g, p), l) in gold.iter().zip(pred).zip(langs) {
        let entry = groups.entry(l.as_ref()).or_default();
        entry.0.push(g.as_ref());
        entry.1.push(p.as_ref());
    }
    let mut per_language = BTreeMap::new();
    for (lang, (g, p)) in groups {
        if g.is_empty() {
            log::warn!("language {lang} has no instances; omitted");
            continue;
        }
        per_language.insert(lang.to_string(), evaluate(&g, &p, axis)?);
    }
    Ok(LanguageReport {
        per_language,
        overall,
    })
}
