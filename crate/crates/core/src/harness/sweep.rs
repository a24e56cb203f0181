use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use chrono::Utc;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{ids_digest, ManifestStore, RunKind, RunManifest, RunStatus, SubsetSpec};
use super::trainer::{EpochSchedule, EpochSource, Trainer, TrainerConfig, TrainerJob};
use crate::corpus::LabeledDoc;
use crate::evaluation::{aggregate, per_language_report, AggregateScore, AggregatedScores, EvalScores, LabelAxis};
use crate::rng::derive_seed;
use crate::sampler::{monolingual_subset, size_subset};
use crate::schema::LabelSchema;
use crate::{Error, Result};

/// Evaluation-set name for the whole test set.
pub const ALL: &str = "all";
pub const MULTILINGUAL: &str = "multi";
const BUILTIN_REFERENCE: &str = include_str!("../../assets/teacher_reference.json");

/// Teacher scores shown next to student results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub name: String,
    pub eval_set: String,
    pub micro_f1: AggregateScore,
    pub macro_f1: AggregateScore,
}

/// Published teacher scores per language and on the whole test set.
pub fn builtin_reference() -> Vec<ReferenceRow> {
    serde_json::from_str(BUILTIN_REFERENCE).expect("built-in reference file is valid")
}

pub fn load_reference(path: impl AsRef<Path>) -> Result<Vec<ReferenceRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// Teacher scores from gold and teacher labels, one row per evaluation set.
pub fn reference_from_runs(
    name: &str,
    runs: &[BTreeMap<String, EvalScores>],
) -> Result<Vec<ReferenceRow>> {
    let sets: BTreeSet<&String> = runs.iter().flat_map(|r| r.keys()).collect();
    sets.into_iter()
        .map(|set| {
            let scores: Vec<EvalScores> = runs.iter().filter_map(|r| r.get(set).cloned()).collect();
            let agg = aggregate(&scores)?;
            Ok(ReferenceRow {
                name: name.to_string(),
                eval_set: set.clone(),
                micro_f1: agg.micro_f1,
                macro_f1: agg.macro_f1,
            })
        })
        .collect()
}

/// Scores of `pred` against gold labels of `test`, on the whole set and per
/// language.
pub fn score_sets(test: &[LabeledDoc], pred: &[String], axis: &LabelAxis) -> Result<BTreeMap<String, EvalScores>> {
    let gold = test.iter().map(LabeledDoc::label).collect::<Result<Vec<_>>>()?;
    let langs: Vec<&str> = test.iter().map(|d| d.lang.as_str()).collect();
    let report = per_language_report(&gold, pred, &langs, axis)?;
    let mut out = report.per_language;
    out.insert(ALL.to_string(), report.overall);
    Ok(out)
}

struct RunContext<'a> {
    train: &'a [LabeledDoc],
    dev: &'a [LabeledDoc],
    test: &'a [LabeledDoc],
    axis: LabelAxis,
    trainer: &'a dyn Trainer,
    prompt_hash: Option<String>,
    pool_digest: String,
    dev_digest: String,
    test_digest: String,
}

impl<'a> RunContext<'a> {
    fn new(
        train: &'a [LabeledDoc],
        dev: &'a [LabeledDoc],
        test: &'a [LabeledDoc],
        schema: &LabelSchema,
        trainer: &'a dyn Trainer,
        prompt_hash: Option<String>,
    ) -> Result<Self> {
        if test.is_empty() {
            return Err(Error::Empty("test set".into()));
        }
        for d in test {
            d.label()?;
        }
        Ok(Self {
            train,
            dev,
            test,
            axis: LabelAxis::topics(schema),
            trainer,
            prompt_hash,
            pool_digest: ids_digest(train),
            dev_digest: ids_digest(dev),
            test_digest: ids_digest(test),
        })
    }
}

#[derive(Debug, Clone)]
struct RunPlan {
    run_id: String,
    kind: RunKind,
    cell: String,
    iteration: u32,
    size: usize,
    lang: Option<String>,
    subset_seed: u64,
    config: TrainerConfig,
    epochs_source: EpochSource,
}

fn draw_subset(train: &[LabeledDoc], kind: RunKind, size: usize, lang: Option<&str>, seed: u64) -> Result<Vec<LabeledDoc>> {
    match (kind, lang) {
        (RunKind::Mono | RunKind::Cross, Some(lang)) => monolingual_subset(train, lang, size, seed),
        (RunKind::Mono | RunKind::Cross, None) => Err(Error::Config("monolingual run without language".into())),
        _ => size_subset(train, size, seed),
    }
}

fn execute(plan: &RunPlan, ctx: &RunContext<'_>) -> RunManifest {
    let started_at = Utc::now();
    let trainer_seed = derive_seed(plan.subset_seed, &["trainer"]);
    let mut subset_digest = String::new();
    let mut metadata = None;
    let outcome = (|| -> Result<BTreeMap<String, EvalScores>> {
        let subset = draw_subset(ctx.train, plan.kind, plan.size, plan.lang.as_deref(), plan.subset_seed)?;
        subset_digest = ids_digest(&subset);
        let job = TrainerJob {
            train: subset,
            dev: ctx.dev.to_vec(),
            test: ctx.test.iter().map(LabeledDoc::without_label).collect(),
            config: plan.config.clone(),
            seed: trainer_seed,
        };
        let output = ctx.trainer.train_and_predict(&job)?;
        let output_preds = super::trainer::align_predictions(&job.test, output.predictions)?;
        metadata = Some(output.metadata);
        let pred: Vec<String> = output_preds.into_iter().map(|p| p.label).collect();
        score_sets(ctx.test, &pred, &ctx.axis)
    })();
    let (status, scores) = match outcome {
        Ok(scores) => (RunStatus::Completed, scores),
        Err(e) => {
            log::warn!("run {} failed: {e}", plan.run_id);
            (RunStatus::Failed { error: e.to_string() }, BTreeMap::new())
        }
    };
    RunManifest {
        run_id: plan.run_id.clone(),
        kind: plan.kind,
        cell: plan.cell.clone(),
        iteration: plan.iteration,
        subset: SubsetSpec {
            size: plan.size,
            lang: plan.lang.clone(),
            seed: plan.subset_seed,
            ids_digest: subset_digest,
        },
        train_pool_digest: ctx.pool_digest.clone(),
        dev_digest: ctx.dev_digest.clone(),
        test_digest: ctx.test_digest.clone(),
        trainer: plan.config.clone(),
        trainer_id: ctx.trainer.id(),
        trainer_metadata: metadata,
        epochs_source: plan.epochs_source,
        trainer_seed,
        status,
        scores,
        prompt_hash: ctx.prompt_hash.clone(),
        started_at,
        finished_at: Utc::now(),
    }
}

fn run_all(plans: &[RunPlan], ctx: &RunContext<'_>, workers: usize, store: &ManifestStore) -> Result<Vec<RunManifest>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        plans
            .par_iter()
            .map(|p| {
                let m = execute(p, ctx);
                log::info!("run {} {:?}", m.run_id, m.status);
                store.append(m.clone())?;
                Ok(m)
            })
            .collect()
    })
}

/// Re-runs a recorded run from the same inputs. Fails if any input digest
/// differs from the recorded one.
pub fn replay(
    manifest: &RunManifest,
    train: &[LabeledDoc],
    dev: &[LabeledDoc],
    test: &[LabeledDoc],
    schema: &LabelSchema,
    trainer: &dyn Trainer,
) -> Result<RunManifest> {
    let ctx = RunContext::new(train, dev, test, schema, trainer, manifest.prompt_hash.clone())?;
    for (what, recorded, actual) in [
        ("training pool", &manifest.train_pool_digest, &ctx.pool_digest),
        ("dev set", &manifest.dev_digest, &ctx.dev_digest),
        ("test set", &manifest.test_digest, &ctx.test_digest),
    ] {
        if recorded != actual {
            return Err(Error::Config(format!("{what} differs from run {}", manifest.run_id)));
        }
    }
    let plan = RunPlan {
        run_id: manifest.run_id.clone(),
        kind: manifest.kind,
        cell: manifest.cell.clone(),
        iteration: manifest.iteration,
        size: manifest.subset.size,
        lang: manifest.subset.lang.clone(),
        subset_seed: manifest.subset.seed,
        config: manifest.trainer.clone(),
        epochs_source: manifest.epochs_source,
    };
    let rerun = execute(&plan, &ctx);
    if rerun.subset.ids_digest != manifest.subset.ids_digest {
        return Err(Error::Config(format!("subset of run {} could not be redrawn", manifest.run_id)));
    }
    Ok(rerun)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub iterations: u32,
    pub seed: u64,
    /// Reuse one subset per size across iterations.
    pub fixed_subset_seed: bool,
    pub schedule: EpochSchedule,
    pub epochs_override: Option<u32>,
    pub trainer: TrainerConfig,
    /// Parallel runs; 0 means one per core.
    pub workers: usize,
    pub prompt_hash: Option<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1_000, 2_500, 5_000, 10_000, 15_000],
            iterations: 5,
            seed: 0,
            fixed_subset_seed: false,
            schedule: EpochSchedule::default(),
            epochs_override: None,
            trainer: TrainerConfig::default(),
            workers: 0,
            prompt_hash: None,
        }
    }
}

fn plans_for_sweep(config: &SweepConfig, train_len: usize) -> Result<Vec<RunPlan>> {
    if config.sizes.is_empty() {
        return Err(Error::Config("no sweep sizes".into()));
    }
    if config.iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    let mut plans = Vec::new();
    for &size in &config.sizes {
        if size == 0 || size > train_len {
            return Err(Error::Infeasible(format!(
                "sweep size {size} with {train_len} training documents"
            )));
        }
        let (epochs, epochs_source) = config.schedule.resolve(size, config.epochs_override)?;
        let config_for_size = TrainerConfig {
            epochs: Some(epochs),
            ..config.trainer.clone()
        };
        for iteration in 0..config.iterations {
            let tag = size.to_string();
            let subset_seed = if config.fixed_subset_seed {
                derive_seed(config.seed, &["sweep", &tag])
            } else {
                derive_seed(config.seed, &["sweep", &tag, &iteration.to_string()])
            };
            plans.push(RunPlan {
                run_id: format!("sweep-{size:06}-it{iteration}"),
                kind: RunKind::Sweep,
                cell: tag,
                iteration,
                size,
                lang: None,
                subset_seed,
                config: config_for_size.clone(),
                epochs_source,
            });
        }
    }
    Ok(plans)
}

/// Trains on an independently drawn subset for every size and iteration and
/// scores each run on `test`. Failed runs are recorded and skipped in the
/// aggregates.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep(
    train: &[LabeledDoc],
    dev: &[LabeledDoc],
    test: &[LabeledDoc],
    config: &SweepConfig,
    schema: &LabelSchema,
    trainer: &dyn Trainer,
    store: &ManifestStore,
    reference: Vec<ReferenceRow>,
) -> Result<SweepReport> {
    let plans = plans_for_sweep(config, train.len())?;
    let ctx = RunContext::new(train, dev, test, schema, trainer, config.prompt_hash.clone())?;
    let manifests = run_all(&plans, &ctx, config.workers, store)?;
    SweepReport::from_manifests(&manifests, reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub completed: usize,
    pub failed: usize,
    /// No run for this size completed.
    pub incomplete: bool,
    pub scores: Option<AggregatedScores>,
    pub run_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub reference: Vec<ReferenceRow>,
}

impl SweepReport {
    /// Aggregates the sweep manifests by size; other kinds are ignored.
    pub fn from_manifests(manifests: &[RunManifest], reference: Vec<ReferenceRow>) -> Result<Self> {
        let mut by_size: BTreeMap<usize, Vec<&RunManifest>> = BTreeMap::new();
        for m in manifests.iter().filter(|m| m.kind == RunKind::Sweep) {
            by_size.entry(m.subset.size).or_default().push(m);
        }
        let mut rows = Vec::new();
        for (size, mut runs) in by_size {
            runs.sort_by(|a, b| a.run_id.cmp(&b.run_id));
            let done: Vec<EvalScores> = runs
                .iter()
                .filter(|m| m.is_completed())
                .filter_map(|m| m.scores.get(ALL).cloned())
                .collect();
            rows.push(SweepRow {
                size,
                completed: done.len(),
                failed: runs.len() - done.len(),
                incomplete: done.is_empty(),
                scores: if done.is_empty() { None } else { Some(aggregate(&done)?) },
                run_ids: runs.iter().map(|m| m.run_id.clone()).collect(),
            });
        }
        Ok(Self { rows, reference })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>6}  {:<15}  {:<15}", "train size", "runs", "micro-F1", "macro-F1");
        for r in &self.rows {
            let runs = format!("{}/{}", r.completed, r.completed + r.failed);
            match &r.scores {
                Some(s) => {
                    let _ = writeln!(
                        out,
                        "{:<24} {:>6}  {:<15}  {:<15}",
                        r.size,
                        runs,
                        s.micro_f1.to_string(),
                        s.macro_f1.to_string()
                    );
                }
                None => {
                    let _ = writeln!(out, "{:<24} {:>6}  incomplete", r.size, runs);
                }
            }
        }
        for r in self.reference.iter().filter(|r| r.eval_set == ALL) {
            let _ = writeln!(
                out,
                "{:<24} {:>6}  {:<15}  {:<15}",
                format!("{} (reference)", r.name),
                "",
                r.micro_f1.to_string(),
                r.macro_f1.to_string()
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatrixConfig {
    pub langs: Vec<String>,
    /// Training instances per model.
    pub n: usize,
    pub iterations: u32,
    pub seed: u64,
    pub fixed_subset_seed: bool,
    pub schedule: EpochSchedule,
    pub epochs_override: Option<u32>,
    pub trainer: TrainerConfig,
    pub workers: usize,
    pub prompt_hash: Option<String>,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            langs: ["hr", "ca", "sl", "el"].map(String::from).to_vec(),
            n: 5_000,
            iterations: 3,
            seed: 0,
            fixed_subset_seed: false,
            schedule: EpochSchedule::default(),
            epochs_override: None,
            trainer: TrainerConfig::default(),
            workers: 0,
            prompt_hash: None,
        }
    }
}

fn plans_for_matrix(config: &MatrixConfig, train: &[LabeledDoc]) -> Result<Vec<RunPlan>> {
    if config.langs.is_empty() {
        return Err(Error::Config("no languages".into()));
    }
    if config.iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    for lang in &config.langs {
        let available = train.iter().filter(|d| &d.lang == lang).count();
        if available < config.n {
            return Err(Error::InsufficientDocuments {
                lang: lang.clone(),
                available,
                requested: config.n,
            });
        }
    }
    let (epochs, epochs_source) = config.schedule.resolve(config.n, config.epochs_override)?;
    let trainer = TrainerConfig {
        epochs: Some(epochs),
        ..config.trainer.clone()
    };
    let models = config
        .langs
        .iter()
        .map(|l| (RunKind::Mono, l.as_str()))
        .chain([(RunKind::Multi, MULTILINGUAL)]);
    let mut plans = Vec::new();
    for (kind, model) in models {
        for iteration in 0..config.iterations {
            let subset_seed = if config.fixed_subset_seed {
                derive_seed(config.seed, &["matrix", model])
            } else {
                derive_seed(config.seed, &["matrix", model, &iteration.to_string()])
            };
            plans.push(RunPlan {
                run_id: format!("matrix-{model}-it{iteration}"),
                kind,
                cell: model.to_string(),
                iteration,
                size: config.n,
                lang: (kind == RunKind::Mono).then(|| model.to_string()),
                subset_seed,
                config: trainer.clone(),
                epochs_source,
            });
        }
    }
    Ok(plans)
}

/// One model per language plus one multilingual model of the same size,
/// each evaluated on every language of the test set and on all of it.
#[allow(clippy::too_many_arguments)]
pub fn run_crosslingual_matrix(
    train: &[LabeledDoc],
    dev: &[LabeledDoc],
    test: &[LabeledDoc],
    config: &MatrixConfig,
    schema: &LabelSchema,
    trainer: &dyn Trainer,
    store: &ManifestStore,
    reference: Vec<ReferenceRow>,
) -> Result<MatrixReport> {
    let train: Vec<LabeledDoc> = train.iter().filter(|d| config.langs.contains(&d.lang)).cloned().collect();
    let test: Vec<LabeledDoc> = test.iter().filter(|d| config.langs.contains(&d.lang)).cloned().collect();
    let plans = plans_for_matrix(config, &train)?;
    let ctx = RunContext::new(&train, dev, &test, schema, trainer, config.prompt_hash.clone())?;
    let manifests = run_all(&plans, &ctx, config.workers, store)?;
    MatrixReport::from_manifests(&manifests, &config.langs, reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub model: String,
    pub eval_set: String,
    pub macro_f1: Option<AggregateScore>,
    pub micro_f1: Option<AggregateScore>,
    /// Model trained and evaluated on the same language.
    pub diagonal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub models: Vec<String>,
    pub columns: Vec<String>,
    /// `cells[model][column]`.
    pub cells: Vec<Vec<MatrixCell>>,
    pub reference: Vec<ReferenceRow>,
}

impl MatrixReport {
    pub fn from_manifests(manifests: &[RunManifest], langs: &[String], reference: Vec<ReferenceRow>) -> Result<Self> {
        let models: Vec<String> = langs.iter().cloned().chain([MULTILINGUAL.to_string()]).collect();
        let columns: Vec<String> = langs.iter().cloned().chain([ALL.to_string()]).collect();
        let mut cells = Vec::with_capacity(models.len());
        for model in &models {
            let runs: Vec<&RunManifest> = manifests
                .iter()
                .filter(|m| matches!(m.kind, RunKind::Mono | RunKind::Multi) && &m.cell == model && m.is_completed())
                .collect();
            let mut row = Vec::with_capacity(columns.len());
            for column in &columns {
                let scores: Vec<EvalScores> = runs.iter().filter_map(|m| m.scores.get(column).cloned()).collect();
                let agg = if scores.is_empty() { None } else { Some(aggregate(&scores)?) };
                row.push(MatrixCell {
                    model: model.clone(),
                    eval_set: column.clone(),
                    macro_f1: agg.as_ref().map(|a| a.macro_f1),
                    micro_f1: agg.as_ref().map(|a| a.micro_f1),
                    diagonal: model == column,
                });
            }
            cells.push(row);
        }
        Ok(Self {
            models,
            columns,
            cells,
            reference,
        })
    }

    pub fn cell(&self, model: &str, eval_set: &str) -> Option<&MatrixCell> {
        let i = self.models.iter().position(|m| m == model)?;
        let j = self.columns.iter().position(|c| c == eval_set)?;
        Some(&self.cells[i][j])
    }

    /// Macro-F1 table; diagonal cells are marked with `*`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<14}", "model \\ test");
        for c in &self.columns {
            let _ = write!(out, " {c:<16}");
        }
        out.push('\n');
        for (model, row) in self.models.iter().zip(&self.cells) {
            let _ = write!(out, "{model:<14}");
            for cell in row {
                let text = match &cell.macro_f1 {
                    Some(s) if cell.diagonal => format!("{s}*"),
                    Some(s) => s.to_string(),
                    None => "n/a".into(),
                };
                let _ = write!(out, " {text:<16}");
            }
            out.push('\n');
        }
        let names: BTreeSet<&str> = self.reference.iter().map(|r| r.name.as_str()).collect();
        for name in names {
            let _ = write!(out, "{name:<14}");
            for c in &self.columns {
                let text = self
                    .reference
                    .iter()
                    .find(|r| r.name == name && &r.eval_set == c)
                    .map_or("n/a".to_string(), |r| r.macro_f1.to_string());
                let _ = write!(out, " {text:<16}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_reference_rows() {
        let r = builtin_reference();
        assert_eq!(r.len(), 5);
        let all = r.iter().find(|r| r.eval_set == ALL).unwrap();
        assert_eq!(all.micro_f1.to_string(), "0.722 ± 0.002");
        assert_eq!(all.macro_f1.to_string(), "0.731 ± 0.003");
    }

    #[test]
    fn sweep_plans_need_scheduled_sizes() {
        let config = SweepConfig {
            sizes: vec![100],
            ..SweepConfig::default()
        };
        assert!(matches!(plans_for_sweep(&config, 1000), Err(Error::Config(_))));
        let config = SweepConfig {
            sizes: vec![1000],
            iterations: 2,
            ..SweepConfig::default()
        };
        let plans = plans_for_sweep(&config, 1000).unwrap();
        assert_eq!(plans.len(), 2);
        assert_eq!(plans[0].config.epochs, Some(24));
        assert_ne!(plans[0].subset_seed, plans[1].subset_seed);
        assert!(matches!(plans_for_sweep(&config, 999), Err(Error::Infeasible(_))));
        let fixed = SweepConfig {
            fixed_subset_seed: true,
            ..config
        };
        let plans = plans_for_sweep(&fixed, 1000).unwrap();
        assert_eq!(plans[0].subset_seed, plans[1].subset_seed);
    }
}
