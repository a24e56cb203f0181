//! The `mediatopic` command line.
//!
//! Every pipeline stage is a subcommand reading and writing JSONL files.
//! Settings come from an optional TOML file (`--config`) with flags taking
//! precedence. Exit codes: 0 success, 1 pipeline error, 2 usage or
//! configuration error. Logs go to standard error.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::agreement::{
    label_level_alphas, pairwise_report, render_report, units_for_raters, AgreementOptions, AgreementRecord, Rater,
};
use crate::corpus::{self, Document, DocumentStore, LabeledDoc};
use crate::evaluation::{confusion, per_language_report, scores_with, LabelAxis, MacroAveraging};
use crate::harness::{
    self, builtin_reference, load_reference, run_contract, ContractPaths, EpochSchedule, ManifestStore,
    MatrixConfig, MatrixReport, MockTrainer, Prediction, SubprocessTrainer, SweepConfig, SweepReport,
    SyntheticSpec, Trainer, TrainerConfig,
};
use crate::sampler::{self, BalanceSpec, SplitSpec, StratifyKey};
use crate::schema::{load_schema, LabelSchema, SchemaSource};
use crate::service::{self, AnnotationRecord, Campaign, CampaignConfig};
use crate::teacher::{CostLedger, PromptTemplate, TeacherAnnotation, TeacherClient, TeacherConfig};
use crate::{jsonl, Error, Result};

const MOCK_TEACHER_MODEL: &str = "mock-teacher";

#[derive(Debug, Parser)]
#[command(name = "mediatopic", version, about = "News topic annotation and classification pipeline")]
pub struct Cli {
    /// TOML file with pipeline settings; flags override it. Goes before
    /// the subcommand (`mock-train` has its own `--config`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Validate inputs and print the plan without writing anything.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Label file to use instead of the built-in schema.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load raw `{id, lang, genre, body}` records into a document store.
    Ingest(IngestArgs),
    /// Keep documents with the news genre tag.
    FilterNews(FilterArgs),
    /// Truncate documents to their first words.
    Preprocess(PreprocessArgs),
    /// Label documents with the teacher model (or the offline mock).
    TeacherAnnotate(TeacherArgs),
    /// Stratified train/dev split of a labeled pool.
    Split(SplitArgs),
    /// Fixed number of documents per (label, language) cell.
    BalanceTest(BalanceArgs),
    /// Label-stratified, language-balanced training subsets.
    SizeSubsets(SizeSubsetArgs),
    /// Drop documents with discard labels and report the exclusion rate.
    Exclusions(ExclusionArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Krippendorff's alpha between raters.
    Agreement(AgreementArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Training-size sweep.
    Sweep(SweepArgs),
    /// Monolingual, multilingual and cross-lingual model matrix.
    Crossling(CrosslingArgs),
    /// Render report tables from run manifests.
    Report(ReportArgs),
    /// The trainer contract implemented with the mock trainer.
    MockTrain(MockTrainArgs),
    /// Generate a synthetic multilingual corpus with known labels.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Accepted languages, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub langs: Option<Vec<String>>,
    /// Where to write corpus statistics as JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub news_tag: Option<String>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub word_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TeacherArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// One annotation per (document, iteration).
    #[arg(long)]
    pub out: PathBuf,
    /// Labeled pool (`{id, lang, text, label}`) using the first iteration.
    #[arg(long)]
    pub labeled_out: Option<PathBuf>,
    /// Annotations as campaign records, for agreement statistics.
    #[arg(long)]
    pub records_out: Option<PathBuf>,
    /// Use the offline keyword teacher instead of the API.
    #[arg(long)]
    pub mock: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<u32>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_concurrency: Option<usize>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Cost ledger output (JSON).
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub train: usize,
    #[arg(long)]
    pub dev: usize,
    #[arg(long, default_value = "label")]
    pub stratify: StratifyKey,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub per_cell: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SizeSubsetArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExclusionArgs {
    /// Gold-labeled pool, discard labels included.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Documents to annotate.
    #[arg(long)]
    pub docs: PathBuf,
    /// Campaign configuration (JSON).
    #[arg(long)]
    pub campaign: PathBuf,
    #[arg(long)]
    pub journal: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Static annotation UI bundle.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Annotation record files (JSONL); may be repeated.
    #[arg(long, required = true)]
    pub records: Vec<PathBuf>,
    /// Raters as `annotator:round`; defaults to every rater in the records.
    #[arg(long)]
    pub rater: Vec<String>,
    /// Keep discard labels as categories.
    #[arg(long)]
    pub keep_auxiliary: bool,
    /// Add one-vs-rest alpha per topic label.
    #[arg(long)]
    pub label_level: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions `{id, label}`.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// Average macro-F1 over every topic label, not only those in gold.
    #[arg(long)]
    pub all_labels: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainerArgs {
    /// `mock` or the path of a program honoring the trainer contract.
    #[arg(long, default_value = "mock")]
    pub trainer: String,
    /// Extra arguments placed before the contract paths.
    #[arg(long, allow_hyphen_values = true)]
    pub trainer_arg: Vec<String>,
    /// Epoch count for every run, bypassing the schedule.
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub manifests: PathBuf,
    /// Teacher reference scores (JSON); defaults to the built-in rows.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Prompt hash of the teacher labels, recorded in manifests.
    #[arg(long)]
    pub prompt_hash: Option<String>,
    /// Write the report as JSON.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub iterations: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reuse one subset per size across iterations.
    #[arg(long)]
    pub fixed_subset: bool,
    #[command(flatten)]
    pub trainer: TrainerArgs,
}

#[derive(Debug, Args)]
pub struct CrosslingArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub langs: Option<Vec<String>>,
    /// Training instances per model.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub iterations: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub fixed_subset: bool,
    #[command(flatten)]
    pub trainer: TrainerArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub manifests: PathBuf,
    /// Languages of the matrix columns.
    #[arg(long, value_delimiter = ',')]
    pub langs: Option<Vec<String>>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockTrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_docs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub langs: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of documents tagged as news.
    #[arg(long)]
    pub news_fraction: Option<f64>,
    /// Writes `docs.jsonl` and `gold.jsonl`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Settings file. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub langs: Option<Vec<String>>,
    pub news_tag: Option<String>,
    pub word_limit: Option<usize>,
    pub per_cell: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub iterations: Option<u32>,
    pub workers: Option<usize>,
    pub teacher: Option<TeacherConfig>,
    pub trainer: Option<TrainerConfig>,
    /// Training size (as a string key) to epochs.
    pub epoch_schedule: Option<BTreeMap<String, u32>>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn schedule(&self) -> Result<EpochSchedule> {
        match &self.epoch_schedule {
            None => Ok(EpochSchedule::default()),
            Some(map) => map
                .iter()
                .map(|(k, &v)| {
                    k.parse::<usize>()
                        .map(|size| (size, v))
                        .map_err(|_| Error::Config(format!("epoch_schedule key {k:?} is not a size")))
                })
                .collect::<Result<Vec<_>>>()
                .map(EpochSchedule::new),
        }
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    fn langs(&self, flag: Option<Vec<String>>) -> Vec<String> {
        flag.or_else(|| self.langs.clone())
            .unwrap_or_else(|| ["sl", "hr", "el", "ca"].map(String::from).to_vec())
    }
}

struct Ctx {
    config: PipelineConfig,
    dry_run: bool,
    schema: LabelSchema,
}

impl Ctx {
    /// Prints the plan in dry-run mode; returns true when the command
    /// should stop there.
    fn plan(&self, lines: &[String]) -> bool {
        if self.dry_run {
            println!("dry run, nothing written");
            for l in lines {
                println!("  {l}");
            }
        }
        self.dry_run
    }
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist", path.display())))
    }
}

fn load_docs(path: &Path) -> Result<Vec<Document>> {
    Ok(DocumentStore::load(path)?.into_docs())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json("output", e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e @ Error::Config(_)) => {
            log::error!("{e}");
            2
        }
        Err(e) => {
            log::error!("{e}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let schema = match &cli.schema {
        Some(path) => load_schema(SchemaSource::File(path))?,
        None => LabelSchema::builtin(),
    };
    let ctx = Ctx {
        config,
        dry_run: cli.dry_run,
        schema,
    };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::FilterNews(a) => filter_news(&ctx, a),
        Command::Preprocess(a) => preprocess(&ctx, a),
        Command::TeacherAnnotate(a) => teacher_annotate(&ctx, a),
        Command::Split(a) => split(&ctx, a),
        Command::BalanceTest(a) => balance_test(&ctx, a),
        Command::SizeSubsets(a) => size_subsets(&ctx, a),
        Command::Exclusions(a) => exclusions(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
        Command::Agreement(a) => agreement(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Crossling(a) => crossling(&ctx, a),
        Command::Report(a) => report(&ctx, a),
        Command::MockTrain(a) => mock_train(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
    }
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<()> {
    require(&a.input)?;
    let langs: BTreeSet<String> = ctx.config.langs(a.langs).into_iter().collect();
    if ctx.plan(&[
        format!("read {}", a.input.display()),
        format!("accept languages {langs:?}"),
        format!("write {}", a.out.display()),
    ]) {
        return Ok(());
    }
    let file = std::fs::File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let (store, stats) = corpus::ingest(std::io::BufReader::new(file), &langs)?;
    store.save(&a.out)?;
    if let Some(path) = &a.stats {
        write_json(path, &stats)?;
    }
    log::info!(
        "ingested {} of {} records ({} rejected)",
        stats.accepted,
        stats.total_ingested,
        stats.rejected_total()
    );
    Ok(())
}

fn filter_news(ctx: &Ctx, a: FilterArgs) -> Result<()> {
    require(&a.input)?;
    let tag = a
        .news_tag
        .or_else(|| ctx.config.news_tag.clone())
        .unwrap_or_else(|| corpus::DEFAULT_NEWS_TAG.to_string());
    if ctx.plan(&[format!("keep genre {tag:?} from {}", a.input.display()), format!("write {}", a.out.display())]) {
        return Ok(());
    }
    let docs = load_docs(&a.input)?;
    let news: Vec<Document> = corpus::filter_news(&docs, &tag).into_iter().cloned().collect();
    log::info!("{} of {} documents are news", news.len(), docs.len());
    jsonl::write(&a.out, &news)
}

fn preprocess(ctx: &Ctx, a: PreprocessArgs) -> Result<()> {
    require(&a.input)?;
    let limit = a.word_limit.or(ctx.config.word_limit).unwrap_or(corpus::DEFAULT_WORD_LIMIT);
    if limit == 0 {
        return Err(Error::Config("word limit must be at least 1".into()));
    }
    if ctx.plan(&[format!("truncate {} to {limit} words", a.input.display()), format!("write {}", a.out.display())]) {
        return Ok(());
    }
    let docs = load_docs(&a.input)?;
    let mut stats = corpus::CorpusStats::default();
    let out = corpus::preprocess(&docs, limit, &mut stats);
    log::info!("truncated {} of {} documents", stats.truncated, docs.len());
    jsonl::write(&a.out, &out)
}

fn mock_annotations(docs: &[Document], schema: &LabelSchema, seed: u64, iterations: u32) -> Vec<TeacherAnnotation> {
    let template = PromptTemplate::new(schema);
    let mut out = Vec::with_capacity(docs.len() * iterations as usize);
    for doc in docs {
        let prompt_hash = crate::rng::sha256_hex(&template.render(&doc.body));
        let label = harness::mock_teacher(doc, schema, seed);
        for iteration in 1..=iterations {
            out.push(TeacherAnnotation {
                doc_id: doc.id.clone(),
                iteration,
                label: label.id.clone(),
                raw_response: serde_json::json!({ "label": label.id }).to_string(),
                request_cost: 0.0,
                latency_ms: 0,
                prompt_hash: prompt_hash.clone(),
                model_name: MOCK_TEACHER_MODEL.into(),
                temperature: 0.0,
                cached: false,
            });
        }
    }
    out
}

fn teacher_annotate(ctx: &Ctx, a: TeacherArgs) -> Result<()> {
    require(&a.input)?;
    let mut config = ctx.config.teacher.clone().unwrap_or_default();
    if let Some(v) = a.iterations {
        config.iterations = v;
    }
    if let Some(v) = a.base_url {
        config.base_url = v;
    }
    if let Some(v) = a.model {
        config.model_name = v;
    }
    if let Some(v) = a.max_concurrency {
        config.max_concurrency = v;
    }
    if a.cache.is_some() {
        config.cache_path = a.cache;
    }
    config.validate()?;
    let seed = ctx.config.seed(a.seed);
    let template = PromptTemplate::new(&ctx.schema);
    if ctx.plan(&[
        format!("annotate {} with {}", a.input.display(), if a.mock { MOCK_TEACHER_MODEL } else { &config.model_name }),
        format!("iterations {}, prompt {} ({})", config.iterations, template.version(), template.hash()),
        format!("write {}", a.out.display()),
    ]) {
        if !a.mock && std::env::var(&config.api_key_env).is_err() {
            return Err(Error::MissingApiKey(config.api_key_env));
        }
        return Ok(());
    }
    let docs = load_docs(&a.input)?;
    let (annotations, ledger) = if a.mock {
        (mock_annotations(&docs, &ctx.schema, seed, config.iterations), CostLedger::default())
    } else {
        let client = TeacherClient::new(config.clone(), ctx.schema.clone())?;
        let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<tokio runtime>", e))?;
        let outcome = runtime.block_on(client.annotate_batch(&docs));
        for f in &outcome.failures {
            log::warn!("no label for {} iteration {}: {}", f.doc_id, f.iteration, f.error);
        }
        (outcome.annotations, outcome.ledger)
    };
    jsonl::write(&a.out, &annotations)?;
    log::info!(
        "{} annotations, {} requests, {} cache hits, cost {:.4} {}",
        annotations.len(),
        ledger.total_requests,
        ledger.cache_hits,
        ledger.total_cost,
        config.pricing.currency
    );
    if let Some(path) = &a.ledger {
        write_json(path, &ledger)?;
    }
    let first: BTreeMap<&str, &TeacherAnnotation> = annotations
        .iter()
        .filter(|t| t.iteration == 1)
        .map(|t| (t.doc_id.as_str(), t))
        .collect();
    if let Some(path) = &a.labeled_out {
        let labeled: Vec<LabeledDoc> = docs
            .iter()
            .filter_map(|d| first.get(d.id.as_str()).map(|t| LabeledDoc::from_document(d, Some(t.label.clone()))))
            .collect();
        jsonl::write(path, &labeled)?;
    }
    if let Some(path) = &a.records_out {
        let annotator = if a.mock { MOCK_TEACHER_MODEL } else { &config.model_name };
        let records: Vec<AnnotationRecord> = annotations.iter().map(|t| t.to_record(annotator)).collect();
        jsonl::write(path, &records)?;
    }
    Ok(())
}

fn split(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    require(&a.input)?;
    let spec = SplitSpec {
        train_size: a.train,
        dev_size: a.dev,
        stratify_key: a.stratify,
        seed: ctx.config.seed(a.seed),
    };
    let train_path = a.out_dir.join("train.jsonl");
    let dev_path = a.out_dir.join("dev.jsonl");
    if ctx.plan(&[
        format!("split {} into {} train / {} dev by {:?}, seed {}", a.input.display(), spec.train_size, spec.dev_size, spec.stratify_key, spec.seed),
        format!("write {} and {}", train_path.display(), dev_path.display()),
    ]) {
        return Ok(());
    }
    let pool: Vec<LabeledDoc> = jsonl::read(&a.input)?;
    let split = sampler::stratified_split(&pool, &spec)?;
    jsonl::write(&train_path, &split.train)?;
    jsonl::write(&dev_path, &split.dev)?;
    split.manifest.save(a.out_dir.join("split.manifest.json"))
}

fn balance_test(ctx: &Ctx, a: BalanceArgs) -> Result<()> {
    require(&a.input)?;
    let spec = BalanceSpec {
        per_cell: a.per_cell.or(ctx.config.per_cell).unwrap_or(sampler::DEFAULT_PER_CELL),
        seed: ctx.config.seed(a.seed),
    };
    if ctx.plan(&[
        format!("take {} per (label, language) from {}, seed {}", spec.per_cell, a.input.display(), spec.seed),
        format!("write {}", a.out.display()),
    ]) {
        return Ok(());
    }
    let pool: Vec<LabeledDoc> = jsonl::read(&a.input)?;
    let sample = sampler::balanced_test_selection(&pool, &spec)?;
    log::info!("selected {} documents", sample.docs.len());
    sampler::write_with_manifest(&a.out, &sample.docs, &sample.manifest)
}

fn size_subsets(ctx: &Ctx, a: SizeSubsetArgs) -> Result<()> {
    require(&a.input)?;
    let seed = ctx.config.seed(a.seed);
    let paths: Vec<PathBuf> = a.sizes.iter().map(|s| a.out_dir.join(format!("train_{s}.jsonl"))).collect();
    let mut plan = vec![format!("draw sizes {:?} from {}, seed {seed}", a.sizes, a.input.display())];
    plan.extend(paths.iter().map(|p| format!("write {}", p.display())));
    if ctx.plan(&plan) {
        return Ok(());
    }
    let train: Vec<LabeledDoc> = jsonl::read(&a.input)?;
    for ((size, subset), path) in a.sizes.iter().zip(sampler::size_subsets(&train, &a.sizes, seed)?).zip(&paths) {
        let labels: BTreeMap<String, usize> = subset.iter().fold(BTreeMap::new(), |mut m, d| {
            *m.entry(d.label.clone().unwrap_or_default()).or_default() += 1;
            m
        });
        let langs: BTreeMap<String, usize> = subset.iter().fold(BTreeMap::new(), |mut m, d| {
            *m.entry(d.lang.clone()).or_default() += 1;
            m
        });
        let manifest = sampler::SamplingManifest {
            operation: "size_subset".into(),
            seed: crate::rng::derive_seed(seed, &["size", &size.to_string()]),
            spec: serde_json::json!({ "size": size, "base_seed": seed }),
            counts: BTreeMap::from([("label".to_string(), labels), ("lang".to_string(), langs)]),
        };
        sampler::write_with_manifest(path, &subset, &manifest)?;
    }
    Ok(())
}

fn exclusions(ctx: &Ctx, a: ExclusionArgs) -> Result<()> {
    require(&a.input)?;
    if ctx.plan(&[format!("drop discard labels from {}", a.input.display()), format!("write {}", a.out.display())]) {
        return Ok(());
    }
    let gold: Vec<LabeledDoc> = jsonl::read(&a.input)?;
    let (kept, report) = sampler::apply_exclusions(&gold, &ctx.schema)?;
    print!("{}", report.render());
    jsonl::write(&a.out, &kept)
}

fn serve(ctx: &Ctx, a: ServeArgs) -> Result<()> {
    require(&a.docs)?;
    require(&a.campaign)?;
    let text = std::fs::read_to_string(&a.campaign).map_err(|e| Error::io(&a.campaign, e))?;
    let config: CampaignConfig =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", a.campaign.display())))?;
    let docs = load_docs(&a.docs)?;
    let campaign = Campaign::open(config, docs, ctx.schema.clone(), Some(&a.journal))?;
    if ctx.plan(&[
        format!("serve {} tasks on http://{}", campaign.config().tasks.len(), a.addr),
        format!("journal {}", a.journal.display()),
    ]) {
        return Ok(());
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<tokio runtime>", e))?;
    runtime.block_on(service::serve(a.addr, Arc::new(Mutex::new(campaign)), a.ui_dir))
}

fn parse_rater(text: &str) -> Result<Rater> {
    let (id, round) = text
        .rsplit_once(':')
        .ok_or_else(|| Error::Config(format!("rater {text:?} is not annotator:round")))?;
    let round = round
        .parse()
        .map_err(|_| Error::Config(format!("rater {text:?} has a bad round")))?;
    Ok(Rater::new(id, round))
}

#[derive(Serialize)]
struct AgreementOutput {
    pairs: Vec<AgreementRecord>,
    label_level: BTreeMap<String, Vec<AgreementRecord>>,
}

fn agreement(ctx: &Ctx, a: AgreementArgs) -> Result<()> {
    for p in &a.records {
        require(p)?;
    }
    let mut raters = a.rater.iter().map(|r| parse_rater(r)).collect::<Result<Vec<_>>>()?;
    if ctx.plan(&[format!("agreement over {} record files", a.records.len())]) {
        return Ok(());
    }
    let mut records: Vec<AnnotationRecord> = Vec::new();
    for p in &a.records {
        records.extend(jsonl::read::<AnnotationRecord>(p)?);
    }
    if raters.is_empty() {
        let set: BTreeSet<(String, u32)> = records.iter().map(|r| (r.annotator_id.clone(), r.round)).collect();
        raters = set.into_iter().map(|(id, round)| Rater::new(id, round)).collect();
    }
    let opts = if a.keep_auxiliary {
        AgreementOptions::keep_all()
    } else {
        AgreementOptions::default()
    };
    let pairs = pairwise_report(&records, &raters, &opts);
    print!("{}", render_report(&pairs));
    let mut label_level = BTreeMap::new();
    if a.label_level {
        for (i, x) in raters.iter().enumerate() {
            for y in &raters[i + 1..] {
                let units = units_for_raters(&records, &[x.clone(), y.clone()], &opts);
                if units.is_empty() {
                    continue;
                }
                let rows: Vec<AgreementRecord> = label_level_alphas(&units, &ctx.schema.topic_ids())?
                    .into_iter()
                    .map(|(label, s)| AgreementRecord::new(label, &s))
                    .collect();
                println!("\n{x} & {y}, per label:");
                print!("{}", render_report(&rows));
                label_level.insert(format!("{x} & {y}"), rows);
            }
        }
    }
    if let Some(path) = &a.out {
        write_json(path, &AgreementOutput { pairs, label_level })?;
    }
    Ok(())
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> Result<()> {
    require(&a.gold)?;
    require(&a.pred)?;
    if ctx.plan(&[format!("score {} against {}", a.pred.display(), a.gold.display())]) {
        return Ok(());
    }
    let gold: Vec<LabeledDoc> = jsonl::read(&a.gold)?;
    let pred = harness::align_predictions(&gold, jsonl::read::<Prediction>(&a.pred)?)?;
    let g: Vec<&str> = gold.iter().map(LabeledDoc::label).collect::<Result<_>>()?;
    let p: Vec<&str> = pred.iter().map(|x| x.label.as_str()).collect();
    let langs: Vec<&str> = gold.iter().map(|d| d.lang.as_str()).collect();
    let axis = LabelAxis::topics(&ctx.schema);
    let averaging = if a.all_labels {
        MacroAveraging::AllLabels
    } else {
        MacroAveraging::GoldSupported
    };
    let cm = confusion(&g, &p, &axis)?;
    let overall = scores_with(&cm, averaging);
    let report = per_language_report(&g, &p, &langs, &axis)?;
    println!("{:<8} {:>6} {:>9} {:>9}", "set", "n", "micro-F1", "macro-F1");
    for (lang, s) in &report.per_language {
        println!("{lang:<8} {:>6} {:>9.3} {:>9.3}", s.n, s.micro_f1, s.macro_f1);
    }
    println!("{:<8} {:>6} {:>9.3} {:>9.3}", harness::ALL, overall.n, overall.micro_f1, overall.macro_f1);
    if let Some(path) = &a.confusion {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        cm.write_csv(file)?;
    }
    if let Some(path) = &a.out {
        write_json(path, &serde_json::json!({ "overall": overall, "per_language": report.per_language }))?;
    }
    Ok(())
}

fn build_trainer(a: &TrainerArgs) -> Result<Box<dyn Trainer>> {
    if a.trainer == "mock" {
        Ok(Box::new(MockTrainer))
    } else {
        let program = PathBuf::from(&a.trainer);
        require(&program)?;
        Ok(Box::new(SubprocessTrainer::new(program, a.trainer_arg.clone())))
    }
}

/// The mock trainer ignores epochs, so desk-scale sizes outside the
/// schedule default to one epoch instead of failing.
fn epochs_override(a: &TrainerArgs, schedule: &EpochSchedule, sizes: &[usize]) -> Option<u32> {
    a.epochs.or_else(|| {
        (a.trainer == "mock" && sizes.iter().any(|s| !schedule.entries().contains_key(s))).then(|| {
            log::info!("mock trainer: sizes outside the epoch schedule run with --epochs 1");
            1
        })
    })
}

fn reference(path: &Option<PathBuf>) -> Result<Vec<harness::ReferenceRow>> {
    match path {
        Some(p) => load_reference(p),
        None => Ok(builtin_reference()),
    }
}

fn read_optional(path: &Option<PathBuf>) -> Result<Vec<LabeledDoc>> {
    match path {
        Some(p) => jsonl::read(p),
        None => Ok(Vec::new()),
    }
}

fn sweep(ctx: &Ctx, a: SweepArgs) -> Result<()> {
    require(&a.train)?;
    require(&a.test)?;
    let schedule = ctx.config.schedule()?;
    let sizes = a.sizes.or_else(|| ctx.config.sizes.clone()).unwrap_or_else(|| SweepConfig::default().sizes);
    let config = SweepConfig {
        epochs_override: epochs_override(&a.trainer, &schedule, &sizes),
        sizes,
        iterations: a.iterations.or(ctx.config.iterations).unwrap_or(5),
        seed: ctx.config.seed(a.seed),
        fixed_subset_seed: a.fixed_subset,
        schedule,
        trainer: ctx.config.trainer.clone().unwrap_or_default(),
        workers: a.trainer.workers.or(ctx.config.workers).unwrap_or(0),
        prompt_hash: a.trainer.prompt_hash.clone(),
    };
    for &s in &config.sizes {
        config.schedule.resolve(s, config.epochs_override)?;
    }
    let trainer = build_trainer(&a.trainer)?;
    if ctx.plan(&[
        format!("sizes {:?} x {} iterations, seed {}", config.sizes, config.iterations, config.seed),
        format!("trainer {}", trainer.id()),
        format!("append manifests to {}", a.trainer.manifests.display()),
    ]) {
        return Ok(());
    }
    let train: Vec<LabeledDoc> = jsonl::read(&a.train)?;
    let dev = read_optional(&a.dev)?;
    let test: Vec<LabeledDoc> = jsonl::read(&a.test)?;
    let store = ManifestStore::open(&a.trainer.manifests)?;
    let report = harness::run_sweep(
        &train,
        &dev,
        &test,
        &config,
        &ctx.schema,
        trainer.as_ref(),
        &store,
        reference(&a.trainer.reference)?,
    )?;
    print!("{}", report.render());
    if let Some(path) = &a.trainer.report_out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn crossling(ctx: &Ctx, a: CrosslingArgs) -> Result<()> {
    require(&a.train)?;
    require(&a.test)?;
    let schedule = ctx.config.schedule()?;
    let n = a.n.unwrap_or(5_000);
    let config = MatrixConfig {
        langs: ctx.config.langs(a.langs),
        n,
        iterations: a.iterations.or(ctx.config.iterations).unwrap_or(3),
        seed: ctx.config.seed(a.seed),
        fixed_subset_seed: a.fixed_subset,
        epochs_override: epochs_override(&a.trainer, &schedule, &[n]),
        schedule,
        trainer: ctx.config.trainer.clone().unwrap_or_default(),
        workers: a.trainer.workers.or(ctx.config.workers).unwrap_or(0),
        prompt_hash: a.trainer.prompt_hash.clone(),
    };
    config.schedule.resolve(n, config.epochs_override)?;
    let trainer = build_trainer(&a.trainer)?;
    if ctx.plan(&[
        format!("{} monolingual models and one multilingual model, n = {}, {} iterations", config.langs.len(), n, config.iterations),
        format!("trainer {}", trainer.id()),
        format!("append manifests to {}", a.trainer.manifests.display()),
    ]) {
        return Ok(());
    }
    let train: Vec<LabeledDoc> = jsonl::read(&a.train)?;
    let dev = read_optional(&a.dev)?;
    let test: Vec<LabeledDoc> = jsonl::read(&a.test)?;
    let store = ManifestStore::open(&a.trainer.manifests)?;
    let report = harness::run_crosslingual_matrix(
        &train,
        &dev,
        &test,
        &config,
        &ctx.schema,
        trainer.as_ref(),
        &store,
        reference(&a.trainer.reference)?,
    )?;
    print!("{}", report.render());
    if let Some(path) = &a.trainer.report_out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn report(ctx: &Ctx, a: ReportArgs) -> Result<()> {
    require(&a.manifests)?;
    if ctx.plan(&[format!("render tables from {}", a.manifests.display())]) {
        return Ok(());
    }
    let manifests = ManifestStore::open(&a.manifests)?.manifests();
    let reference = reference(&a.reference)?;
    let sweep = SweepReport::from_manifests(&manifests, reference.clone())?;
    if !sweep.rows.is_empty() {
        print!("{}", sweep.render());
    }
    if manifests.iter().any(|m| matches!(m.kind, harness::RunKind::Mono | harness::RunKind::Multi)) {
        let langs = a.langs.unwrap_or_else(|| {
            manifests
                .iter()
                .filter(|m| m.kind == harness::RunKind::Mono)
                .map(|m| m.cell.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        });
        if !sweep.rows.is_empty() {
            println!();
        }
        print!("{}", MatrixReport::from_manifests(&manifests, &langs, reference)?.render());
    }
    Ok(())
}

fn mock_train(ctx: &Ctx, a: MockTrainArgs) -> Result<()> {
    let paths = ContractPaths {
        train: a.train,
        dev: a.dev,
        test: a.test,
        config: a.config,
        out: a.out,
    };
    for p in [&paths.train, &paths.dev, &paths.test, &paths.config] {
        require(p)?;
    }
    if ctx.dry_run {
        let job = paths.read_job()?;
        println!(
            "dry run: {} train, {} dev, {} test documents; epochs {:?}",
            job.train.len(),
            job.dev.len(),
            job.test.len(),
            job.config.epochs
        );
        return Ok(());
    }
    let output = run_contract(&paths, &MockTrainer)?;
    log::info!("wrote {} predictions to {}", output.predictions.len(), paths.predictions().display());
    Ok(())
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let defaults = SyntheticSpec::default();
    let spec = SyntheticSpec {
        n_docs: a.n_docs.unwrap_or(defaults.n_docs),
        langs: ctx.config.langs(a.langs),
        seed: ctx.config.seed(a.seed),
        news_fraction: a.news_fraction.unwrap_or(defaults.news_fraction),
        ..defaults
    };
    let docs_path = a.out_dir.join("docs.jsonl");
    let gold_path = a.out_dir.join("gold.jsonl");
    if ctx.plan(&[
        format!("{} documents in {:?}, seed {}", spec.n_docs, spec.langs, spec.seed),
        format!("write {} and {}", docs_path.display(), gold_path.display()),
    ]) {
        return Ok(());
    }
    let corpus = harness::generate_synthetic(&spec, &ctx.schema)?;
    jsonl::write(&docs_path, &corpus.docs)?;
    jsonl::write(&gold_path, &corpus.gold())
}
