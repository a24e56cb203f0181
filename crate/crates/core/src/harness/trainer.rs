use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledDoc;
use crate::{jsonl, Error, Result};

pub const DEFAULT_MODEL_ID: &str = "xlm-roberta-large";

/// Hyperparameters handed to a trainer. `epochs` is filled from the
/// [`EpochSchedule`] when a job is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub batch_size: u32,
    pub max_seq_len: u32,
    pub epochs: Option<u32>,
    pub model_id: String,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 8e-6,
            batch_size: 32,
            max_seq_len: 512,
            epochs: None,
            model_id: DEFAULT_MODEL_ID.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochSource {
    Schedule,
    Override,
}

/// Exact-match map from training-set size to epoch count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpochSchedule(BTreeMap<usize, u32>);

impl Default for EpochSchedule {
    fn default() -> Self {
        Self(BTreeMap::from([
            (20_000, 3),
            (15_000, 5),
            (10_000, 9),
            (5_000, 10),
            (2_500, 22),
            (1_000, 24),
        ]))
    }
}

impl EpochSchedule {
    pub fn new(entries: impl IntoIterator<Item = (usize, u32)>) -> Self {
        Self(entries.into_iter().collect())
    }

    pub fn entries(&self) -> &BTreeMap<usize, u32> {
        &self.0
    }

    /// An override wins; otherwise the size must be listed.
    pub fn resolve(&self, size: usize, epochs_override: Option<u32>) -> Result<(u32, EpochSource)> {
        if let Some(e) = epochs_override {
            if e == 0 {
                return Err(Error::Config("epoch override must be at least 1".into()));
            }
            return Ok((e, EpochSource::Override));
        }
        self.0
            .get(&size)
            .map(|&e| (e, EpochSource::Schedule))
            .ok_or_else(|| {
                Error::Config(format!(
                    "no epoch count for training size {size} (scheduled sizes: {:?}); pass an override",
                    self.0.keys().collect::<Vec<_>>()
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerJob {
    pub train: Vec<LabeledDoc>,
    pub dev: Vec<LabeledDoc>,
    /// Labels stripped.
    pub test: Vec<LabeledDoc>,
    pub config: TrainerConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerMetadata {
    pub trainer_id: String,
    pub epochs_run: u32,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerOutput {
    /// One per test document, in test order.
    pub predictions: Vec<Prediction>,
    pub metadata: TrainerMetadata,
}

pub trait Trainer: Send + Sync {
    fn id(&self) -> String;
    fn train_and_predict(&self, job: &TrainerJob) -> Result<TrainerOutput>;
}

/// Checks that predictions cover the test ids exactly once and returns them
/// in test order.
pub fn align_predictions(test: &[LabeledDoc], predictions: Vec<Prediction>) -> Result<Vec<Prediction>> {
    let mut by_id: BTreeMap<String, String> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(p.id.clone(), p.label).is_some() {
            return Err(Error::Trainer(format!("duplicate prediction for {}", p.id)));
        }
    }
    let missing: Vec<&str> = test
        .iter()
        .filter(|d| !by_id.contains_key(&d.id))
        .map(|d| d.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Trainer(format!(
            "{} test ids without prediction: {:?}",
            missing.len(),
            &missing[..missing.len().min(10)]
        )));
    }
    let known: HashSet<&str> = test.iter().map(|d| d.id.as_str()).collect();
    if let Some(extra) = by_id.keys().find(|id| !known.contains(id.as_str())) {
        return Err(Error::Trainer(format!("prediction for unknown id {extra}")));
    }
    Ok(test
        .iter()
        .map(|d| Prediction {
            id: d.id.clone(),
            label: by_id.remove(&d.id).expect("checked above"),
        })
        .collect())
}

/// The config file of the trainer contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractConfig {
    #[serde(flatten)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub seed: u64,
}

/// File locations of one contract invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractPaths {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    pub config: PathBuf,
    pub out: PathBuf,
}

impl ContractPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            train: dir.join("train.jsonl"),
            dev: dir.join("dev.jsonl"),
            test: dir.join("test.jsonl"),
            config: dir.join("config.json"),
            out: dir.join("out"),
        }
    }

    pub fn predictions(&self) -> PathBuf {
        self.out.join("predictions.jsonl")
    }

    pub fn metadata(&self) -> PathBuf {
        self.out.join("metadata.json")
    }

    /// The contract's argument list.
    pub fn args(&self) -> Vec<std::ffi::OsString> {
        let mut args = Vec::new();
        for (flag, path) in [
            ("--train", &self.train),
            ("--dev", &self.dev),
            ("--test", &self.test),
            ("--config", &self.config),
            ("--out", &self.out),
        ] {
            args.push(flag.into());
            args.push(path.clone().into_os_string());
        }
        args
    }

    pub fn write_job(&self, job: &TrainerJob) -> Result<()> {
        jsonl::write(&self.train, &job.train)?;
        jsonl::write(&self.dev, &job.dev)?;
        jsonl::write(&self.test, &job.test)?;
        let config = ContractConfig {
            trainer: job.config.clone(),
            seed: job.seed,
        };
        let text = serde_json::to_string_pretty(&config).map_err(|e| Error::json("trainer config", e))?;
        std::fs::write(&self.config, text).map_err(|e| Error::io(&self.config, e))
    }

    pub fn read_job(&self) -> Result<TrainerJob> {
        let text = std::fs::read_to_string(&self.config).map_err(|e| Error::io(&self.config, e))?;
        let config: ContractConfig =
            serde_json::from_str(&text).map_err(|e| Error::json(self.config.display().to_string(), e))?;
        Ok(TrainerJob {
            train: jsonl::read(&self.train)?,
            dev: jsonl::read(&self.dev)?,
            test: jsonl::read(&self.test)?,
            config: config.trainer,
            seed: config.seed,
        })
    }

    pub fn write_output(&self, output: &TrainerOutput) -> Result<()> {
        jsonl::write(self.predictions(), &output.predictions)?;
        let path = self.metadata();
        let text =
            serde_json::to_string_pretty(&output.metadata).map_err(|e| Error::json("trainer metadata", e))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read_output(&self) -> Result<TrainerOutput> {
        let path = self.metadata();
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(TrainerOutput {
            predictions: jsonl::read(self.predictions())?,
            metadata: serde_json::from_str(&text).map_err(|e| Error::json("trainer metadata", e))?,
        })
    }
}

/// The callee side of the contract: reads the job files, runs `trainer`
/// and writes predictions plus metadata.
pub fn run_contract(paths: &ContractPaths, trainer: &dyn Trainer) -> Result<TrainerOutput> {
    let job = paths.read_job()?;
    let output = trainer.train_and_predict(&job)?;
    paths.write_output(&output)?;
    Ok(output)
}

/// Any external program honoring the trainer contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubprocessTrainer {
    pub program: PathBuf,
    /// Arguments placed before the contract paths.
    pub args: Vec<String>,
}

impl SubprocessTrainer {
    pub fn new(program: impl Into<PathBuf>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl Trainer for SubprocessTrainer {
    fn id(&self) -> String {
        let mut id = self.program.display().to_string();
        for a in &self.args {
            id.push(' ');
            id.push_str(a);
        }
        id
    }

    fn train_and_predict(&self, job: &TrainerJob) -> Result<TrainerOutput> {
        let dir = tempfile::tempdir().map_err(|e| Error::io("<tempdir>", e))?;
        let paths = ContractPaths::in_dir(dir.path());
        paths.write_job(job)?;
        let started = Instant::now();
        let output = Command::new(&self.program)
            .args(&self.args)
            .args(paths.args())
            .output()
            .map_err(|e| Error::io(&self.program, e))?;
        if !output.status.success() {
            return Err(Error::Trainer(format!(
                "{} exited with {}: {}",
                self.id(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        log::debug!("{} finished in {:?}", self.id(), started.elapsed());
        let mut result = paths.read_output()?;
        result.predictions = align_predictions(&job.test, result.predictions)?;
        Ok(result)
    }
}
