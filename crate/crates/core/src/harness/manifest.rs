use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::trainer::{EpochSource, TrainerConfig, TrainerMetadata};
use crate::corpus::LabeledDoc;
use crate::evaluation::EvalScores;
use crate::rng::sha256_hex;
use crate::{jsonl, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Sweep,
    Mono,
    Multi,
    Cross,
}

/// How the training subset of a run was drawn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub size: usize,
    /// Set for monolingual subsets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    pub seed: u64,
    pub ids_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { error: String },
}

/// Everything needed to re-run one (cell, iteration) and compare scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub kind: RunKind,
    /// Report cell this run belongs to: the size for sweeps, the model name
    /// for the language matrix.
    pub cell: String,
    pub iteration: u32,
    pub subset: SubsetSpec,
    pub train_pool_digest: String,
    pub dev_digest: String,
    pub test_digest: String,
    pub trainer: TrainerConfig,
    pub trainer_id: String,
    /// What the trainer reported about itself; absent when it failed.
    #[serde(default)]
    pub trainer_metadata: Option<TrainerMetadata>,
    pub epochs_source: EpochSource,
    pub trainer_seed: u64,
    pub status: RunStatus,
    /// Evaluation set name (`all` or a language) to scores.
    pub scores: BTreeMap<String, EvalScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunManifest {
    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

/// Order-sensitive digest of document ids and labels.
pub fn ids_digest(docs: &[LabeledDoc]) -> String {
    let mut text = String::new();
    for d in docs {
        text.push_str(&d.id);
        text.push('\t');
        text.push_str(d.label.as_deref().unwrap_or(""));
        text.push('\n');
    }
    sha256_hex(&text)
}

/// Append-only JSONL store; appends from worker threads are serialized.
#[derive(Debug, Default)]
pub struct ManifestStore {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

#[derive(Debug, Default)]
struct Inner {
    manifests: Vec<RunManifest>,
    file: Option<File>,
}

impl ManifestStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `path` for appending, loading manifests already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifests = if path.exists() { jsonl::read(path)? } else { Vec::new() };
        Ok(Self {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(Inner {
                manifests,
                file: Some(jsonl::open_append(path)?),
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, manifest: RunManifest) -> Result<()> {
        let mut inner = self.inner.lock().expect("manifest store lock");
        if let Some(file) = inner.file.as_mut() {
            jsonl::append_durable(file, &manifest)
                .map_err(|e| Error::io(self.path.as_deref().unwrap_or(Path::new("<manifests>")), e))?;
        }
        inner.manifests.push(manifest);
        Ok(())
    }

    /// All manifests sorted by run id.
    pub fn manifests(&self) -> Vec<RunManifest> {
        let mut out = self.inner.lock().expect("manifest store lock").manifests.clone();
        out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        out
    }
}
