//! Student experiments: the training-size sweep and the language matrix.
//!
//! Runs go through the [`Trainer`] trait. [`MockTrainer`] runs in process;
//! [`SubprocessTrainer`] drives any external program that honors the
//! trainer contract:
//!
//! ```text
//! <program> [args] --train train.jsonl --dev dev.jsonl --test test.jsonl \
//!           --config config.json --out <dir>
//! ```
//!
//! Input rows are `{id, lang, text, label}` (no `label` in the test file),
//! the config file holds the [`TrainerConfig`] fields plus `seed`, and the
//! program writes `<dir>/predictions.jsonl` (`{id, label}`) and
//! `<dir>/metadata.json` (`{trainer_id, epochs_run, wall_time}`), exiting 0
//! on success. `mediatopic mock-train` implements the contract with the
//! mock trainer.
//!
//! Every run leaves a [`RunManifest`]; reports are assembled from manifests
//! only, and [`replay`] re-runs one from its recorded inputs.

mod manifest;
mod mock;
mod sweep;
pub mod synthetic;
mod trainer;

pub use manifest::{ids_digest, ManifestStore, RunKind, RunManifest, RunStatus, SubsetSpec};
pub use mock::{marker_token, mock_label, mock_teacher, tokenize, MockTrainer, MOCK_TRAINER_ID};
pub use sweep::{
    builtin_reference, load_reference, reference_from_runs, replay, run_crosslingual_matrix, run_sweep,
    score_sets, MatrixCell, MatrixConfig, MatrixReport, ReferenceRow, SweepConfig, SweepReport, SweepRow,
    ALL, MULTILINGUAL,
};
pub use synthetic::{generate as generate_synthetic, SyntheticCorpus, SyntheticSpec};
pub use trainer::{
    align_predictions, run_contract, ContractConfig, ContractPaths, EpochSchedule, EpochSource, Prediction,
    SubprocessTrainer, Trainer, TrainerConfig, TrainerJob, TrainerMetadata, TrainerOutput, DEFAULT_MODEL_ID,
};
