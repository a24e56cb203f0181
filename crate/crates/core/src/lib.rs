//! Teacher-student toolkit for multilingual news topic classification.
//!
//! A large language model (the *teacher*) annotates news texts with one of
//! the 17 top-level IPTC Media Topic labels. Those labels become training
//! data for a smaller encoder classifier (the *student*). This crate covers
//! everything around the two models:
//!
//! * [`schema`]: the label taxonomy, its descriptions and the annotation
//!   guidelines.
//! * [`corpus`]: ingesting genre-tagged documents, keeping news, and
//!   truncating to the first 512 words.
//! * [`teacher`]: the zero-shot prompt, a chat-completion client with retry,
//!   response cache and cost ledger.
//! * [`sampler`]: stratified train/dev splitting, label x language balanced
//!   test selection, size and monolingual subsets, exclusion of discarded
//!   gold labels.
//! * [`agreement`]: nominal Krippendorff's alpha (pairwise, intra-annotator,
//!   label level).
//! * [`evaluation`]: confusion matrices, micro/macro F1, mean ± std over runs.
//! * [`harness`]: the data-size sweep and cross-lingual experiment matrix
//!   over any [`harness::Trainer`], with run manifests, plus offline mock
//!   teacher, mock trainer and synthetic corpora.
//! * [`service`]: the HTTP backend for a manual annotation campaign.
//! * [`cli`]: the `mediatopic` command line.
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod agreement;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod jsonl;
pub mod rng;
pub mod sampler;
pub mod schema;
pub mod service;
pub mod teacher;

pub use error::{Error, Result};
pub use schema::{LabelKind, LabelSchema, TopicLabel};
