//! The teacher: zero-shot annotation through a chat-completion endpoint.
//!
//! [`build_prompt`] renders the task description, the 17 topic labels with
//! their descriptions, the answer format and the document text.
//! [`TeacherClient`] sends one request per (document, iteration) with
//! bounded concurrency and retry, caches every successful answer keyed by
//! (doc_id, iteration, prompt hash, model name) so reruns are free, and
//! keeps a [`CostLedger`]. [`mock_server`] provides a local endpoint with
//! the same wire format for offline runs and tests.

mod client;
pub mod mock_server;
mod prompt;

pub use client::{
    AnnotationCache, AnnotationFailure, BatchOutcome, CacheEntry, CostLedger, Decoding, Pricing,
    RetryPolicy, TeacherAnnotation, TeacherClient, TeacherConfig,
};
pub use prompt::{build_prompt, parse_label_response, PromptTemplate, PROMPT_VERSION};
