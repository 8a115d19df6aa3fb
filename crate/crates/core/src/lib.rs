//! Cross-domain data selection for NLI-framed compliance corpora.
//!
//! The pipeline scores source-domain premise/hypothesis pairs for relevance to
//! a target regulatory domain, selects augmentation subsets at fixed ratios,
//! trains a light proxy classifier on target data plus the selection, and
//! reports lexical-overlap diagnostics for spotting negative transfer.
//!
//! Three scorers are provided:
//!
//! * [`moore_lewis`]: cross-entropy difference under a target and a source
//!   n-gram language model ([`lm`]).
//! * [`importance`]: density-ratio weights from a logistic domain classifier.
//! * [`embedding`]: max (or mean top-k) cosine similarity to target instances,
//!   over external vectors or a TF-IDF fallback.
//!
//! Per-instance work is data-parallel through [`par`], which uses rayon when
//! the `parallel` feature is enabled and plain iterators otherwise. Results
//! never depend on the degree of parallelism.

pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod importance;
pub mod lm;
pub mod moore_lewis;
pub mod overlap;
pub mod par;
pub mod pipeline;
pub mod score;
pub mod selection;
pub mod sgd;
pub mod synth;
pub mod textproc;
pub mod transfer;

pub use error::{Error, Result};
