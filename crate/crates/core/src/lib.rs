//! Desk-scale audit harness for translation artifacts in translated
//! multiple-choice benchmarks.
//!
//! The crate quantifies how much of a translated benchmark's score shift is
//! attributable to translation residue rather than content, through four
//! estimators: a back-translation gap over aligned item triples under a
//! BLEU QC gate (`e1`), an annotation calibration against rank-correlated
//! cue scores (`e2`), a contrast against a natively-sourced control set
//! (`e3`), and a same-item naturalization stress test with verifier and
//! human QC (`e4`). Inference is carried by a seeded statistics kernel:
//! exact sign tests, percentile bootstraps (paired, item-clustered,
//! unpaired), Wilson intervals, tie-aware rank correlation, and two-coder
//! agreement.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod natqc;
pub mod prompting;
pub mod qc;
pub mod report;
pub mod scoring;

pub use error::{AuditError, Result};
