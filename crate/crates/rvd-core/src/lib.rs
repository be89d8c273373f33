//! Core logic for a community robot vulnerability database.
//!
//! Everything in this crate is pure computation over in-memory data: the
//! flaw record schema and its validation pipeline, severity vector parsing
//! and CVSS v3.1 base scoring, duplicate detection built on a regularized
//! logistic regression with uncertainty-sampling query selection, corpus
//! statistics with report rendering, and coordinated-disclosure deadline
//! arithmetic. File access, locking, and the command-line interface live in
//! the companion `rvd-cli` crate.
//!
//! The crate is `no_std` (requires `alloc`), so the same logic runs in
//! embedded or wasm contexts; math goes through `libm` for bit-identical
//! results everywhere.

#![no_std]

extern crate alloc;

pub mod analytics;
pub mod dedup;
pub mod disclosure;
pub mod doc;
pub mod record;
pub mod severity;

pub use doc::{Doc, Value};
pub use record::{FlawRecord, FlawType, ValidationReport};
pub use severity::{MetricVector, ScoreValue, SeverityBucket};
