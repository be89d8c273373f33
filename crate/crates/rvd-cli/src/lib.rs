//! Filesystem store and command implementations behind the `rvd` binary.
//!
//! The crate is a thin std shell around `rvd-core`: `store` owns the
//! on-disk corpus layout and writer locking, `commands` implements each
//! CLI subcommand against generic readers/writers so the whole surface is
//! testable without a terminal.

pub mod commands;
pub mod store;
