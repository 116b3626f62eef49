//! Experiment harness for the random-fractal laboratory.
//!
//! Wraps the `fractal-core` library in a registry of named experiments, each
//! a deterministic function of a flat key=value configuration and a master
//! seed. Runs emit CSV/PGM/JSON artifacts into an output directory together
//! with a `result.json` (metrics and predicate verdicts) and a
//! `manifest.json` listing the SHA-256 digest of every artifact, written
//! last and verified by read-back.

pub mod config;
pub mod experiments;
pub mod manifest;
