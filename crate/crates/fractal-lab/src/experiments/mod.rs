//! Experiment registry and dispatch.
//!
//! Each experiment is a pure function of its resolved configuration: the
//! master seed fixes every byte of every artifact, at any parallelism
//! degree. Experiments validate their configuration field by field before
//! doing any work, emit artifacts through an [`ArtifactSink`], and report
//! flat metrics plus one verdict per acceptance predicate.

use std::collections::BTreeMap;
use std::path::Path;

use fractal_core::error::{CoreError, Result};
use fractal_core::rng::{self, tags};

use crate::config::Config;
use crate::manifest::{ArtifactSink, ExperimentResult};

mod bm;
mod cle;
mod perc;
mod sle;

/// Metrics and predicate verdicts produced by one experiment run.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub predicates: BTreeMap<String, bool>,
}

impl Outcome {
    /// Record a finite metric (non-finite values are a caller bug: JSON has
    /// no representation for them).
    pub fn metric(&mut self, name: &str, value: f64) {
        assert!(value.is_finite(), "metric {name} must be finite, got {value}");
        self.metrics.insert(name.to_string(), value);
    }

    pub fn predicate(&mut self, name: &str, verdict: bool) {
        self.predicates.insert(name.to_string(), verdict);
    }

    pub fn pass(&self) -> bool {
        self.predicates.values().all(|&v| v)
    }
}

pub struct ExperimentDef {
    pub name: &'static str,
    pub summary: &'static str,
    /// Declared desk-scale budget in minutes at the default configuration.
    pub budget_minutes: f64,
    pub defaults: &'static [(&'static str, &'static str)],
    /// Validate a resolved configuration without running (schema check).
    pub check: fn(&Config) -> Result<()>,
    run: fn(&Config, &mut ArtifactSink) -> Result<Outcome>,
}

/// All experiments, sorted lexicographically by name.
pub static REGISTRY: &[ExperimentDef] = &[
    ExperimentDef {
        name: "bm-lemma31",
        summary: "dyadic scan of Brownian paths for small-increment/large-excursion intervals",
        budget_minutes: 2.0,
        defaults: bm::LEMMA31_DEFAULTS,
        check: bm::lemma31_check,
        run: bm::lemma31_run,
    },
    ExperimentDef {
        name: "bm-turning",
        summary: "turning-constant refinement profile of Brownian trace or graph curves",
        budget_minutes: 5.0,
        defaults: bm::TURNING_DEFAULTS,
        check: bm::turning_check,
        run: bm::turning_run,
    },
    ExperimentDef {
        name: "cle-carpet",
        summary: "loop-soup carpet raster with disjointness, density, and dimension diagnostics",
        budget_minutes: 10.0,
        defaults: cle::CARPET_DEFAULTS,
        check: cle::carpet_check,
        run: cle::carpet_run,
    },
    ExperimentDef {
        name: "cle-turning",
        summary: "turning constants of soup-cluster boundary loops against circle baselines",
        budget_minutes: 5.0,
        defaults: cle::TURNING_DEFAULTS,
        check: cle::turning_check,
        run: cle::turning_run,
    },
    ExperimentDef {
        name: "perc-dim",
        summary: "box-counting dimension of surviving fractal-percolation trees",
        budget_minutes: 5.0,
        defaults: perc::DIM_DEFAULTS,
        check: perc::dim_check,
        run: perc::dim_run,
    },
    ExperimentDef {
        name: "perc-survival",
        summary: "survival frequency and level counts of fractal percolation vs the branching oracle",
        budget_minutes: 5.0,
        defaults: perc::SURVIVAL_DEFAULTS,
        check: perc::survival_check,
        run: perc::survival_run,
    },
    ExperimentDef {
        name: "sle-trace",
        summary: "one Loewner trace (chordal, radial, or whole-plane) with driver and tip output",
        budget_minutes: 5.0,
        defaults: sle::TRACE_DEFAULTS,
        check: sle::trace_check,
        run: sle::trace_run,
    },
    ExperimentDef {
        name: "sle-turning",
        summary: "turning-constant refinement profile of chordal SLE traces",
        budget_minutes: 10.0,
        defaults: sle::TURNING_DEFAULTS,
        check: sle::turning_check,
        run: sle::turning_run,
    },
    ExperimentDef {
        name: "sle-validate",
        summary: "deterministic Loewner correctness battery: closed forms, normalization, reductions",
        budget_minutes: 2.0,
        defaults: sle::VALIDATE_DEFAULTS,
        check: sle::validate_check,
        run: sle::validate_run,
    },
];

pub fn find(name: &str) -> Option<&'static ExperimentDef> {
    REGISTRY.iter().find(|d| d.name == name)
}

/// Run a registered experiment with a fully resolved configuration, writing
/// artifacts, `result.json`, and `manifest.json` under `out_dir`.
pub fn run_experiment(
    def: &ExperimentDef,
    config: &Config,
    out_dir: &Path,
) -> Result<ExperimentResult> {
    (def.check)(config)?;
    let master_seed = config.u64("seed")?;
    let mut sink = ArtifactSink::new(out_dir)?;
    let outcome = (def.run)(config, &mut sink)?;
    if outcome.predicates.is_empty() {
        return Err(CoreError::invalid(format!(
            "experiment {} produced no predicate verdicts",
            def.name
        )));
    }
    let mut artifacts: Vec<String> = sink.file_names().to_vec();
    artifacts.push("result.json".to_string());
    let pass = outcome.pass();
    let result = ExperimentResult {
        experiment: def.name.to_string(),
        master_seed,
        parameters: config.entries().clone(),
        metrics: outcome.metrics,
        predicates: outcome.predicates,
        pass,
        artifacts,
    };
    sink.finish(&result)?;
    Ok(result)
}

/// Stable per-replicate seed derivation from the master seed.
pub(crate) fn replicate_seed(master: u64, replicate: u64) -> u64 {
    rng::keyed_u64(master, &[tags::REPLICATE, replicate])
}

/// Median of a slice (test-free helper for metric reporting).
pub(crate) fn median(values: &[f64]) -> f64 {
    fractal_core::stats::median(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_self_validating() {
        let names: Vec<&str> = REGISTRY.iter().map(|d| d.name).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted, "registry must be sorted lexicographically");
        assert_eq!(
            names,
            vec![
                "bm-lemma31",
                "bm-turning",
                "cle-carpet",
                "cle-turning",
                "perc-dim",
                "perc-survival",
                "sle-trace",
                "sle-turning",
                "sle-validate",
            ]
        );
        for def in REGISTRY {
            let cfg = Config::from_defaults(def.defaults);
            (def.check)(&cfg).unwrap_or_else(|e| {
                panic!("defaults of {} fail their own schema: {e}", def.name)
            });
            assert!(
                def.defaults.iter().any(|(k, _)| *k == "seed"),
                "{} has no seed default",
                def.name
            );
            assert!(def.budget_minutes <= 10.0, "{} over budget", def.name);
        }
    }
}
