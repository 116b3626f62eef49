use std::env;
use std::path::PathBuf;
use std::process::ExitCode;

use fractal_core::error::{CoreError, Result};
use fractal_lab::config::Config;
use fractal_lab::experiments::{self, REGISTRY};

const USAGE: &str = "\
fractal-lab — simulation laboratory for random fractal geometry

usage:
  fractal-lab list
  fractal-lab <experiment> [--config FILE] [--out DIR] [--key VALUE]...

Configuration resolves the experiment's defaults, then each --config file
(flat key=value lines, # comments) in order, then --key VALUE flags; later
settings win. Every experiment takes --seed N (master seed; it fixes every
byte of every artifact). Artifacts land in DIR (default out/<experiment>),
ending with result.json and a digest manifest.

environment:
  FRACTAL_LAB_THREADS   worker threads; 0 or unset picks the machine width

exit codes: 0 all predicates pass, 2 a predicate failed, 1 usage or error
";

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn list() {
    for def in REGISTRY {
        println!("{:<14} {}", def.name, def.summary);
        let defaults: Vec<String> = def
            .defaults
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        println!("{:<14}   defaults: {}", "", defaults.join(" "));
        println!("{:<14}   budget: {} min", "", def.budget_minutes);
    }
}

fn configure_threads() -> Result<()> {
    let Some(raw) = env::var_os("FRACTAL_LAB_THREADS") else {
        return Ok(());
    };
    let text = raw.to_string_lossy();
    let n: usize = text.trim().parse().map_err(|_| {
        CoreError::invalid(format!(
            "FRACTAL_LAB_THREADS must be a nonnegative integer, got {text:?}"
        ))
    })?;
    if n == 0 {
        return Ok(()); // auto
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CoreError::invalid(format!("thread pool setup failed: {e}")))
}

fn run() -> Result<bool> {
    let args: Vec<String> = env::args().skip(1).collect();
    let Some(name) = args.first() else {
        eprint!("{USAGE}");
        return Err(CoreError::invalid("missing experiment name"));
    };
    if name == "--help" || name == "-h" || name == "help" {
        print!("{USAGE}");
        return Ok(true);
    }
    if name == "list" {
        list();
        return Ok(true);
    }
    let Some(def) = experiments::find(name) else {
        let known: Vec<&str> = REGISTRY.iter().map(|d| d.name).collect();
        return Err(CoreError::invalid(format!(
            "unknown experiment {name:?}; known: {} (or `list`)",
            known.join(", ")
        )));
    };

    let mut config = Config::from_defaults(def.defaults);
    let mut out_dir: Option<PathBuf> = None;
    let mut it = args[1..].iter();
    while let Some(flag) = it.next() {
        let Some(key) = flag.strip_prefix("--") else {
            return Err(CoreError::invalid(format!(
                "expected --key, got {flag:?}"
            )));
        };
        let Some(value) = it.next() else {
            return Err(CoreError::invalid(format!("--{key} needs a value")));
        };
        match key {
            "config" => config.apply_file(value.as_ref())?,
            "out" => out_dir = Some(PathBuf::from(value)),
            _ => config.set(key, value)?,
        }
    }

    configure_threads()?;
    let out_dir = out_dir.unwrap_or_else(|| PathBuf::from("out").join(def.name));
    let result = experiments::run_experiment(def, &config, &out_dir)?;

    println!("experiment: {}", result.experiment);
    println!("seed: {}", result.master_seed);
    println!("out: {}", out_dir.display());
    for (k, v) in &result.metrics {
        println!("metric {k} = {v}");
    }
    for (k, ok) in &result.predicates {
        println!("predicate {k}: {}", if *ok { "pass" } else { "FAIL" });
    }
    println!("result: {}", if result.pass { "PASS" } else { "FAIL" });
    Ok(result.pass)
}
