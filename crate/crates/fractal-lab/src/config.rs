//! Flat key=value experiment configuration.
//!
//! Resolution order: experiment defaults, then a config file (`--config`),
//! then command-line `--key value` pairs — later wins. Values stay strings
//! until an experiment parses them; numeric getters accept plain literals
//! and exact fractions (`1/1024`), so meshes and critical probabilities
//! round-trip without decimal truncation.

use std::collections::BTreeMap;
use std::path::Path;

use fractal_core::error::{CoreError, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn from_defaults(defaults: &[(&str, &str)]) -> Config {
        Config {
            values: defaults
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Override one key (must already exist in the schema the defaults
    /// define; unknown keys are field-level errors).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.values.contains_key(key) {
            let known: Vec<&str> = self.values.keys().map(|s| s.as_str()).collect();
            return Err(CoreError::invalid(format!(
                "config key '{key}' is not recognized; known keys: {}",
                known.join(", ")
            )));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply a flat key=value file: one pair per line, `#` comments and
    /// blank lines ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CoreError::Format(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                )));
            };
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| CoreError::invalid(format!("config key '{key}' is missing")))
    }

    /// Number: a float literal or an exact fraction `num/den`.
    pub fn f64(&self, key: &str) -> Result<f64> {
        let raw = self.raw(key)?;
        let v = if let Some((num, den)) = raw.split_once('/') {
            let n: f64 = num.trim().parse().map_err(|_| bad(key, raw, "a number"))?;
            let d: f64 = den.trim().parse().map_err(|_| bad(key, raw, "a number"))?;
            if d == 0.0 {
                return Err(bad(key, raw, "a fraction with nonzero denominator"));
            }
            n / d
        } else {
            raw.parse().map_err(|_| bad(key, raw, "a number"))?
        };
        if !v.is_finite() {
            return Err(bad(key, raw, "a finite number"));
        }
        Ok(v)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let raw = self.raw(key)?;
        raw.parse().map_err(|_| bad(key, raw, "a nonnegative integer"))
    }

    pub fn u32(&self, key: &str) -> Result<u32> {
        let raw = self.raw(key)?;
        raw.parse().map_err(|_| bad(key, raw, "a nonnegative integer"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self.raw(key)?;
        raw.parse().map_err(|_| bad(key, raw, "a nonnegative integer"))
    }

    /// Optional number: the literal `none` disables the parameter.
    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.raw(key)? == "none" {
            return Ok(None);
        }
        self.f64(key).map(Some)
    }

    /// One of a fixed set of lowercase words.
    pub fn choice(&self, key: &str, allowed: &[&str]) -> Result<String> {
        let raw = self.raw(key)?;
        if allowed.contains(&raw) {
            Ok(raw.to_string())
        } else {
            Err(bad(key, raw, &format!("one of {}", allowed.join("|"))))
        }
    }
}

fn bad(key: &str, raw: &str, wanted: &str) -> CoreError {
    CoreError::invalid(format!("config key '{key}': expected {wanted}, got '{raw}'"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_parse_exactly() {
        let mut c = Config::from_defaults(&[("mesh", "1/1024"), ("p", "1/9")]);
        assert_eq!(c.f64("mesh").unwrap(), 1.0 / 1024.0);
        assert_eq!(c.f64("p").unwrap(), 1.0 / 9.0);
        c.set("p", "0.25").unwrap();
        assert_eq!(c.f64("p").unwrap(), 0.25);
        assert!(c.set("unknown", "1").is_err());
        assert!(c.f64("absent").is_err());
    }

    #[test]
    fn file_overrides_and_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg");
        std::fs::write(&path, "# comment\n\nmesh = 1/512\n").unwrap();
        let mut c = Config::from_defaults(&[("mesh", "1/1024")]);
        c.apply_file(&path).unwrap();
        assert_eq!(c.f64("mesh").unwrap(), 1.0 / 512.0);
        std::fs::write(&path, "mesh\n").unwrap();
        let err = c.apply_file(&path).unwrap_err().to_string();
        assert!(err.contains(":1:"), "{err}");
    }

    #[test]
    fn typed_getters_name_the_key() {
        let c = Config::from_defaults(&[("dt", "abc"), ("mode", "wild")]);
        let err = c.f64("dt").unwrap_err().to_string();
        assert!(err.contains("'dt'") && err.contains("abc"), "{err}");
        let err = c.choice("mode", &["trace", "graph"]).unwrap_err().to_string();
        assert!(err.contains("trace|graph"), "{err}");
    }
}
