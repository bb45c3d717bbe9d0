//! `key = value` configuration files for `run`. Blank lines and lines starting
//! with `#` are ignored; keys are the long flag names without dashes.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const RUN_KEYS: &[&str] = &[
    "data",
    "model",
    "threshold",
    "splits",
    "folds",
    "grid-fast",
    "dropout",
    "lr",
    "wd",
    "epochs",
    "batch-size",
    "select-final-epoch",
    "permute-labels",
    "no-timestamp",
    "save-models",
    "seed",
    "out",
    "jobs",
    "precision",
];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{line}`", i + 1);
            };
            let key = k.trim().replace('_', "-");
            if !allowed.contains(&key.as_str()) {
                bail!("line {}: unknown key `{}`", i + 1, k.trim());
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                bail!("line {}: key `{key}` given twice", i + 1);
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, allowed).with_context(|| format!("in {}", path.display()))
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow::anyhow!("config key `{key}`: {e}")))
            .transpose()
    }

    pub fn get_flag(&self, key: &str) -> Result<bool> {
        match self.values.get(key).map(String::as_str) {
            None => Ok(false),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => bail!("config key `{key}`: expected true or false, got `{v}`"),
        }
    }

    /// Comma-separated list.
    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.values
            .get(key)
            .map(|v| parse_list(v).with_context(|| format!("config key `{key}`")))
            .transpose()
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    let vals = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number `{}`", s.trim())))
        .collect::<Result<Vec<_>>>()?;
    if vals.is_empty() {
        bail!("empty list");
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let c = ConfigFile::parse("# comment\nmodel = mean_CNN\n\nlr = 1e-3, 1e-4\ngrid_fast = true\n", RUN_KEYS).unwrap();
        assert_eq!(c.get::<String>("model").unwrap().as_deref(), Some("mean_CNN"));
        assert_eq!(c.get_list("lr").unwrap(), Some(vec![1e-3, 1e-4]));
        assert!(c.get_flag("grid-fast").unwrap());
        assert!(!c.get_flag("permute-labels").unwrap());
        assert!(ConfigFile::parse("colour = red\n", RUN_KEYS).is_err());
        assert!(ConfigFile::parse("model\n", RUN_KEYS).is_err());
        assert!(ConfigFile::parse("seed = 1\nseed = 2\n", RUN_KEYS).is_err());
    }

    #[test]
    fn typed_errors() {
        let c = ConfigFile::parse("folds = five\n", RUN_KEYS).unwrap();
        assert!(c.get::<usize>("folds").is_err());
    }
}
