//! Flat `key = value` run configuration.
//!
//! Keys are the dotted field paths of [`RunConfig`], e.g. `reader.hidden`
//! or `ranker.exponent`. Lines starting with `#` and blank lines are
//! ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::SynthConfig;
use crate::error::{Error, Result};
use crate::reader::ReaderConfig;
use crate::retrieval::{RankerConfig, RetrieverKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Directory with `entities.txt`, `articles.jsonl` and the split files.
    pub corpus_dir: PathBuf,
    /// Where checkpoints, dumps and reports are written.
    pub work_dir: PathBuf,
    /// Frequency threshold for the small entity vocabulary.
    pub min_count: u64,
    /// Retriever feeding the reader.
    pub retriever: RetrieverKind,
    /// Seed for the random order of the `r0` retriever.
    pub retrieval_seed: u64,
    pub reader: ReaderConfig,
    pub ranker: RankerConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_dir: PathBuf::from("corpus"),
            work_dir: PathBuf::from("work"),
            min_count: 10,
            retriever: RetrieverKind::R1,
            retrieval_seed: 1,
            reader: ReaderConfig::default(),
            ranker: RankerConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut BTreeMap<String, Value>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

fn slot<'v>(root: &'v mut Value, key: &str) -> Option<&'v mut Value> {
    let mut cur = root;
    for part in key.split('.') {
        cur = cur.as_object_mut()?.get_mut(part)?;
    }
    (!cur.is_object()).then_some(cur)
}

/// Parses `raw` as the same JSON kind as `current`.
fn coerce(key: &str, current: &Value, raw: &str) -> Result<Value> {
    let bad = |what: &str| Error::invalid(format!("{key}: expected {what}, got {raw:?}"));
    Ok(match current {
        Value::Bool(_) => match raw.to_ascii_lowercase().as_str() {
            "true" | "on" | "yes" | "1" => Value::Bool(true),
            "false" | "off" | "no" | "0" => Value::Bool(false),
            _ => return Err(bad("a boolean")),
        },
        Value::Number(n) if n.is_u64() => Value::from(
            raw.parse::<u64>()
                .map_err(|_| bad("a non-negative integer"))?,
        ),
        Value::Number(n) if n.is_i64() => {
            Value::from(raw.parse::<i64>().map_err(|_| bad("an integer"))?)
        }
        Value::Number(_) => {
            let x: f64 = raw.parse().map_err(|_| bad("a number"))?;
            serde_json::Number::from_f64(x)
                .map(Value::Number)
                .ok_or_else(|| bad("a finite number"))?
        }
        Value::Null => Value::String(raw.to_string()),
        _ => Value::String(raw.to_string()),
    })
}

impl RunConfig {
    fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Every key with its current value, in the text form accepted back.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut flat = BTreeMap::new();
        flatten("", &self.to_value(), &mut flat);
        flat.into_iter()
            .map(|(k, v)| {
                let text = match v {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                (k, text)
            })
            .collect()
    }

    pub fn keys(&self) -> Vec<String> {
        self.entries().into_keys().collect()
    }

    /// Sets one key; unknown keys are rejected with the list of valid ones.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let mut value = self.to_value();
        let target = slot(&mut value, key).ok_or_else(|| {
            Error::invalid(format!(
                "unknown config key {key:?}; valid keys: {}",
                self.keys().join(", ")
            ))
        })?;
        let new = coerce(key, target, raw.trim())?;
        *target = new;
        let updated: RunConfig = match serde_json::from_value(value.clone()) {
            Ok(c) => c,
            Err(_) => {
                // Enumerated settings are spelled in lowercase.
                let target = slot(&mut value, key).expect("checked above");
                if let Value::String(s) = target {
                    *s = s.to_ascii_lowercase();
                }
                serde_json::from_value(value).map_err(|e| Error::invalid(format!("{key}: {e}")))?
            }
        };
        *self = updated;
        Ok(())
    }

    /// Applies `key=value` assignments in order.
    pub fn apply<'a>(&mut self, assignments: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for a in assignments {
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value, got {a:?}")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "<config>".to_string(),
                line: n + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            config.set(k.trim(), v).map_err(|e| Error::Parse {
                path: "<config>".to_string(),
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_count < 1 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        self.reader.validate()?;
        self.ranker.validate()?;
        self.synth.validate()
    }
}
