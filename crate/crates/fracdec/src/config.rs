//! Experiment configuration and its digest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use fracdec_core::rational::parse_rational;
use fracdec_core::Rational;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::formats::{read_json, GraphSpec, PackingFile};

/// A graph given inline or as a path to a graph JSON file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Inline(GraphSpec),
    Path(PathBuf),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packing: Option<PathBuf>,
}

/// One run of one command.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Artifact name to destination. Unlisted artifacts are not written,
    /// except the report, which then goes to stdout.
    #[serde(default)]
    pub output_paths: BTreeMap<String, PathBuf>,
}

/// Inputs read from disk, ready to use and to digest.
#[derive(Clone, Debug, Default)]
pub struct Resolved {
    pub graph: Option<GraphSpec>,
    pub packing: Option<PackingFile>,
}

impl ExperimentConfig {
    pub fn new(command: &str) -> Self {
        ExperimentConfig {
            command: command.into(),
            inputs: Inputs::default(),
            parameters: BTreeMap::new(),
            seed: None,
            output_paths: BTreeMap::new(),
        }
    }

    pub fn resolve(&self) -> CliResult<Resolved> {
        let graph = match &self.inputs.graph {
            None => None,
            Some(GraphSource::Inline(g)) => Some(g.clone()),
            Some(GraphSource::Path(p)) => Some(read_json(p)?),
        };
        let packing = match &self.inputs.packing {
            None => None,
            Some(p) => Some(read_json(p)?),
        };
        Ok(Resolved { graph, packing })
    }

    /// SHA-256 over the canonical JSON of the command, the resolved inputs,
    /// the parameters and the seed. Output paths and file names do not
    /// contribute; a packing input contributes its host, family and entries.
    pub fn digest(&self, resolved: &Resolved) -> String {
        let packing = resolved
            .packing
            .as_ref()
            .map(|p| serde_json::json!({ "host": p.host, "family": p.family, "entries": p.entries }));
        let canonical = serde_json::json!({
            "command": self.command,
            "graph": resolved.graph,
            "packing": packing,
            "parameters": self.parameters,
            "seed": self.seed,
        });
        let text = serde_json::to_string(&canonical).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn params(&self) -> Params<'_> {
        Params { map: &self.parameters }
    }
}

/// Typed access to the parameter map.
pub struct Params<'a> {
    map: &'a BTreeMap<String, Value>,
}

impl Params<'_> {
    /// Rejects keys outside `allowed`.
    pub fn only(&self, allowed: &[&str]) -> CliResult<()> {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        match self.map.keys().find(|k| !allowed.contains(k.as_str())) {
            Some(k) => Err(CliError::usage(format!("unknown parameter {k:?}"))),
            None => Ok(()),
        }
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn bad(key: &str, want: &str, v: &Value) -> CliError {
        CliError::usage(format!("parameter {key:?} should be {want}, got {v}"))
    }

    fn missing(key: &str) -> CliError {
        CliError::usage(format!("missing parameter {key:?}"))
    }

    pub fn opt_u64(&self, key: &str) -> CliResult<Option<u64>> {
        self.get(key)
            .map(|v| v.as_u64().ok_or_else(|| Self::bad(key, "a non-negative integer", v)))
            .transpose()
    }

    pub fn opt_usize(&self, key: &str) -> CliResult<Option<usize>> {
        Ok(self.opt_u64(key)?.map(|v| v as usize))
    }

    pub fn usize(&self, key: &str) -> CliResult<usize> {
        self.opt_usize(key)?.ok_or_else(|| Self::missing(key))
    }

    /// Accepts `"a/b"` strings and integers.
    pub fn opt_rational(&self, key: &str) -> CliResult<Option<Rational>> {
        self.get(key)
            .map(|v| match v {
                Value::String(s) => Ok(parse_rational(s)?),
                Value::Number(n) if n.is_i64() => Ok(Rational::from_integer(n.as_i64().unwrap().into())),
                _ => Err(Self::bad(key, "a rational \"a/b\"", v)),
            })
            .transpose()
    }

    pub fn rational(&self, key: &str) -> CliResult<Rational> {
        self.opt_rational(key)?.ok_or_else(|| Self::missing(key))
    }

    pub fn opt_str(&self, key: &str) -> CliResult<Option<&str>> {
        self.get(key)
            .map(|v| v.as_str().ok_or_else(|| Self::bad(key, "a string", v)))
            .transpose()
    }

    pub fn opt_bool(&self, key: &str) -> CliResult<Option<bool>> {
        self.get(key)
            .map(|v| v.as_bool().ok_or_else(|| Self::bad(key, "a boolean", v)))
            .transpose()
    }

    pub fn opt_as<T: serde::de::DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        self.get(key)
            .map(|v| {
                serde_json::from_value(v.clone()).map_err(|source| CliError::Json {
                    context: format!("parameter {key:?}"),
                    source,
                })
            })
            .transpose()
    }
}
