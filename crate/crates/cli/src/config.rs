use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Flag values; each one overrides the matching config field.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig<P> {
    #[serde(default)]
    #[allow(dead_code)]
    command: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    restarts: Option<usize>,
    #[serde(default)]
    samples: Option<usize>,
    #[serde(default)]
    tol: Option<f64>,
    problem: P,
}

#[derive(Debug)]
pub struct Loaded<P> {
    pub problem: P,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    /// SHA-256 of the effective config (file plus overrides) in canonical JSON.
    pub hash: String,
}

impl<P> Loaded<P> {
    pub fn require_seed(&self, command: &str) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::schema("seed", format!("a seed is required for `{command}`")))
    }
}

fn read_value(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::schema("<root>", e.to_string()))
}

/// Reads the config (or an empty one), applies overrides and decodes it.
pub fn load<P: DeserializeOwned>(
    command: &str,
    path: Option<&PathBuf>,
    ov: &Overrides,
) -> CliResult<Loaded<P>> {
    let mut value = match path {
        Some(p) => read_value(p)?,
        None => Value::Object(Map::new()),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::schema("<root>", "config must be a JSON object"))?;
    match obj.get("command") {
        None => {}
        Some(Value::String(c)) if c == command => {}
        Some(other) => {
            return Err(CliError::schema(
                "command",
                format!("config is for {other}, but `{command}` was run"),
            ))
        }
    }
    obj.insert("command".into(), Value::String(command.into()));
    obj.entry("problem")
        .or_insert_with(|| Value::Object(Map::new()));
    if let Some(s) = ov.seed {
        obj.insert("seed".into(), s.into());
    }
    if let Some(r) = ov.restarts {
        obj.insert("restarts".into(), r.into());
    }
    if let Some(s) = ov.samples {
        obj.insert("samples".into(), s.into());
    }
    if let Some(t) = ov.tol {
        obj.insert("tol".into(), t.into());
    }
    let canonical = serde_json::to_vec(&value).expect("a JSON value always serializes");
    let hash = hex(&Sha256::digest(&canonical));
    let cfg: RunConfig<P> = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::schema(path, e.into_inner().to_string())
    })?;
    if let Some(t) = cfg.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::schema(
                "tol",
                "tolerance must be positive and finite",
            ));
        }
    }
    if cfg.restarts == Some(0) {
        return Err(CliError::schema("restarts", "restarts must be at least 1"));
    }
    Ok(Loaded {
        problem: cfg.problem,
        seed: cfg.seed,
        restarts: cfg.restarts,
        samples: cfg.samples,
        tol: cfg.tol,
        hash,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
