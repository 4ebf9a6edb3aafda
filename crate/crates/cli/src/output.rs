use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rounds to 12 significant digits. Infinite and zero values pass through.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Plain decimal text with at most 12 significant digits; `-inf` for −∞.
pub fn fmt_num(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{}", sig12(x))
    }
}

/// Rounds every float in `v` except probability tables, which keep full
/// precision so that witnesses load back exactly.
fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(f) = n.as_f64() {
                *v = json!(sig12(f));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => {
            for (k, item) in map.iter_mut() {
                if k != "table" {
                    round_json(item);
                }
            }
        }
        _ => {}
    }
}

/// Where results go and what every file is stamped with.
pub struct Sink {
    pub dir: PathBuf,
    pub hash: String,
    pub seed: Option<u64>,
}

impl Sink {
    pub fn new(dir: &Path, hash: String, seed: Option<u64>) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            hash,
            seed,
        })
    }

    fn create(&self, name: &str) -> CliResult<File> {
        let path = self.dir.join(name);
        File::create(&path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    fn io(&self, name: &str, e: std::io::Error) -> CliError {
        CliError::Io {
            path: self.dir.join(name).display().to_string(),
            source: e,
        }
    }

    pub fn stamp(&self) -> Value {
        json!({ "version": VERSION, "config_sha256": self.hash, "seed": self.seed })
    }

    /// Writes `{"run": stamp, ...body}` as pretty JSON with a final newline.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> CliResult<Value> {
        let mut v =
            serde_json::to_value(body).map_err(|e| CliError::schema("<output>", e.to_string()))?;
        round_json(&mut v);
        let mut obj = serde_json::Map::new();
        obj.insert("run".into(), self.stamp());
        match v {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("result".into(), other);
            }
        }
        let out = Value::Object(obj);
        let mut f = self.create(name)?;
        let text = serde_json::to_string_pretty(&out).expect("a JSON value always serializes");
        f.write_all(text.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| self.io(name, e))?;
        Ok(out)
    }

    /// Writes a CSV whose first line is a `#` comment with the stamp.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut f = self.create(name)?;
        let seed = self
            .seed
            .map(|s| s.to_string())
            .unwrap_or_else(|| "none".into());
        writeln!(
            f,
            "# cascade {VERSION} config_sha256={} seed={seed}",
            self.hash
        )
        .map_err(|e| self.io(name, e))?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(f);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| self.io(name, e))?;
        Ok(())
    }
}
