//! Buffered result files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Files are held in memory until the command has fully succeeded, so a
/// failing run leaves nothing behind.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        self.add(name, w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?);
        Ok(())
    }

    /// Writes every file through a temporary name and renames it into place.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut staged = Vec::new();
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(e).with_context(|| format!("writing {}", tmp.display()));
            }
            staged.push((tmp, dir.join(name)));
        }
        for (tmp, fin) in &staged {
            fs::rename(tmp, fin).with_context(|| format!("renaming into {}", fin.display()))?;
        }
        Ok(staged.into_iter().map(|(_, f)| f).collect())
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub started: String,
    pub finished: String,
    /// Resolved options, keys sorted.
    pub options: Value,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Options without the keys that do not affect results.
pub fn resolved_options<T: Serialize>(options: &T) -> Result<Value> {
    let mut value = serde_json::to_value(options)?;
    if let Value::Object(map) = &mut value {
        map.remove("out");
        map.remove("threads");
    }
    Ok(value)
}

/// SHA-256 of the compact JSON encoding. `serde_json` maps keep their keys
/// sorted, so the digest ignores the order options were given in.
pub fn digest(options: &Value) -> String {
    let bytes = serde_json::to_vec(options).expect("JSON values always serialize");
    hex::encode(Sha256::digest(&bytes))
}

pub fn manifest<T: Serialize>(command: &str, options: &T, seed: u64, started: String) -> Result<Manifest> {
    let options = resolved_options(options)?;
    Ok(Manifest {
        command: command.to_string(),
        config_digest: digest(&options),
        seed,
        version: format!("sapca {}", env!("CARGO_PKG_VERSION")),
        started,
        finished: now(),
        options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"seed":1,"input":"x.csv","r":2}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"r":2,"input":"x.csv","seed":1}"#).unwrap();
        assert_eq!(digest(&a), digest(&b));
        let c: Value = serde_json::from_str(r#"{"r":3,"input":"x.csv","seed":1}"#).unwrap();
        assert_ne!(digest(&a), digest(&c));
    }

    #[test]
    fn out_and_threads_are_not_digested() {
        #[derive(Serialize)]
        struct O {
            out: String,
            threads: usize,
            seed: u64,
        }
        let a = resolved_options(&O { out: "a".into(), threads: 1, seed: 4 }).unwrap();
        let b = resolved_options(&O { out: "b".into(), threads: 8, seed: 4 }).unwrap();
        assert_eq!(digest(&a), digest(&b));
    }
}
