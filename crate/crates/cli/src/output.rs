use std::fs;
use std::path::Path;

use anyhow::Context;
use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// A file to be written under the output directory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn sorted(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sorted(v))).collect::<Map<_, _>>())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

/// Pretty JSON with keys sorted at every level and a trailing newline.
pub fn json_bytes(v: Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&sorted(v)).expect("JSON values always serialize");
    bytes.push(b'\n');
    bytes
}

pub fn json_artifact(name: impl Into<String>, v: Value) -> Artifact {
    Artifact {
        name: name.into(),
        bytes: json_bytes(v),
    }
}

pub fn csv_artifact(name: impl Into<String>, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(Artifact {
        name: name.into(),
        bytes: w.into_inner().context("flushing CSV buffer")?,
    })
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite float")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Finite floats as numbers, anything else as null.
pub fn jf(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn jvec(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| jf(x)).collect())
}

pub fn jdvec(v: &DVector<f64>) -> Value {
    jvec(v.as_slice())
}

pub fn jmat(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| jf(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Directory name for one ε, e.g. `eps_0.12`.
pub fn eps_dir(eps: f64) -> String {
    format!("eps_{}", num(eps))
}

/// Writes every artifact through a temporary file and a rename.
pub fn write_all(out: &Path, artifacts: &[Artifact]) -> anyhow::Result<()> {
    for a in artifacts {
        let path = out.join(&a.name);
        let dir = path.parent().unwrap_or(out);
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let tmp = path.with_extension("partial");
        fs::write(&tmp, &a.bytes).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("renaming into {}", path.display()))?;
    }
    Ok(())
}
