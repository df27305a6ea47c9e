//! JSON Lines record formats and CSV output.
//!
//! Logit Gaussians, one per line:
//!
//! ```text
//! {"id":"a","label":2,"mean":[0.1,0.4,-0.5],"cov":{"type":"diag","values":[1,1,1]}}
//! {"id":"b","mean":[0,0],"cov":{"type":"full","values":[1,0.5,0.5,1]}}
//! {"id":"c","mean":[0,0],"cov":{"type":"kron","scale":0.3,"U":[1,0,0,1]}}
//! ```
//!
//! `full` and `U` are row-major `K x K`. Dirichlet records are
//! `{"id":"a","alpha":[1,2,3]}`; `id` and `label` are optional there.
//! Blank lines are skipped; line numbers in errors are 1-based.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dist::{Covariance, DirichletParams, LogitGaussian};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CovRecord {
    Full { values: Vec<f64> },
    Diag { values: Vec<f64> },
    Kron {
        scale: f64,
        #[serde(rename = "U")]
        u: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    pub mean: Vec<f64>,
    pub cov: CovRecord,
}

fn square(values: &[f64], k: usize, what: &str) -> Result<DMatrix<f64>> {
    if values.len() != k * k {
        return Err(Error::dimension(format!(
            "{what} has {} entries, expected {} for K = {k}",
            values.len(),
            k * k
        )));
    }
    Ok(DMatrix::from_row_slice(k, k, values))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl LogitRecord {
    pub fn from_gaussian(id: impl Into<String>, label: Option<usize>, g: &LogitGaussian) -> Self {
        let cov = match g.cov() {
            Covariance::Full(m) => CovRecord::Full { values: row_major(m) },
            Covariance::Diagonal(d) => CovRecord::Diag { values: d.clone() },
            Covariance::ScaledKron { scale, u } => CovRecord::Kron {
                scale: *scale,
                u: row_major(u),
            },
        };
        Self {
            id: id.into(),
            label,
            mean: g.mean().to_vec(),
            cov,
        }
    }

    pub fn k(&self) -> usize {
        self.mean.len()
    }

    /// Validated Gaussian; errors carry the record id.
    pub fn to_gaussian(&self) -> Result<LogitGaussian> {
        let k = self.k();
        let cov = match &self.cov {
            CovRecord::Full { values } => square(values, k, "full covariance").map(Covariance::Full),
            CovRecord::Diag { values } => Ok(Covariance::Diagonal(values.clone())),
            CovRecord::Kron { scale, u } => square(u, k, "U").map(|u| Covariance::ScaledKron { scale: *scale, u }),
        };
        cov.and_then(|c| LogitGaussian::new(self.mean.clone(), c))
            .map_err(|e| e.in_record(&self.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    pub alpha: Vec<f64>,
}

impl DirichletRecord {
    pub fn to_params(&self, fallback_id: &str) -> Result<DirichletParams> {
        DirichletParams::new(self.alpha.clone())
            .map_err(|e| e.in_record(self.id.as_deref().unwrap_or(fallback_id)))
    }
}

/// A parsed record with its 1-based source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Line<T> {
    pub line: usize,
    pub record: T,
}

pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<Line<T>>> {
    let mut out = Vec::new();
    for (i, text) in reader.lines().enumerate() {
        let line = i + 1;
        let text = text.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if text.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&text).map_err(|e| Error::Parse { line, message: e.to_string() })?;
        out.push(Line { line, record });
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &std::path::Path) -> Result<Vec<Line<T>>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_jsonl(std::io::BufReader::new(f))
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(|e| Error::Io(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Rejects files whose records disagree on `K`.
pub fn check_consistent_k(lines: &[Line<LogitRecord>]) -> Result<usize> {
    let Some(first) = lines.first() else {
        return Err(Error::Empty("record file"));
    };
    let k = first.record.k();
    for l in lines {
        if l.record.k() != k {
            return Err(Error::Parse {
                line: l.line,
                message: format!("record {} has K = {}, earlier records have K = {k}", l.record.id, l.record.k()),
            });
        }
    }
    Ok(k)
}

/// Writes rows as CSV with a header, `\n` line endings.
pub fn write_csv<T: Serialize>(writer: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
