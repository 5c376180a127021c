//! Artifact writers: record CSVs, dataset CSVs, and JSON reports that echo
//! the fully resolved configuration and library version.

use anyhow::{Context, Result};
use needlet::harness::ExperimentRecord;
use needlet::special::SpherePoint;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Wraps a command's payload with the version string and resolved config.
#[derive(Serialize)]
pub struct Report<C: Serialize, P: Serialize> {
    pub version: &'static str,
    pub command: &'static str,
    pub config: C,
    #[serde(flatten)]
    pub payload: P,
}

pub fn write_json<C: Serialize, P: Serialize>(
    out_dir: &Path,
    file: &str,
    report: &Report<C, P>,
) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let path = out_dir.join(file);
    let body = serde_json::to_string_pretty(report)?;
    fs::write(&path, body + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Record CSV schema: the core columns m,seed,n,lambda,q,error,wall_ms plus
/// the documented extras error_untruncated and nonzeros.
pub fn write_records_csv<'a>(
    out_dir: &Path,
    file: &str,
    records: impl Iterator<Item = &'a ExperimentRecord>,
) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(file);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "m",
        "seed",
        "n",
        "lambda",
        "q",
        "error",
        "wall_ms",
        "error_untruncated",
        "nonzeros",
    ])?;
    for r in records {
        w.write_record(&[
            r.m.to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            r.lambda.to_string(),
            r.q.map(|q| q.to_string()).unwrap_or_default(),
            r.error.to_string(),
            r.wall_ms.to_string(),
            r.error_untruncated.to_string(),
            r.nonzeros.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

/// Dataset CSV schema: x1,x2,x3,y.
pub fn write_dataset_csv(
    out_dir: &Path,
    file: &str,
    points: &[SpherePoint],
    labels: &[f64],
) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(file);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["x1", "x2", "x3", "y"])?;
    for (p, y) in points.iter().zip(labels) {
        let c = p.coords();
        w.write_record(&[
            c[0].to_string(),
            c[1].to_string(),
            c[2].to_string(),
            y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

/// Reads a dataset CSV produced by `simulate` (or hand-made, same header).
pub fn read_dataset_csv(path: &Path) -> Result<(Vec<SpherePoint>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening dataset {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let expected = ["x1", "x2", "x3", "y"];
    if headers.iter().ne(expected) {
        anyhow::bail!("dataset header must be x1,x2,x3,y; got {:?}", headers);
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let parse = |j: usize| -> Result<f64> {
            row.get(j)
                .with_context(|| format!("row {i}: missing column {j}"))?
                .trim()
                .parse::<f64>()
                .with_context(|| format!("row {i}: bad number in column {j}"))
        };
        let point = SpherePoint::new(vec![parse(0)?, parse(1)?, parse(2)?])
            .with_context(|| format!("row {i}: point is not on the unit sphere"))?;
        points.push(point);
        labels.push(parse(3)?);
    }
    if points.is_empty() {
        anyhow::bail!("dataset {} has no rows", path.display());
    }
    Ok((points, labels))
}
