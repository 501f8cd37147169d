//! CSV and JSON artifacts.
//!
//! Every JSON document carries `schema_version` and a `kind`. Floats in CSV
//! use Rust's shortest round-trip formatting, so a write followed by a read
//! reproduces values bit for bit and repeated runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::certify::ControlLaw;
use crate::error::{Error, Result};
use crate::pde::{FieldMeta, Grid, GridMeta, SpaceTimeField};
use crate::simulate::PathEnsemble;

pub const SCHEMA_VERSION: u32 = 1;

/// A JSON body tagged with the schema version and document kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    pub kind: String,
    #[serde(flatten)]
    pub body: T,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Sidecar path: same stem, `.json` extension.
pub fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, body: &T) -> Result<()> {
    let doc = Versioned {
        schema_version: SCHEMA_VERSION,
        kind: kind.to_string(),
        body,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

/// Reads a document written by [`write_json`], checking version and kind.
pub fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = read_text(path)?;
    let doc: Versioned<T> = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "{}: schema_version {} (expected {SCHEMA_VERSION})",
            path.display(),
            doc.schema_version
        )));
    }
    if doc.kind != kind {
        return Err(Error::Format(format!(
            "{}: kind `{}` (expected `{kind}`)",
            path.display(),
            doc.kind
        )));
    }
    Ok(doc.body)
}

fn coord_header(prefix: &str, n: usize) -> String {
    (1..=n).map(|i| format!(",{prefix}{i}")).collect()
}

/// Appends `,v` for each value and ends the row.
fn finish_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

/// Data rows of a CSV as floats, after checking the header.
fn parse_csv(path: &Path, header: &str) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        other => {
            return Err(Error::Format(format!(
                "{}: header {:?} (expected {header:?})",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, line)| {
            let row: Vec<f64> = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("{}: line {}: {e}", path.display(), i + 2)))?;
            if row.len() != width {
                return Err(Error::Format(format!(
                    "{}: line {} has {} columns (expected {width})",
                    path.display(),
                    i + 2,
                    row.len()
                )));
            }
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDoc {
    pub grid: GridMeta,
    pub times: Vec<f64>,
    pub meta: FieldMeta,
}

/// Writes `t,x1..xn,value` rows (time-major, then node index) and the sidecar.
pub fn write_field(path: &Path, field: &SpaceTimeField, grid: &Grid) -> Result<()> {
    if field.node_count() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            actual: field.node_count(),
        });
    }
    let n = grid.dim();
    let mut out = format!("t{},value\n", coord_header("x", n));
    let mut x = vec![0.0; n];
    for (&t, slice) in field.times().iter().zip(field.slices()) {
        for (p, &v) in slice.iter().enumerate() {
            grid.coords_into(p, &mut x);
            let _ = write!(out, "{t}");
            finish_row(&mut out, x.iter().copied().chain([v]));
        }
    }
    write_text(path, &out)?;
    let doc = FieldDoc {
        grid: grid.meta(),
        times: field.times().to_vec(),
        meta: field.meta.clone(),
    };
    write_json(&sidecar(path), "field", &doc)
}

pub fn read_field(path: &Path) -> Result<(SpaceTimeField, Grid)> {
    let doc: FieldDoc = read_json(&sidecar(path), "field")?;
    let grid = Grid::from_meta(&doc.grid)?;
    let n = grid.dim();
    let rows = parse_csv(path, &format!("t{},value", coord_header("x", n)))?;
    let nodes = grid.node_count();
    if rows.len() != nodes * doc.times.len() {
        return Err(Error::Format(format!(
            "{}: {} rows for {} times x {nodes} nodes",
            path.display(),
            rows.len(),
            doc.times.len()
        )));
    }
    let mut slices = Vec::with_capacity(doc.times.len());
    for (j, chunk) in rows.chunks(nodes).enumerate() {
        if chunk.iter().any(|r| r[0] != doc.times[j]) {
            return Err(Error::Format(format!(
                "{}: time column disagrees with the sidecar",
                path.display()
            )));
        }
        slices.push(chunk.iter().map(|r| r[n + 1]).collect());
    }
    Ok((SpaceTimeField::new(doc.times, slices, doc.meta)?, grid))
}

/// Sidecar of an eigenfunction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDoc {
    /// `numeric` or `analytic`.
    pub source: String,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub grid: GridMeta,
}

/// Writes `x1..xn,psi0` for every node (`psi` has one value per node) and the sidecar.
pub fn write_eigen(path: &Path, grid: &Grid, psi: &[f64], doc: &EigenDoc) -> Result<()> {
    if psi.len() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            actual: psi.len(),
        });
    }
    let n = grid.dim();
    let mut out = format!("{},psi0\n", &coord_header("x", n)[1..]);
    let mut x = vec![0.0; n];
    for (p, &v) in psi.iter().enumerate() {
        grid.coords_into(p, &mut x);
        let _ = write!(out, "{}", x[0]);
        finish_row(&mut out, x[1..].iter().copied().chain([v]));
    }
    write_text(path, &out)?;
    write_json(&sidecar(path), "eigen", doc)
}

pub fn read_eigen(path: &Path) -> Result<(EigenDoc, Grid, Vec<f64>)> {
    let doc: EigenDoc = read_json(&sidecar(path), "eigen")?;
    let grid = Grid::from_meta(&doc.grid)?;
    let n = grid.dim();
    let rows = parse_csv(path, &format!("{},psi0", &coord_header("x", n)[1..]))?;
    if rows.len() != grid.node_count() {
        return Err(Error::Format(format!(
            "{}: {} rows for {} nodes",
            path.display(),
            rows.len(),
            grid.node_count()
        )));
    }
    let psi = rows.iter().map(|r| r[n]).collect();
    Ok((doc, grid, psi))
}

/// Writes `t,x1..xn,residual,u1..um`, one row per checked node and slice.
pub fn write_control_law(path: &Path, law: &ControlLaw, grid: &Grid) -> Result<()> {
    let n = grid.dim();
    let m = law.input_dim;
    let mut out = format!(
        "t{},residual{}\n",
        coord_header("x", n),
        coord_header("u", m)
    );
    let mut x = vec![0.0; n];
    for (j, &t) in law.times.iter().enumerate() {
        for (k, &p) in law.nodes.iter().enumerate() {
            grid.coords_into(p, &mut x);
            let u = &law.u[j][k * m..(k + 1) * m];
            let _ = write!(out, "{t}");
            finish_row(
                &mut out,
                x.iter()
                    .copied()
                    .chain([law.residual[j][k]])
                    .chain(u.iter().copied()),
            );
        }
    }
    write_text(path, &out)
}

/// Writes `path_id,step,t,x1..xn` for every stored state.
pub fn write_paths(path: &Path, ensemble: &PathEnsemble) -> Result<()> {
    let n = ensemble.paths.first().map_or(0, |p| p.states[0].len());
    let mut out = format!("path_id,step,t{}\n", coord_header("x", n));
    for (id, rec) in ensemble.paths.iter().enumerate() {
        for (&k, x) in rec.steps.iter().zip(&rec.states) {
            let t = ensemble.t0 + k as f64 * ensemble.dt;
            let _ = write!(out, "{id},{k}");
            finish_row(&mut out, [t].into_iter().chain(x.iter().copied()));
        }
    }
    write_text(path, &out)
}
