//! On-disk formats: versioned instance / run documents (JSON), traces and
//! audit points (JSON lines).

use std::io::{BufRead, Write};

use chainlb_core::instance::FiniteSumInstance;
use chainlb_core::oracle::{AuditReport, PointStore, TraceRecord};
use chainlb_core::solvers::{RunResult, SolverSpec};
use serde::{Deserialize, Serialize};

pub const INSTANCE_SCHEMA: &str = "chainlb.instance/v1";
pub const RUN_SCHEMA: &str = "chainlb.run/v1";
pub const FIT_SCHEMA: &str = "chainlb.fit/v1";
pub const VERIFY_SCHEMA: &str = "chainlb.verify/v1";
pub const PLOT_SCHEMA: &str = "chainlb.plot/v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema {found:?} (expected {expected:?})")]
    Schema { expected: &'static str, found: String },
    #[error("line {line}: {source}")]
    Line { line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub schema: String,
    pub seed: u64,
    pub instance: FiniteSumInstance,
}

impl InstanceDoc {
    pub fn new(instance: FiniteSumInstance, seed: u64) -> Self {
        Self { schema: INSTANCE_SCHEMA.into(), seed, instance }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance documents are always serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, FormatError> {
        let doc: Self = serde_json::from_str(s)?;
        check_schema(&doc.schema, INSTANCE_SCHEMA)?;
        Ok(doc)
    }
}

fn check_schema(found: &str, expected: &'static str) -> Result<(), FormatError> {
    if found == expected {
        Ok(())
    } else {
        Err(FormatError::Schema { expected, found: found.into() })
    }
}

/// Everything `run` produces besides the trace itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDoc {
    pub schema: String,
    pub solver: SolverSpec,
    pub budget: u64,
    pub target: f64,
    pub lower_bound: u64,
    pub initial_point_id: Option<u64>,
    pub result: Option<RunResult>,
    /// Set when the run aborted.
    pub error: Option<String>,
    pub audit: Option<AuditReport>,
}

impl RunDoc {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run documents are always serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, FormatError> {
        let doc: Self = serde_json::from_str(s)?;
        check_schema(&doc.schema, RUN_SCHEMA)?;
        Ok(doc)
    }
}

pub fn write_trace<W: Write>(mut w: W, trace: &[TraceRecord]) -> Result<(), FormatError> {
    for r in trace {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_lines<R: BufRead, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| FormatError::Line { line: k + 1, source })?);
    }
    Ok(out)
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<TraceRecord>, FormatError> {
    read_lines(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub id: u64,
    pub point: Vec<f64>,
}

pub fn write_points<W: Write>(mut w: W, store: &PointStore) -> Result<(), FormatError> {
    for (id, p) in store.iter() {
        serde_json::to_writer(&mut w, &PointRecord { id, point: p.to_vec() })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points<R: BufRead>(r: R) -> Result<PointStore, FormatError> {
    let recs: Vec<PointRecord> = read_lines(r)?;
    Ok(PointStore::from_points(recs.into_iter().map(|p| (p.id, p.point))))
}
