//! Verify-suite runner with per-case timing, text and JSON rendering.

use std::fmt::Write as _;
use std::time::Instant;

use chainlb_core::verify::{case_ids, run_case, CaseResult, CaseStatus, Grid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::VERIFY_SCHEMA;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedCase {
    #[serde(flatten)]
    pub case: CaseResult,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema: String,
    pub grid: Grid,
    pub cases: Vec<TimedCase>,
    pub elapsed_ms: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.case.status == CaseStatus::Pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verify reports are always serializable")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.cases {
            let status = match c.case.status {
                CaseStatus::Pass => "PASS",
                CaseStatus::Fail => "FAIL",
            };
            let _ = writeln!(
                s,
                "{status} {:8} {:>7} checks {:>9.1} ms  {}",
                c.case.id, c.case.checks, c.elapsed_ms, c.case.title
            );
            if let Some(w) = &c.case.witness {
                let _ = writeln!(s, "     witness: {w}");
            }
        }
        let failed = self.cases.iter().filter(|c| c.case.status == CaseStatus::Fail).count();
        let _ = writeln!(s, "{} cases, {failed} failed, {:.1} ms", self.cases.len(), self.elapsed_ms);
        s
    }
}

/// Runs all cases concurrently on the current rayon pool.
pub fn run_verify(grid: &Grid) -> VerifyReport {
    let start = Instant::now();
    let ids: Vec<&str> = case_ids().collect();
    let cases = ids
        .par_iter()
        .map(|id| {
            let t = Instant::now();
            let case = run_case(id, grid).expect("enumerated id");
            TimedCase { case, elapsed_ms: t.elapsed().as_secs_f64() * 1e3 }
        })
        .collect();
    VerifyReport { schema: VERIFY_SCHEMA.into(), grid: grid.clone(), cases, elapsed_ms: start.elapsed().as_secs_f64() * 1e3 }
}
