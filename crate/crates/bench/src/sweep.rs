//! Parameter sweeps: factory grid × solvers × seeds, run in a work pool,
//! collected in enumeration order into a stable CSV.

use std::collections::BTreeMap;
use std::io::Write;

use chainlb_core::instance::make_instance;
use chainlb_core::oracle::OracleSession;
use chainlb_core::solvers::{run_spec, Momentum, RunError, RunOptions, RunStatus, SolverKind, SolverParams, SolverSpec};
use chainlb_core::Family;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const CSV_HEADER: [&str; 12] =
    ["family", "n", "L", "sigma", "delta", "eps", "solver", "seed", "ifo_to_target", "lower_bound", "ratio", "status"];
pub const SWEEP_SCHEMA: &str = "chainlb.sweep/v1";
pub const DEFAULT_BUDGET_MULTIPLIER: f64 = 20.0;

fn default_multiplier() -> f64 {
    DEFAULT_BUDGET_MULTIPLIER
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_delta() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverEntry {
    pub name: String,
    /// Overrides on top of the defaults (`step`, `momentum`, `epoch_len`, ...).
    #[serde(default)]
    pub hyper: BTreeMap<String, f64>,
}

impl SolverEntry {
    pub fn named(name: &str) -> Self {
        Self { name: name.into(), hyper: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: Family,
    pub n: Vec<usize>,
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    /// `σ`, or `B` for the convex families.
    #[serde(alias = "B")]
    pub sigma: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: Vec<f64>,
    pub eps: Vec<f64>,
    pub solvers: Vec<SolverEntry>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_multiplier")]
    pub budget_multiplier: f64,
}

/// A config file holds either one sweep or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepFile {
    Many { sweeps: Vec<SweepConfig> },
    One(SweepConfig),
}

impl SweepFile {
    pub fn into_sweeps(self) -> Vec<SweepConfig> {
        match self {
            SweepFile::Many { sweeps } => sweeps,
            SweepFile::One(c) => vec![c],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Reached,
    Exhausted,
    /// Reached the target before the certified lower bound, or the residual
    /// dropped below a live certificate floor.
    Violated,
    /// The run aborted (non-finite iterate, oracle error, ...).
    Failed,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Reached => "reached",
            RowStatus::Exhausted => "exhausted",
            RowStatus::Violated => "violated",
            RowStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Family the factory actually produced (may be an Ω(n) fallback).
    pub family: Family,
    pub n: usize,
    pub l: f64,
    pub sigma: f64,
    pub delta: f64,
    pub eps: f64,
    pub solver: String,
    pub seed: u64,
    pub ifo_to_target: Option<u64>,
    pub lower_bound: u64,
    pub budget: u64,
    pub status: RowStatus,
    pub detail: Option<String>,
}

impl SweepRow {
    pub fn ratio(&self) -> Option<f64> {
        self.ifo_to_target.map(|k| k as f64 / self.lower_bound.max(1) as f64)
    }

    /// Successful run that beat the certified bound, or a flagged violation.
    pub fn is_violation(&self) -> bool {
        self.status == RowStatus::Violated || self.ifo_to_target.is_some_and(|k| k < self.lower_bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub family: Family,
    pub n: usize,
    pub l: f64,
    pub sigma: f64,
    pub delta: f64,
    pub eps: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<Skipped>,
}

impl RateReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.is_violation()).count()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status == RowStatus::Failed).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.family.tag().to_string(),
                r.n.to_string(),
                r.l.to_string(),
                r.sigma.to_string(),
                r.delta.to_string(),
                r.eps.to_string(),
                r.solver.clone(),
                r.seed.to_string(),
                r.ifo_to_target.map(|k| k.to_string()).unwrap_or_default(),
                r.lower_bound.to_string(),
                r.ratio().map(|v| v.to_string()).unwrap_or_default(),
                r.status.as_str().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// One CSV row read back (enough to refit).
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub family: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub sigma: f64,
    pub delta: f64,
    pub eps: f64,
    pub solver: String,
    pub seed: u64,
    pub ifo_to_target: Option<u64>,
    pub lower_bound: u64,
    pub ratio: Option<f64>,
    pub status: String,
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<CsvRow>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HyperError {
    #[error("unknown solver {0:?}")]
    UnknownSolver(String),
    #[error("solver {solver} has no hyperparameter {key:?}")]
    UnknownKey { solver: &'static str, key: String },
    #[error("hyperparameter {key} = {value} is invalid")]
    BadValue { key: String, value: f64 },
}

fn as_count(key: &str, v: f64) -> Result<usize, HyperError> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e12 {
        Ok(v as usize)
    } else {
        Err(HyperError::BadValue { key: key.into(), value: v })
    }
}

fn as_positive(key: &str, v: f64) -> Result<f64, HyperError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(HyperError::BadValue { key: key.into(), value: v })
    }
}

/// Applies hyperparameter overrides to a default parameter set.
/// `momentum` < 0 selects the `k/(k+3)` schedule.
pub fn apply_overrides(mut p: SolverParams, hyper: &BTreeMap<String, f64>) -> Result<SolverParams, HyperError> {
    let name = p.kind().name();
    for (key, &v) in hyper {
        let unknown = || HyperError::UnknownKey { solver: name, key: key.clone() };
        match (&mut p, key.as_str()) {
            (SolverParams::Gd { step } | SolverParams::Sgd { step }, "step") => *step = as_positive(key, v)?,
            (SolverParams::Agd { step, .. }, "step") => *step = as_positive(key, v)?,
            (SolverParams::Agd { momentum, .. }, "momentum") => {
                *momentum = if v < 0.0 { Momentum::Schedule } else { Momentum::Constant(v) }
            }
            (SolverParams::Svrg { step, .. } | SolverParams::KatyushaX { step, .. }, "step") => *step = as_positive(key, v)?,
            (SolverParams::Svrg { epoch_len, .. } | SolverParams::KatyushaX { epoch_len, .. }, "epoch_len") => {
                *epoch_len = as_count(key, v)?
            }
            (SolverParams::KatyushaX { momentum, .. }, "momentum") => *momentum = v,
            (SolverParams::Spider { lipschitz, .. }, "lipschitz") => *lipschitz = as_positive(key, v)?,
            (SolverParams::Spider { epsilon, .. }, "epsilon") => *epsilon = as_positive(key, v)?,
            (SolverParams::Spider { n0, .. }, "n0") => *n0 = as_positive(key, v)?,
            (SolverParams::Spider { q, .. }, "q") => *q = as_count(key, v)?,
            (SolverParams::Spider { batch, .. }, "batch") => *batch = as_count(key, v)?,
            _ => return Err(unknown()),
        }
    }
    Ok(p)
}

/// One expanded grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub family: Family,
    pub n: usize,
    pub l: f64,
    pub sigma: f64,
    pub delta: f64,
    pub eps: f64,
    pub solver: SolverEntry,
    pub seed: u64,
    pub budget_multiplier: f64,
}

/// Expands a config in a fixed order: n, L, σ, Δ, ε, solver, seed.
pub fn expand(cfg: &SweepConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &n in &cfg.n {
        for &l in &cfg.l {
            for &sigma in &cfg.sigma {
                for &delta in &cfg.delta {
                    for &eps in &cfg.eps {
                        for solver in &cfg.solvers {
                            for &seed in &cfg.seeds {
                                jobs.push(Job {
                                    family: cfg.family,
                                    n,
                                    l,
                                    sigma,
                                    delta,
                                    eps,
                                    solver: solver.clone(),
                                    seed,
                                    budget_multiplier: cfg.budget_multiplier,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    jobs
}

pub fn budget_for(lower_bound: u64, multiplier: f64) -> u64 {
    ((lower_bound.max(1) as f64) * multiplier).ceil().max(1.0) as u64
}

pub enum JobOutcome {
    Row(SweepRow),
    Skip(Skipped),
}

/// Runs one grid point on a fresh instance and session.
pub fn run_job(job: &Job) -> Result<JobOutcome, HyperError> {
    let kind = SolverKind::from_name(&job.solver.name).ok_or_else(|| HyperError::UnknownSolver(job.solver.name.clone()))?;
    let inst = match make_instance(job.family, job.n, job.l, job.sigma, job.delta, job.eps) {
        Ok(i) => i,
        Err(e) => {
            return Ok(JobOutcome::Skip(Skipped {
                family: job.family,
                n: job.n,
                l: job.l,
                sigma: job.sigma,
                delta: job.delta,
                eps: job.eps,
                reason: e.to_string(),
            }))
        }
    };
    let target = inst.meta.target_epsilon;
    let defaults = SolverSpec::defaults(kind, &inst, target, job.seed);
    let spec = SolverSpec { params: apply_overrides(defaults.params, &job.solver.hyper)?, seed: job.seed };
    let lower_bound = inst.meta.lower_bound_ifo;
    let budget = budget_for(lower_bound, job.budget_multiplier);
    let mut session = OracleSession::new(&inst, job.seed);
    let mut opts = RunOptions::new(budget, target);
    opts.record_curves = false;
    let res = run_spec(&spec, &mut session, opts, None);
    let (status, ifo, detail) = match res {
        Ok(r) => match r.status {
            RunStatus::Reached => (RowStatus::Reached, r.ifo_to_target, None),
            RunStatus::Exhausted => (RowStatus::Exhausted, None, None),
        },
        Err(e @ RunError::CertificateViolated { ifo, .. }) => (RowStatus::Violated, Some(ifo), Some(e.to_string())),
        Err(e) => (RowStatus::Failed, None, Some(e.to_string())),
    };
    Ok(JobOutcome::Row(SweepRow {
        family: inst.family,
        n: job.n,
        l: job.l,
        sigma: job.sigma,
        delta: job.delta,
        eps: job.eps,
        solver: kind.name().into(),
        seed: job.seed,
        ifo_to_target: ifo,
        lower_bound,
        budget,
        status,
        detail,
    }))
}

/// Runs every job of every sweep on the current rayon pool; rows come back
/// in enumeration order regardless of completion order.
pub fn run_sweeps(sweeps: &[SweepConfig]) -> Result<RateReport, HyperError> {
    let jobs: Vec<Job> = sweeps.iter().flat_map(expand).collect();
    let outcomes: Vec<Result<JobOutcome, HyperError>> = jobs.par_iter().map(run_job).collect();
    let mut report = RateReport::default();
    for o in outcomes {
        match o? {
            JobOutcome::Row(r) => report.rows.push(r),
            JobOutcome::Skip(s) => {
                if !report.skipped.contains(&s) {
                    report.skipped.push(s);
                }
            }
        }
    }
    Ok(report)
}

/// Same as [`run_sweeps`] on a dedicated pool of `jobs` threads.
pub fn run_sweeps_with_jobs(sweeps: &[SweepConfig], jobs: usize) -> anyhow::Result<RateReport> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(|| run_sweeps(sweeps))?)
}
