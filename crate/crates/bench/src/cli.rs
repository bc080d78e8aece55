//! `chainlb` command line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chainlb_core::instance::{make_instance, FiniteSumInstance};
use chainlb_core::oracle::{span_audit, OracleConfig, OracleSession, AUDIT_TOLERANCE};
use chainlb_core::solvers::{run_spec, RunError, RunOptions, RunStatus, SolverKind, SolverSpec};
use chainlb_core::verify::Grid;
use chainlb_core::Family;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::fit::{fit_exponent, Fit, Predictor};
use crate::format::{read_points, read_trace, write_points, write_trace, InstanceDoc, RunDoc, FIT_SCHEMA, RUN_SCHEMA};
use crate::plot::sweep_plots;
use crate::rates::{fit_curve, lower_bound_curve, CurvePoint};
use crate::report::run_verify;
use crate::sweep::{apply_overrides, budget_for, read_csv, run_sweeps_with_jobs, SolverEntry, SweepConfig, SweepFile, DEFAULT_BUDGET_MULTIPLIER};

/// Exit status for a failed property (verification, audit, ratio < 1).
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for rejected inputs (factory preconditions, bad flags).
pub const EXIT_REJECTED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "chainlb", version, about = "Hard finite-sum instances, IFO oracle, certified lower bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorArg {
    N,
    Eps,
}

impl From<PredictorArg> for Predictor {
    fn from(p: PredictorArg) -> Self {
        match p {
            PredictorArg::N => Predictor::N,
            PredictorArg::Eps => Predictor::Eps,
        }
    }
}

fn parse_family(s: &str) -> Result<Family, String> {
    Family::from_tag(&s.to_ascii_uppercase()).ok_or_else(|| {
        format!("unknown family {s:?}; expected one of {}", Family::ALL.map(|f| f.tag()).join(", "))
    })
}

fn parse_hyper(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().parse().map_err(|e| format!("{k}: {e}"))?))
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long, value_parser = parse_family)]
    pub family: Option<Family>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "L", default_value_t = 1.0)]
    pub l: f64,
    /// σ, or B for the convex families.
    #[arg(long, alias = "B", default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long)]
    pub eps: Option<f64>,
}

impl InstanceArgs {
    fn build(&self) -> Result<std::result::Result<FiniteSumInstance, String>> {
        let family = self.family.context("--family is required")?;
        let n = self.n.context("--n is required")?;
        let eps = self.eps.context("--eps is required")?;
        Ok(make_instance(family, n, self.l, self.sigma, self.delta, eps).map_err(|e| e.to_string()))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the property suite.
    Verify {
        /// Small grid (smoke test).
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build an instance and emit its JSON document.
    MakeInstance {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (`instance.json`); stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one solver, emitting the trace and the result.
    Run {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Instance JSON instead of the family flags.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value = "svrg")]
        solver: String,
        /// Hyperparameter override, `key=value` (repeatable).
        #[arg(long, value_parser = parse_hyper)]
        hyper: Vec<(String, f64)>,
        #[arg(long, default_value_t = DEFAULT_BUDGET_MULTIPLIER)]
        budget_multiplier: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Store full points and run the span audit.
        #[arg(long)]
        audit: bool,
    },
    /// Span audit of a `run --audit` output directory.
    Audit {
        dir: PathBuf,
        #[arg(long, default_value_t = AUDIT_TOLERANCE)]
        tol: f64,
    },
    /// Parameter sweep → results CSV, plot description.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_family)]
        family: Option<Family>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long = "L", value_delimiter = ',')]
        l: Vec<f64>,
        #[arg(long, alias = "B", value_delimiter = ',')]
        sigma: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        solver: Vec<String>,
        /// Overrides the seeds of every sweep with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget_multiplier: Option<f64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Log–log fit of certified bounds (from the factories) or of a results CSV.
    Fit {
        /// Results CSV; fits lower bound and measured IFO vs n per group.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_parser = parse_family)]
        family: Option<Family>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
        #[arg(long, alias = "B", default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, value_enum)]
        predictor: Option<PredictorArg>,
        /// Divide out the logarithmic factor of the strongly convex bound.
        #[arg(long)]
        normalize_log: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(k) => Ok(rayon::ThreadPoolBuilder::new().num_threads(k).build()?.install(f)),
        None => Ok(f()),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = dir.join(name);
    fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}

/// Executes a parsed command line; returns the process exit status.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Verify { quick, jobs, out: dir, seed } => {
            let mut grid = if quick { Grid::quick() } else { Grid::standard() };
            if let Some(s) = seed {
                grid.seed = s;
            }
            let report = with_pool(jobs, || run_verify(&grid))?;
            write!(out, "{}", report.to_text())?;
            if let Some(dir) = dir {
                write_file(&dir, "verify.json", &report.to_json())?;
            }
            Ok(if report.passed() { 0 } else { EXIT_FAILURE })
        }
        Command::MakeInstance { inst, seed, out: dir } => match inst.build()? {
            Ok(i) => {
                let doc = InstanceDoc::new(i, seed).to_json();
                match dir {
                    Some(dir) => {
                        let p = write_file(&dir, "instance.json", &doc)?;
                        writeln!(out, "wrote {}", p.display())?;
                    }
                    None => writeln!(out, "{doc}")?,
                }
                Ok(0)
            }
            Err(e) => {
                writeln!(out, "rejected: {e}")?;
                Ok(EXIT_REJECTED)
            }
        },
        Command::Run { inst, instance, solver, hyper, budget_multiplier, seed, out: dir, audit } => {
            let built = match instance {
                Some(p) => InstanceDoc::from_json(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?.instance,
                None => match inst.build()? {
                    Ok(i) => i,
                    Err(e) => {
                        writeln!(out, "rejected: {e}")?;
                        return Ok(EXIT_REJECTED);
                    }
                },
            };
            cmd_run(&built, &solver, hyper.into_iter().collect(), budget_multiplier, seed, dir, audit, out)
        }
        Command::Audit { dir, tol } => cmd_audit(&dir, tol, out),
        Command::Sweep { config, family, n, l, sigma, delta, eps, solver, seed, budget_multiplier, jobs, out: dir } => {
            let mut sweeps = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<SweepFile>(&text).with_context(|| format!("parsing {}", p.display()))?.into_sweeps()
                }
                None => {
                    let family = family.context("either --config or --family is required")?;
                    if n.is_empty() || eps.is_empty() {
                        bail!("--n and --eps are required without --config");
                    }
                    let solvers = if solver.is_empty() {
                        SolverKind::BUNDLED.iter().map(|k| SolverEntry::named(k.name())).collect()
                    } else {
                        solver.iter().map(|s| SolverEntry::named(s)).collect()
                    };
                    vec![SweepConfig {
                        family,
                        n,
                        l: if l.is_empty() { vec![1.0] } else { l },
                        sigma: if sigma.is_empty() { vec![1.0] } else { sigma },
                        delta: if delta.is_empty() { vec![1.0] } else { delta },
                        eps,
                        solvers,
                        seeds: vec![0],
                        budget_multiplier: DEFAULT_BUDGET_MULTIPLIER,
                    }]
                }
            };
            for s in &mut sweeps {
                if let Some(seed) = seed {
                    s.seeds = vec![seed];
                }
                if let Some(m) = budget_multiplier {
                    s.budget_multiplier = m;
                }
            }
            let jobs = jobs.unwrap_or_else(rayon::current_num_threads);
            let report = run_sweeps_with_jobs(&sweeps, jobs)?;
            for s in &report.skipped {
                writeln!(out, "skipped {} n={} L={} sigma={} delta={} eps={}: {}", s.family, s.n, s.l, s.sigma, s.delta, s.eps, s.reason)?;
            }
            let csv = report.csv_string();
            match &dir {
                Some(dir) => {
                    write_file(dir, "results.csv", &csv)?;
                    write_file(dir, "plot.json", &serde_json::to_string_pretty(&sweep_plots(&report, "results.csv"))?)?;
                    write_file(dir, "report.json", &serde_json::to_string_pretty(&report)?)?;
                }
                None => write!(out, "{csv}")?,
            }
            let reached = report.rows.iter().filter(|r| r.ifo_to_target.is_some()).count();
            writeln!(
                out,
                "{} runs, {reached} reached, {} violations, {} failed, {} skipped",
                report.rows.len(),
                report.violations(),
                report.failures(),
                report.skipped.len()
            )?;
            for r in report.rows.iter().filter(|r| r.is_violation() || r.detail.is_some()) {
                writeln!(out, "  {} n={} {} seed={}: {:?} {}", r.family, r.n, r.solver, r.seed, r.status, r.detail.as_deref().unwrap_or(""))?;
            }
            Ok(if report.violations() == 0 && report.failures() == 0 { 0 } else { EXIT_FAILURE })
        }
        Command::Fit { input, family, n, l, sigma, delta, eps, predictor, normalize_log, out: dir } => {
            let doc = match input {
                Some(p) => fit_csv(&p)?,
                None => {
                    let family = family.context("--family is required without --input")?;
                    if n.is_empty() || eps.is_empty() {
                        bail!("--n and --eps are required without --input");
                    }
                    let predictor: Predictor = match predictor {
                        Some(p) => p.into(),
                        None if eps.len() > n.len() => Predictor::Eps,
                        None => Predictor::N,
                    };
                    let points = match lower_bound_curve(family, &n, l, sigma, delta, &eps) {
                        Ok(p) => p,
                        Err(e) => {
                            writeln!(out, "rejected: {e}")?;
                            return Ok(EXIT_REJECTED);
                        }
                    };
                    let raw = fit_curve(&points, predictor, false)?;
                    let fit = if normalize_log { fit_curve(&points, predictor, true)? } else { raw };
                    FitDoc {
                        schema: FIT_SCHEMA.into(),
                        fits: vec![FitEntry {
                            group: format!("{family} L={l} sigma={sigma} delta={delta}"),
                            response: if normalize_log { "lower_bound / log_factor".into() } else { "lower_bound".into() },
                            predictor,
                            fit,
                            raw_fit: normalize_log.then_some(raw),
                            points: Some(points),
                        }],
                        skipped: vec![],
                    }
                }
            };
            for f in &doc.fits {
                writeln!(
                    out,
                    "{} | {} vs {:?}: slope {:.4} ± {:.4} (95% CI [{:.4}, {:.4}], {} points){}",
                    f.group,
                    f.response,
                    f.predictor,
                    f.fit.slope,
                    f.fit.stderr,
                    f.fit.ci95.0,
                    f.fit.ci95.1,
                    f.fit.points,
                    f.raw_fit.map(|r| format!(", raw slope {:.4}", r.slope)).unwrap_or_default()
                )?;
            }
            for s in &doc.skipped {
                writeln!(out, "skipped {s}")?;
            }
            if let Some(dir) = dir {
                write_file(&dir, "fit.json", &serde_json::to_string_pretty(&doc)?)?;
            }
            Ok(0)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitEntry {
    pub group: String,
    pub response: String,
    pub predictor: Predictor,
    pub fit: Fit,
    pub raw_fit: Option<Fit>,
    pub points: Option<Vec<CurvePoint>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDoc {
    pub schema: String,
    pub fits: Vec<FitEntry>,
    pub skipped: Vec<String>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Fits lower bound and median measured IFO vs n for every
/// `(family, L, σ, Δ, ε, solver)` group of a results CSV.
pub fn fit_csv(path: &Path) -> Result<FitDoc> {
    let rows = read_csv(fs::File::open(path).with_context(|| format!("opening {}", path.display()))?)?;
    type Key = (String, String, String, String, String, String);
    let mut groups: BTreeMap<Key, BTreeMap<usize, (u64, Vec<f64>)>> = BTreeMap::new();
    for r in &rows {
        let key = (r.family.clone(), r.l.to_string(), r.sigma.to_string(), r.delta.to_string(), r.eps.to_string(), r.solver.clone());
        let e = groups.entry(key).or_default().entry(r.n).or_insert((r.lower_bound, Vec::new()));
        if let Some(k) = r.ifo_to_target {
            e.1.push(k as f64);
        }
    }
    let mut doc = FitDoc { schema: FIT_SCHEMA.into(), fits: vec![], skipped: vec![] };
    for ((family, l, sigma, delta, eps, solver), mut by_n) in groups {
        let group = format!("{family} L={l} sigma={sigma} delta={delta} eps={eps} solver={solver}");
        let ns: Vec<f64> = by_n.keys().map(|&n| n as f64).collect();
        let lbs: Vec<f64> = by_n.values().map(|v| v.0 as f64).collect();
        match fit_exponent(&ns, &lbs) {
            Ok(fit) => doc.fits.push(FitEntry {
                group: group.clone(),
                response: "lower_bound".into(),
                predictor: Predictor::N,
                fit,
                raw_fit: None,
                points: None,
            }),
            Err(e) => doc.skipped.push(format!("{group} lower_bound: {e}")),
        }
        let (mx, my): (Vec<f64>, Vec<f64>) =
            by_n.iter_mut().filter(|(_, v)| !v.1.is_empty()).map(|(&n, v)| (n as f64, median(&mut v.1))).unzip();
        match fit_exponent(&mx, &my) {
            Ok(fit) => doc.fits.push(FitEntry {
                group,
                response: "median ifo_to_target".into(),
                predictor: Predictor::N,
                fit,
                raw_fit: None,
                points: None,
            }),
            Err(e) => doc.skipped.push(format!("{group} ifo_to_target: {e}")),
        }
    }
    Ok(doc)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    inst: &FiniteSumInstance,
    solver: &str,
    hyper: BTreeMap<String, f64>,
    budget_multiplier: f64,
    seed: u64,
    dir: Option<PathBuf>,
    audit: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    let kind = SolverKind::from_name(solver).with_context(|| format!("unknown solver {solver:?}"))?;
    let target = inst.meta.target_epsilon;
    let defaults = SolverSpec::defaults(kind, inst, target, seed);
    let spec = SolverSpec { params: apply_overrides(defaults.params, &hyper)?, seed };
    let lower_bound = inst.meta.lower_bound_ifo;
    let budget = budget_for(lower_bound, budget_multiplier);
    let config = if audit { OracleConfig::audit() } else { OracleConfig::default() };
    let mut session = OracleSession::with_config(inst, seed, config);
    let res = run_spec(&spec, &mut session, RunOptions::new(budget, target), None);
    let audit_report = if audit { Some(session.span_audit(AUDIT_TOLERANCE)?) } else { None };
    let (result, error) = match res {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e)),
    };
    let doc = RunDoc {
        schema: RUN_SCHEMA.into(),
        solver: spec,
        budget,
        target,
        lower_bound,
        initial_point_id: session.initial_id(),
        result: result.clone(),
        error: error.as_ref().map(|e| e.to_string()),
        audit: audit_report.clone(),
    };
    if let Some(dir) = &dir {
        write_file(dir, "instance.json", &InstanceDoc::new(inst.clone(), seed).to_json())?;
        write_file(dir, "run.json", &doc.to_json())?;
        fs::create_dir_all(dir)?;
        write_trace(std::io::BufWriter::new(fs::File::create(dir.join("trace.jsonl"))?), session.trace())?;
        if audit {
            write_points(std::io::BufWriter::new(fs::File::create(dir.join("points.jsonl"))?), session.store())?;
        }
    }
    let mut failed = false;
    match (&result, &error) {
        (Some(r), _) => {
            let ifo = r.ifo_to_target.map(|k| k.to_string()).unwrap_or_else(|| "-".into());
            writeln!(
                out,
                "{} on {} (n={}, d={}): status {}, ifo_to_target {ifo}, lower bound {lower_bound}, budget {budget}, final residual {:e}",
                kind.name(),
                inst.family,
                inst.n,
                inst.dim(),
                match r.status {
                    RunStatus::Reached => "reached",
                    RunStatus::Exhausted => "exhausted",
                },
                r.final_residual
            )?;
            if r.ifo_to_target.is_some_and(|k| k < lower_bound) {
                writeln!(out, "VIOLATION: target reached before the certified lower bound")?;
                failed = true;
            }
        }
        (None, Some(e)) => {
            writeln!(out, "{} on {}: run aborted: {e}", kind.name(), inst.family)?;
            failed = true;
            if matches!(e, RunError::CertificateViolated { .. }) {
                writeln!(out, "VIOLATION: residual below a live certificate")?;
            }
        }
        (None, None) => unreachable!(),
    }
    if let Some(a) = &audit_report {
        writeln!(out, "span audit: {} iterates, {} violations, rank {}", a.iterates_checked, a.violations.len(), a.final_rank)?;
        failed |= !a.passed();
    }
    Ok(if failed { EXIT_FAILURE } else { 0 })
}

fn cmd_audit(dir: &Path, tol: f64, out: &mut dyn Write) -> Result<i32> {
    let read = |name: &str| -> Result<String> {
        let p = dir.join(name);
        fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
    };
    let inst = InstanceDoc::from_json(&read("instance.json")?)?.instance;
    let run = RunDoc::from_json(&read("run.json")?)?;
    let open = |name: &str| -> Result<BufReader<fs::File>> {
        let p = dir.join(name);
        Ok(BufReader::new(fs::File::open(&p).with_context(|| format!("opening {}", p.display()))?))
    };
    let trace = read_trace(open("trace.jsonl")?)?;
    let store = read_points(open("points.jsonl")?)?;
    let report = match span_audit(&inst, &trace, &store, run.initial_point_id, tol) {
        Ok(r) => r,
        Err(e) => {
            writeln!(out, "audit refused: {e}")?;
            return Ok(EXIT_REJECTED);
        }
    };
    writeln!(
        out,
        "{} records, {} iterates checked, {} off-span queries, final rank {}",
        report.records,
        report.iterates_checked,
        report.off_span_queries.len(),
        report.final_rank
    )?;
    for v in &report.violations {
        writeln!(out, "span violation at step {}: residual {:e} (|x| = {:e})", v.t, v.residual, v.norm)?;
    }
    writeln!(out, "{}", if report.passed() { "PASS" } else { "FAIL" })?;
    Ok(if report.passed() { 0 } else { EXIT_FAILURE })
}
