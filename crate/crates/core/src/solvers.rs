//! Reference linear-span solvers, driven one IFO call at a time.
//!
//! Each solver is a state machine whose [`Solver::step`] issues exactly one
//! oracle query, so the driver can inspect the certificate after every
//! call. All iterates are explicit linear combinations of earlier iterates
//! and returned gradients.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{FiniteSumInstance, ResidualKind};
use crate::math::{ceil, norm, norm_sq, sqrt};
use crate::oracle::{Certificate, OracleError, OracleSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub iterate_changed: bool,
}

impl StepOutcome {
    const MOVED: Self = Self { iterate_changed: true };
    const HELD: Self = Self { iterate_changed: false };
}

pub trait Solver {
    /// Performs exactly one IFO call.
    fn step(&mut self, oracle: &mut OracleSession<'_>) -> Result<StepOutcome, OracleError>;
    fn iterate(&self) -> &[f64];
    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Momentum {
    Constant(f64),
    /// `k / (k + 3)` at outer iteration `k`.
    Schedule,
}

impl Momentum {
    fn at(&self, k: u64) -> f64 {
        match *self {
            Momentum::Constant(b) => b,
            Momentum::Schedule => k as f64 / (k as f64 + 3.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolverKind {
    Gd,
    Agd,
    Sgd,
    Svrg,
    Spider,
    KatyushaX,
}

impl SolverKind {
    /// The five bundled solvers (KatyushaX is optional).
    pub const BUNDLED: [SolverKind; 5] = [Self::Gd, Self::Agd, Self::Sgd, Self::Svrg, Self::Spider];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gd => "gd",
            Self::Agd => "agd",
            Self::Sgd => "sgd",
            Self::Svrg => "svrg",
            Self::Spider => "spider",
            Self::KatyushaX => "katyusha_x",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::Gd, Self::Agd, Self::Sgd, Self::Svrg, Self::Spider, Self::KatyushaX]
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("katyushax") && *k == Self::KatyushaX))
    }
}

/// Fully explicit solver hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum SolverParams {
    Gd { step: f64 },
    Agd { step: f64, momentum: Momentum },
    Sgd { step: f64 },
    Svrg { step: f64, epoch_len: usize },
    /// Normalized step `min(ε / (L n0 ‖v‖), 1 / (2 L n0))`, full gradient every
    /// `q` iterations, minibatch `batch` otherwise.
    Spider { lipschitz: f64, epsilon: f64, n0: f64, q: usize, batch: usize },
    KatyushaX { step: f64, epoch_len: usize, momentum: f64 },
}

impl SolverParams {
    pub fn kind(&self) -> SolverKind {
        match self {
            Self::Gd { .. } => SolverKind::Gd,
            Self::Agd { .. } => SolverKind::Agd,
            Self::Sgd { .. } => SolverKind::Sgd,
            Self::Svrg { .. } => SolverKind::Svrg,
            Self::Spider { .. } => SolverKind::Spider,
            Self::KatyushaX { .. } => SolverKind::KatyushaX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverSpec {
    pub params: SolverParams,
    pub seed: u64,
}

/// Smoothness of `F`: `max(|l|, L)` of its curvature interval.
pub fn full_smoothness(inst: &FiniteSumInstance) -> f64 {
    let (lo, hi) = inst.meta.f_interval;
    hi.max(-lo)
}

impl SolverSpec {
    /// Standard-theory defaults, computed from the instance metadata and
    /// made explicit. Full-gradient methods use the smoothness of `F`;
    /// single-sample methods the per-component smoothness; SPIDER, whose
    /// estimator averages differences, the average smoothness.
    pub fn defaults(kind: SolverKind, inst: &FiniteSumInstance, target: f64, seed: u64) -> Self {
        let n = inst.n;
        let lf = full_smoothness(inst);
        let lc = inst.component_smoothness();
        let params = match kind {
            SolverKind::Gd => SolverParams::Gd { step: 1.0 / lf },
            SolverKind::Agd => {
                let (lo, _) = inst.meta.f_interval;
                let momentum = if lo > 0.0 {
                    let rk = sqrt(lf / lo);
                    Momentum::Constant((rk - 1.0) / (rk + 1.0))
                } else {
                    Momentum::Schedule
                };
                SolverParams::Agd { step: 1.0 / lf, momentum }
            }
            SolverKind::Sgd => SolverParams::Sgd { step: 1.0 / (2.0 * lc) },
            SolverKind::Svrg => SolverParams::Svrg { step: 1.0 / (3.0 * lc), epoch_len: 2 * n },
            SolverKind::Spider => {
                let epsilon = match inst.residual_kind() {
                    ResidualKind::GradNorm => target,
                    // gradient scale matching a gap of `target`
                    ResidualKind::Gap => sqrt(2.0 * lf * target),
                };
                let r = ceil(sqrt(n as f64)) as usize;
                SolverParams::Spider { lipschitz: inst.meta.avg_smooth_l, epsilon, n0: 1.0, q: r, batch: r }
            }
            SolverKind::KatyushaX => SolverParams::KatyushaX { step: 1.0 / (3.0 * lc), epoch_len: 2 * n, momentum: 0.5 },
        };
        Self { params, seed }
    }

    pub fn kind(&self) -> SolverKind {
        self.params.kind()
    }

    pub fn build(&self, x0: Vec<f64>, n: usize) -> Box<dyn Solver> {
        match self.params {
            SolverParams::Gd { step } => Box::new(Gd::new(x0, n, step)),
            SolverParams::Agd { step, momentum } => Box::new(Agd::new(x0, n, step, momentum)),
            SolverParams::Sgd { step } => Box::new(Sgd::new(x0, n, step, self.seed)),
            SolverParams::Svrg { step, epoch_len } => Box::new(Svrg::new(x0, n, step, epoch_len, 0.0, self.seed)),
            SolverParams::Spider { lipschitz, epsilon, n0, q, batch } => {
                Box::new(Spider::new(x0, n, lipschitz, epsilon, n0, q, batch, self.seed))
            }
            SolverParams::KatyushaX { step, epoch_len, momentum } => {
                Box::new(Svrg::new(x0, n, step, epoch_len, momentum, self.seed))
            }
        }
    }
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, v) in acc.iter_mut().zip(g) {
        *a += v;
    }
}

// ---------------------------------------------------------------------------

/// Full gradient descent; the full gradient is gathered over `n` calls.
pub struct Gd {
    x: Vec<f64>,
    acc: Vec<f64>,
    g: Vec<f64>,
    next: usize,
    n: usize,
    step: f64,
}

impl Gd {
    pub fn new(x0: Vec<f64>, n: usize, step: f64) -> Self {
        let d = x0.len();
        Self { x: x0, acc: vec![0.0; d], g: vec![0.0; d], next: 0, n, step }
    }
}

impl Solver for Gd {
    fn step(&mut self, o: &mut OracleSession<'_>) -> Result<StepOutcome, OracleError> {
        o.query_into(self.next, &self.x, &mut self.g)?;
        add_into(&mut self.acc, &self.g);
        self.next += 1;
        if self.next < self.n {
            return Ok(StepOutcome::HELD);
        }
        let c = self.step / self.n as f64;
        for (x, a) in self.x.iter_mut().zip(self.acc.iter_mut()) {
            *x -= c * *a;
            *a = 0.0;
        }
        self.next = 0;
        Ok(StepOutcome::MOVED)
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn name(&self) -> &'static str {
        "gd"
    }
}

/// Nesterov's accelerated gradient: `y = x + β_k (x - x_prev)`, `x⁺ = y - η ∇F(y)`.
pub struct Agd {
    x: Vec<f64>,
    x_prev: Vec<f64>,
    y: Vec<f64>,
    acc: Vec<f64>,
    g: Vec<f64>,
    next: usize,
    k: u64,
    n: usize,
    step: f64,
    momentum: Momentum,
}

impl Agd {
    pub fn new(x0: Vec<f64>, n: usize, step: f64, momentum: Momentum) -> Self {
        let d = x0.len();
        Self {
            x_prev: x0.clone(),
            y: x0.clone(),
            x: x0,
            acc: vec![0.0; d],
            g: vec![0.0; d],
            next: 0,
            k: 0,
            n,
            step,
            momentum,
        }
    }
}

impl Solver for Agd {
    fn step(&mut self, o: &mut OracleSession<'_>) -> Result<StepOutcome, OracleError> {
        if self.next == 0 {
            let b = self.momentum.at(self.k);
            for ((y, x), xp) in self.y.iter_mut().zip(&self.x).zip(&self.x_prev) {
                *y = x + b * (x - xp);
            }
        }
        o.query_into(self.next, &self.y, &mut self.g)?;
        add_into(&mut self.acc, &self.g);
        self.next += 1;
        if self.next < self.n {
            return Ok(StepOutcome::HELD);
        }
        let c = self.step / self.n as f64;
        core::mem::swap(&mut self.x_prev, &mut self.x);
        for ((x, y), a) in self.x.iter_mut().zip(&self.y).zip(self.acc.iter_mut()) {
            *x = y - c * *a;
            *a = 0.0;
        }
        self.next = 0;
        self.k += 1;
        Ok(StepOutcome::MOVED)
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn name(&self) -> &'static str {
        "agd"
    }
}

/// Plain SGD with uniform component sampling.
pub struct Sgd {
    x: Vec<f64>,
    g: Vec<f64>,
    n: usize,
    step: f64,
    rng: ChaCha8Rng,
}

impl Sgd {
    pub fn new(x0: Vec<f64>, n: usize, step: f64, seed: u64) -> Self {
        let d = x0.len();
        Self { x: x0, g: vec![0.0; d], n, step, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Solver for Sgd {
    fn step(&mut self, o: &mut OracleSession<'_>) -> Result<StepOutcome, OracleError> {
        let i = self.rng.gen_range(0..self.n);
        o.query_into(i, &self.x, &mut self.g)?;
        for (x, g) in self.x.iter_mut().zip(&self.g) {
            *x -= self.step * g;
        }
        Ok(StepOutcome::MOVED)
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn name(&self) -> &'static str {
        "sgd"
    }
}

/// `∇f_i(x) - ∇f_i(x̂) + ∇F(x̂)`.
pub fn semi_stochastic_gradient(
    inst: &FiniteSumInstance,
    i: usize,
    x: &[f64],
    snapshot: &[f64],
    full_grad_at_snapshot: &[f64],
) -> Vec<f64> {
    let d = inst.dim();
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    inst.component_into(i, x, &mut a);
    inst.component_into(i, snapshot, &mut b);
    a.iter().zip(&b).zip(full_grad_at_snapshot).map(|((a, b), m)| a - b + m).collect()
}

enum SvrgPhase {
    Snapshot { next: usize },
    InnerFirst { j: usize },
    InnerSecond { j: usize, idx: usize },
}

/// SVRG: snapshot full gradient (n calls) then `epoch_len` inner steps of
/// two calls each. With `outer_momentum > 0` each epoch restarts from the
/// extrapolation `x + τ (x - x_prev_epoch)` (a KatyushaX-style variant).
pub struct Svrg {
    x: Vec<f64>,
    snapshot: Vec<f64>,
    prev_epoch_end: Vec<f64>,
    mu: Vec<f64>,
    gx: Vec<f64>,
    g: Vec<f64>,
    n: usize,
    step: f64,
    epoch_len: usize,
    outer_momentum: f64,
    phase: SvrgPhase,
    rng: ChaCha8Rng,
}

impl Svrg {
    pub fn new(x0: Vec<f64>, n: usize, step: f64, epoch_len: usize, outer_momentum: f64, seed: u64) -> Self {
        let d = x0.len();
        Self {
            snapshot: x0.clone(),
            prev_epoch_end: x0.clone(),
            x: x0,
            mu: vec![0.0; d],
            gx: vec![0.0; d],
            g: vec![0.0; d],
            n,
            step,
            epoch_len: epoch_len.max(1),
            outer_momentum,
            phase: SvrgPhase::Snapshot { next: 0 },
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn begin_epoch(&mut self) -> bool {
        let mut moved = false;
        if self.outer_momentum != 0.0 {
            let t = self.outer_momentum;
            for (x, p) in self.x.iter_mut().zip(self.prev_epoch_end.iter_mut()) {
                let cur = *x;
                *x = cur + t * (cur - *p);
                *p = cur;
            }
            moved = true;
        }
        self.snapshot.copy_from_slice(&self.x);
        self.mu.fill(0.0);
        self.phase = SvrgPhase::Snapshot { next: 0 };
        moved
    }
}

impl Solver for Svrg {
    fn step(&mut self, o: &mut OracleSession<'_>) -> Result<StepOutcome, OracleError> {
        match self.phase {
            SvrgPhase::Snapshot { next } => {
                o.query_into(next, &self.snapshot, &mut self.g)?;
                add_into(&mut self.mu, &self.g);
                if next + 1 < self.n {
                    self.phase = SvrgPhase::Snapshot { next: next + 1 };
                } else {
                    let inv = 1.0 / self.n as f64;
                    self.mu.iter_mut().for_each(|m| *m *= inv);
                    self.phase = SvrgPhase::InnerFirst { j: 0 };
                }
                Ok(StepOutcome::HELD)
            }
            SvrgPhase::InnerFirst { j } => {
                let idx = self.rng.gen_range(0..self.n);
                o.query_into(idx, &self.x, &mut self.gx)?;
                self.phase = SvrgPhase::InnerSecond { j, idx };
                Ok(StepOutcome::HELD)
            }
            SvrgPhase::InnerSecond { j, idx } => {
                o.query_into(idx, &self.snapshot, &mut self.g)?;
                for (((x, a), b), m) in self.x.iter_mut().zip(&self.gx).zip(&self.g).zip(&self.mu) {
                    *x -= self.step * (a - b + m);
                }
                if j + 1 < self.epoch_len {
                    self.phase = SvrgPhase::InnerFirst { j: j + 1 };
                } else {
                    self.begin_epoch();
                }
                Ok(StepOutcome::MOVED)
            }
        }
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn name(&self) -> &'static str {
        if self.outer_momentum != 0.0 {
            "katyusha_x"
        } else {
            "svrg"
        }
    }
}

enum SpiderPhase {
    Full { next: usize },
    Batch { s: usize, second: bool, idx: usize },
}

/// SPIDER recursive-difference estimator with normalized steps.
pub struct Spider {
    x: Vec<f64>,
    x_prev: Vec<f64>,
    v: Vec<f64>,
    acc: Vec<f64>,
    gx: Vec<f64>,
    g: Vec<f64>,
    n: usize,
    lipschitz: f64,
    epsilon: f64,
    n0: f64,
    q: usize,
    batch: usize,
    k: usize,
    phase: SpiderPhase,
    rng: ChaCha8Rng,
}

impl Spider {
    #[allow(clippy::too_many_arguments)]
    pub fn new(x0: Vec<f64>, n: usize, lipschitz: f64, epsilon: f64, n0: f64, q: usize, batch: usize, seed: u64) -> Self {
        let d = x0.len();
        Self {
            x_prev: x0.clone(),
            x: x0,
            v: vec![0.0; d],
            acc: vec![0.0; d],
            gx: vec![0.0; d],
            g: vec![0.0; d],
            n,
            lipschitz,
            epsilon,
            n0,
            q: q.max(1),
            batch: batch.max(1),
            k: 0,
            phase: SpiderPhase::Full { next: 0 },
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn advance(&mut self) {
        let vn = norm(&self.v);
        let ln0 = self.lipschitz * self.n0;
        let mut eta = 1.0 / (2.0 * ln0);
        if vn > 0.0 {
            eta = eta.min(self.epsilon / (ln0 * vn));
        }
        self.x_prev.copy_from_slice(&self.x);
        for (x, v) in self.x.iter_mut().zip(&self.v) {
            *x -= eta * v;
        }
        self.k += 1;
        self.phase = if self.k % self.q == 0 {
            self.acc.fill(0.0);
            SpiderPhase::Full { next: 0 }
        } else {
            self.acc.fill(0.0);
            SpiderPhase::Batch { s: 0, second: false, idx: 0 }
        };
    }
}

impl Solver for Spider {
    fn step(&mut self, o: &mut OracleSession<'_>) -> Result<StepOutcome, OracleError> {
        match self.phase {
            SpiderPhase::Full { next } => {
                o.query_into(next, &self.x, &mut self.g)?;
                add_into(&mut self.acc, &self.g);
                if next + 1 < self.n {
                    self.phase = SpiderPhase::Full { next: next + 1 };
                    return Ok(StepOutcome::HELD);
                }
                let inv = 1.0 / self.n as f64;
                for (v, a) in self.v.iter_mut().zip(&self.acc) {
                    *v = a * inv;
                }
                self.advance();
                Ok(StepOutcome::MOVED)
            }
            SpiderPhase::Batch { s, second: false, .. } => {
                let idx = self.rng.gen_range(0..self.n);
                o.query_into(idx, &self.x, &mut self.gx)?;
                self.phase = SpiderPhase::Batch { s, second: true, idx };
                Ok(StepOutcome::HELD)
            }
            SpiderPhase::Batch { s, second: true, idx } => {
                o.query_into(idx, &self.x_prev, &mut self.g)?;
                for ((a, gx), g) in self.acc.iter_mut().zip(&self.gx).zip(&self.g) {
                    *a += gx - g;
                }
                if s + 1 < self.batch {
                    self.phase = SpiderPhase::Batch { s: s + 1, second: false, idx: 0 };
                    return Ok(StepOutcome::HELD);
                }
                let inv = 1.0 / self.batch as f64;
                for (v, a) in self.v.iter_mut().zip(&self.acc) {
                    *v += a * inv;
                }
                self.advance();
                Ok(StepOutcome::MOVED)
            }
        }
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn name(&self) -> &'static str {
        "spider"
    }
}

// ---------------------------------------------------------------------------
// driver

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("budget must be at least 1")]
    InvalidBudget,
    #[error("session already used ({0} calls)")]
    SessionNotFresh(u64),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("non-finite iterate after {ifo} IFO calls")]
    NonFinite { ifo: u64 },
    #[error("solver issued {calls} IFO calls in one step")]
    StepContract { calls: u64 },
    #[error("residual {residual:e} below live certificate floor {floor:e} after {ifo} calls")]
    CertificateViolated { ifo: u64, residual: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RunStatus {
    Reached,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunResult {
    pub solver: SolverKind,
    pub status: RunStatus,
    pub ifo_to_target: Option<u64>,
    pub ifo_used: u64,
    pub final_residual: f64,
    pub best_residual: f64,
    /// `(ifo_count, residual)` each time the iterate moved.
    pub residual_curve: Vec<(u64, f64)>,
    /// Certificates at the start and whenever they change.
    pub certificate_curve: Vec<Certificate>,
}

impl RunResult {
    /// Running minimum of the residual curve.
    pub fn best_so_far(&self) -> Vec<(u64, f64)> {
        let mut best = f64::INFINITY;
        self.residual_curve
            .iter()
            .map(|&(t, r)| {
                best = best.min(r);
                (t, best)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub budget: u64,
    pub target: f64,
    pub record_curves: bool,
    /// Relative slack when comparing residuals against certificate floors.
    pub slack: f64,
}

impl RunOptions {
    pub fn new(budget: u64, target: f64) -> Self {
        Self { budget, target, record_curves: true, slack: 1e-10 }
    }
}

pub type Observer<'o> = dyn FnMut(u64, &Certificate, &[f64]) + 'o;

fn residual_below_floor(residual: f64, floor: f64, slack: f64) -> bool {
    floor > 0.0 && residual < floor * (1.0 - slack)
}

/// Drives `solver` until the independently measured residual reaches
/// `target` or the budget is spent. The certificate is re-evaluated after
/// every call; a residual under a live floor is reported as an error,
/// never as success.
pub fn run(
    solver: &mut dyn Solver,
    kind: SolverKind,
    session: &mut OracleSession<'_>,
    opts: RunOptions,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<RunResult, RunError> {
    if opts.budget == 0 {
        return Err(RunError::InvalidBudget);
    }
    if session.ifo_count() != 0 {
        return Err(RunError::SessionNotFresh(session.ifo_count()));
    }
    let inst = session.instance();
    session.set_initial(solver.iterate())?;
    let x0 = solver.iterate();
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(RunError::NonFinite { ifo: 0 });
    }
    let mut residual = inst.residual(x0);
    let mut best = residual;
    let mut cert = session.certificate(x0);
    let mut residual_curve = Vec::new();
    let mut certificate_curve = vec![cert];
    if opts.record_curves {
        residual_curve.push((0, residual));
    }
    if let Some(obs) = observer.as_mut() {
        obs(0, &cert, x0);
    }
    let finish = |status, ifo_to_target, ifo_used, final_residual, best_residual, rc, cc| RunResult {
        solver: kind,
        status,
        ifo_to_target,
        ifo_used,
        final_residual,
        best_residual,
        residual_curve: rc,
        certificate_curve: cc,
    };
    if residual_below_floor(residual, cert.floor_value, opts.slack) {
        return Err(RunError::CertificateViolated { ifo: 0, residual, floor: cert.floor_value });
    }
    if residual <= opts.target {
        if cert.floor_value > opts.target {
            return Err(RunError::CertificateViolated { ifo: 0, residual, floor: cert.floor_value });
        }
        return Ok(finish(RunStatus::Reached, Some(0), 0, residual, best, residual_curve, certificate_curve));
    }
    while session.ifo_count() < opts.budget {
        let before = session.ifo_count();
        let out = solver.step(session)?;
        let ifo = session.ifo_count();
        if ifo != before + 1 {
            return Err(RunError::StepContract { calls: ifo - before });
        }
        let x = solver.iterate();
        if out.iterate_changed {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(RunError::NonFinite { ifo });
            }
            session.observe_iterate(x);
            residual = inst.residual(x);
            best = best.min(residual);
            if opts.record_curves {
                residual_curve.push((ifo, residual));
            }
        }
        let c = session.certificate(x);
        if c.blocks_below_threshold != cert.blocks_below_threshold || c.floor_value != cert.floor_value {
            certificate_curve.push(c);
        }
        cert = c;
        if let Some(obs) = observer.as_mut() {
            obs(ifo, &cert, x);
        }
        if residual_below_floor(residual, cert.floor_value, opts.slack) {
            return Err(RunError::CertificateViolated { ifo, residual, floor: cert.floor_value });
        }
        if residual <= opts.target {
            if cert.floor_value > opts.target {
                return Err(RunError::CertificateViolated { ifo, residual, floor: cert.floor_value });
            }
            certificate_curve.push(cert);
            return Ok(finish(RunStatus::Reached, Some(ifo), ifo, residual, best, residual_curve, certificate_curve));
        }
    }
    if certificate_curve.last() != Some(&cert) {
        certificate_curve.push(cert);
    }
    Ok(finish(RunStatus::Exhausted, None, session.ifo_count(), residual, best, residual_curve, certificate_curve))
}

/// Builds the solver from `spec`, starting at the origin, and runs it.
pub fn run_spec(
    spec: &SolverSpec,
    session: &mut OracleSession<'_>,
    opts: RunOptions,
    observer: Option<&mut Observer<'_>>,
) -> Result<RunResult, RunError> {
    let inst = session.instance();
    let mut solver = spec.build(vec![0.0; inst.dim()], inst.n);
    run(solver.as_mut(), spec.kind(), session, opts, observer)
}

// ---------------------------------------------------------------------------
// variance check

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarianceReport {
    pub pairs: usize,
    /// `E_i ‖∇f_i(x) - ∇f_i(y)‖² ≤ L² ‖x - y‖²` failures.
    pub avg_smooth_violations: usize,
    /// `‖∇F(x) - ∇F(y)‖² ≤ E_i ‖∇f_i(x) - ∇f_i(y)‖²` failures.
    pub jensen_violations: usize,
    /// `E_i ‖v - ∇F(x)‖² ≤ 2 L² ‖x - x̂‖²` failures.
    pub variance_violations: usize,
    /// Largest `E_i‖Δ∇f_i‖² / (L² ‖x - y‖²)` seen.
    pub max_avg_ratio: f64,
    /// Largest `E_i‖v - ∇F‖² / (2 L² ‖x - x̂‖²)` seen.
    pub max_variance_ratio: f64,
}

impl VarianceReport {
    pub fn passed(&self) -> bool {
        self.avg_smooth_violations == 0 && self.jensen_violations == 0 && self.variance_violations == 0
    }
}

/// Exact (full-sum over `i`) check of average smoothness and of the
/// semi-stochastic-gradient variance bound at each `(x, x̂)` pair.
pub fn variance_check(inst: &FiniteSumInstance, pairs: &[(Vec<f64>, Vec<f64>)], rel_slack: f64) -> VarianceReport {
    let d = inst.dim();
    let n = inst.n;
    let l2 = inst.meta.avg_smooth_l * inst.meta.avg_smooth_l;
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut diffs: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
    let mut rep = VarianceReport { pairs: pairs.len(), ..Default::default() };
    for (x, y) in pairs {
        let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let mut mean = vec![0.0; d];
        for (i, di) in diffs.iter_mut().enumerate() {
            inst.component_into(i, x, &mut gx);
            inst.component_into(i, y, &mut gy);
            for ((dk, a), b) in di.iter_mut().zip(&gx).zip(&gy) {
                *dk = a - b;
            }
            add_into(&mut mean, di);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let avg: f64 = diffs.iter().map(|v| norm_sq(v)).sum::<f64>() / n as f64;
        let var: f64 = diffs
            .iter()
            .map(|v| v.iter().zip(&mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        let full = norm_sq(&mean);
        let bound = l2 * dist2;
        if avg > bound * (1.0 + rel_slack) {
            rep.avg_smooth_violations += 1;
        }
        if full > avg * (1.0 + rel_slack) + f64::MIN_POSITIVE {
            rep.jensen_violations += 1;
        }
        if var > 2.0 * bound * (1.0 + rel_slack) {
            rep.variance_violations += 1;
        }
        if bound > 0.0 {
            rep.max_avg_ratio = rep.max_avg_ratio.max(avg / bound);
            rep.max_variance_ratio = rep.max_variance_ratio.max(var / (2.0 * bound));
        }
    }
    rep
}

/// Random `(x, x̂)` pairs at mixed scales `β · {0.1, 1, 10}` (Gaussian-free:
/// uniform coordinates in `[-s, s]`, occasionally sparse).
pub fn random_pairs(inst: &FiniteSumInstance, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = inst.dim();
    let beta = inst.scale.beta;
    let scales = [0.1 * beta, beta, 10.0 * beta];
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let s = scales[rng.gen_range(0..3)];
        let sparse = rng.gen_bool(0.25);
        (0..d)
            .map(|_| if sparse && rng.gen_bool(0.7) { 0.0 } else { rng.gen_range(-s..=s) })
            .collect()
    };
    (0..count)
        .map(|k| {
            let x = draw(&mut rng);
            let y = if k == 0 { x.clone() } else { draw(&mut rng) };
            (x, y)
        })
        .collect()
}
