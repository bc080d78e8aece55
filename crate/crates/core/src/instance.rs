//! Finite-sum adversarial instances built from the chain functions:
//! block-coordinate orthogonal embeddings, `√n` component scaling, `(λ, β)`
//! rescaling, the `Ω(n)` inner-product instances, and one factory per
//! lower-bound regime.
//!
//! Component indices are 0-based throughout (`0..n`).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::chainfun::{
    fc_grad_floor, fc_value_at_zero, fc_value_grad, gamma1, gamma1_prime, gamma1_second, nc_tail_gap_lower,
    nsc_constants, q_hessian_raw, q_value_grad, CarmonParams, ChainError, ChainFunctionSpec, NesterovCParams,
    NesterovScParams, C_GAMMA,
};
use crate::math::{ceil, dot, floor, ln, norm, norm_sq, pow, sqrt};
use crate::tridiag::SymTridiag;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstanceError {
    #[error("invalid size: {0}")]
    InvalidSize(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("hypothesis violated: {condition} ({detail})")]
    Hypothesis { condition: &'static str, detail: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("component index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

fn hypothesis(condition: &'static str, detail: String) -> InstanceError {
    InstanceError::Hypothesis { condition, detail }
}

/// Construction tag of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Family {
    #[cfg_attr(feature = "serde", serde(rename = "SC"))]
    Sc,
    #[cfg_attr(feature = "serde", serde(rename = "CVX"))]
    Cvx,
    #[cfg_attr(feature = "serde", serde(rename = "AVG-NC"))]
    AvgNc,
    #[cfg_attr(feature = "serde", serde(rename = "IND-NC"))]
    IndNc,
    #[cfg_attr(feature = "serde", serde(rename = "OMEGA-N"))]
    OmegaN,
    #[cfg_attr(feature = "serde", serde(rename = "OMEGA-N-CVX"))]
    OmegaNCvx,
}

impl Family {
    pub const ALL: [Family; 6] = [Self::Sc, Self::Cvx, Self::AvgNc, Self::IndNc, Self::OmegaN, Self::OmegaNCvx];

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Sc => "SC",
            Self::Cvx => "CVX",
            Self::AvgNc => "AVG-NC",
            Self::IndNc => "IND-NC",
            Self::OmegaN => "OMEGA-N",
            Self::OmegaNCvx => "OMEGA-N-CVX",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.tag().eq_ignore_ascii_case(tag))
    }

    pub fn residual_kind(&self) -> ResidualKind {
        match self {
            Self::AvgNc | Self::IndNc => ResidualKind::GradNorm,
            _ => ResidualKind::Gap,
        }
    }
}

impl core::fmt::Display for Family {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Which certificate an instance supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CertificateKind {
    Gap,
    GradNorm,
    Support,
}

/// What "progress" means for an instance: optimality gap or gradient norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ResidualKind {
    Gap,
    GradNorm,
}

/// Orthogonal family realized as block-coordinate row selectors: component
/// `i` owns coordinates `i * block_dim .. (i + 1) * block_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmbeddingFamily {
    pub block_dim: usize,
    pub n: usize,
}

impl EmbeddingFamily {
    pub fn ambient_dim(&self) -> usize {
        self.block_dim * self.n
    }

    pub fn block(&self, i: usize) -> Range<usize> {
        i * self.block_dim..(i + 1) * self.block_dim
    }

    /// `U^(i) x`.
    pub fn select<'a>(&self, i: usize, x: &'a [f64]) -> &'a [f64] {
        &x[self.block(i)]
    }

    /// Accumulates `(U^(i))^T y` into `out`.
    pub fn lift_add(&self, i: usize, y: &[f64], out: &mut [f64]) {
        for (o, v) in out[self.block(i)].iter_mut().zip(y) {
            *o += v;
        }
    }

    /// Dense `U^(i)` (row-major, `block_dim x ambient_dim`).
    pub fn matrix(&self, i: usize) -> Vec<Vec<f64>> {
        let d = self.ambient_dim();
        self.block(i)
            .map(|col| {
                let mut row = vec![0.0; d];
                row[col] = 1.0;
                row
            })
            .collect()
    }

    /// `U^(i) (U^(j))^T`, computed from the dense rows.
    pub fn gram(&self, i: usize, j: usize) -> Vec<Vec<f64>> {
        let a = self.matrix(i);
        let b = self.matrix(j);
        a.iter().map(|ra| b.iter().map(|rb| dot(ra, rb)).collect()).collect()
    }
}

pub fn make_block_family(block_dim: usize, n: usize) -> Result<EmbeddingFamily, InstanceError> {
    if block_dim == 0 {
        return Err(InstanceError::InvalidSize("block_dim must be at least 1"));
    }
    if n == 0 {
        return Err(InstanceError::InvalidSize("n must be at least 1"));
    }
    Ok(EmbeddingFamily { block_dim, n })
}

/// Value scale `λ` and argument scale `β`: `g_i(x) = λ ḡ_i(x / β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScaleParams {
    pub lambda: f64,
    pub beta: f64,
}

impl ScaleParams {
    pub const IDENTITY: ScaleParams = ScaleParams { lambda: 1.0, beta: 1.0 };

    pub fn new(lambda: f64, beta: f64) -> Result<Self, InstanceError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(InstanceError::InvalidParameter("lambda must be positive and finite"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(InstanceError::InvalidParameter("beta must be positive and finite"));
        }
        Ok(Self { lambda, beta })
    }

    /// Curvature multiplier `λ / β²`.
    pub fn curvature(&self) -> f64 {
        self.lambda / (self.beta * self.beta)
    }

    /// Gradient multiplier `λ / β`.
    pub fn gradient(&self) -> f64 {
        self.lambda / self.beta
    }
}

/// How the `n` components are formed from the base function.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Construction {
    /// `f̄_i(x) = √n g(U^(i) x)`.
    Embedded { base: ChainFunctionSpec },
    /// `f̄_i(x) = Q(U^(i) x; √α, m+1, 0) + (α/n) Σ_j Γ(U^(j) x)`.
    Separated { base: CarmonParams },
    /// `f̄_i(x) = -√n x_i + ‖x‖²/2` on `R^n`.
    InnerProduct,
}

/// User-facing inputs a factory was called with (kept for reproducibility).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FactoryInputs {
    pub n: usize,
    pub l: Option<f64>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub b: Option<f64>,
    pub epsilon: Option<f64>,
}

/// Certified constants of an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metadata {
    /// `{f_i} ∈ V^(L)`.
    pub avg_smooth_l: f64,
    /// `F ∈ S^(l, L)`.
    pub f_interval: (f64, f64),
    /// Per-component class `S^(l_i, L_i)` shared by every component.
    pub component_interval: (f64, f64),
    /// Upper bound on `F(0) - inf F` (what the construction certifies).
    pub delta_bound: f64,
    /// Exact `F(0) - inf F` when available in closed form.
    pub exact_gap_at_zero: Option<f64>,
    /// Upper bound on `dist(0, X*)` for the convex families.
    pub dist_bound: Option<f64>,
    /// Chain length `T` (0 for the inner-product instances).
    pub horizon: usize,
    /// Target accuracy `ε` the certificate is calibrated for.
    pub target_epsilon: f64,
    /// Certified IFO lower bound: no run can reach `target_epsilon` before this many calls.
    pub lower_bound_ifo: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FiniteSumInstance {
    pub family: Family,
    pub n: usize,
    pub construction: Construction,
    pub embedding: EmbeddingFamily,
    pub scale: ScaleParams,
    pub meta: Metadata,
    pub inputs: FactoryInputs,
}

/// A single IFO request.
#[derive(Debug, Clone, Copy)]
pub struct ComponentQuery<'a> {
    pub index: usize,
    pub point: &'a [f64],
}

impl FiniteSumInstance {
    pub fn dim(&self) -> usize {
        self.embedding.ambient_dim()
    }

    pub fn residual_kind(&self) -> ResidualKind {
        match self.construction {
            Construction::Embedded { base: ChainFunctionSpec::Carmon(_) } | Construction::Separated { .. } => {
                ResidualKind::GradNorm
            }
            _ => ResidualKind::Gap,
        }
    }

    pub fn certificate_kind(&self) -> CertificateKind {
        match (self.construction, self.residual_kind()) {
            (Construction::InnerProduct, _) => CertificateKind::Support,
            (_, ResidualKind::Gap) => CertificateKind::Gap,
            (_, ResidualKind::GradNorm) => CertificateKind::GradNorm,
        }
    }

    /// Block activation threshold: a block is "below threshold" while its
    /// activated prefix is `< threshold()`.
    pub fn threshold(&self) -> usize {
        match self.construction {
            Construction::Embedded { base } => match base {
                ChainFunctionSpec::Quad(p) => p.m,
                ChainFunctionSpec::NesterovSc(p) => p.m,
                ChainFunctionSpec::NesterovC(p) => p.m,
                ChainFunctionSpec::Carmon(p) => p.m,
            },
            Construction::Separated { base } => base.m,
            Construction::InnerProduct => 1,
        }
    }

    pub fn check_query(&self, q: &ComponentQuery<'_>) -> Result<(), InstanceError> {
        if q.index >= self.n {
            return Err(InstanceError::IndexOutOfRange { index: q.index, n: self.n });
        }
        if q.point.len() != self.dim() {
            return Err(InstanceError::DimensionMismatch { expected: self.dim(), got: q.point.len() });
        }
        Ok(())
    }

    /// `f_i(x)` with `∇f_i(x)` written into `grad` (length `d`).
    pub fn component_into(&self, i: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert!(i < self.n && x.len() == self.dim() && grad.len() == self.dim());
        let ScaleParams { lambda, beta } = self.scale;
        let root_n = sqrt(self.n as f64);
        grad.fill(0.0);
        match self.construction {
            Construction::Embedded { base } => {
                let r = self.embedding.block(i);
                let z: Vec<f64> = x[r.clone()].iter().map(|v| v / beta).collect();
                let mut g = vec![0.0; z.len()];
                let v = base.value_grad_into(&z, &mut g);
                let gs = lambda * root_n / beta;
                for (o, gk) in grad[r].iter_mut().zip(&g) {
                    *o = gs * gk;
                }
                lambda * root_n * v
            }
            Construction::Separated { base } => {
                let a = self.embedding.block_dim;
                let w = base.alpha / self.n as f64;
                let gs = lambda / beta;
                let mut v = 0.0;
                for j in 0..self.n {
                    let off = j * a;
                    for k in 0..base.m {
                        let z = x[off + k] / beta;
                        v += w * gamma1(z);
                        grad[off + k] = gs * w * gamma1_prime(z);
                    }
                }
                let r = self.embedding.block(i);
                let z: Vec<f64> = x[r.clone()].iter().map(|v| v / beta).collect();
                let mut g = vec![0.0; a];
                v += q_value_grad(&z, sqrt(base.alpha), 0.0, &mut g);
                for (o, gk) in grad[r].iter_mut().zip(&g) {
                    *o += gs * gk;
                }
                lambda * v
            }
            Construction::InnerProduct => {
                let gs = lambda / beta;
                let mut sq = 0.0;
                for (o, v) in grad.iter_mut().zip(x) {
                    let z = v / beta;
                    sq += z * z;
                    *o = gs * z;
                }
                grad[i] -= gs * root_n;
                lambda * (0.5 * sq - root_n * x[i] / beta)
            }
        }
    }

    pub fn component(&self, q: ComponentQuery<'_>) -> Result<(f64, Vec<f64>), InstanceError> {
        self.check_query(&q)?;
        let mut grad = vec![0.0; self.dim()];
        let v = self.component_into(q.index, q.point, &mut grad);
        Ok((v, grad))
    }

    /// `F(x)` and `∇F(x)` evaluated directly (no oracle accounting).
    pub fn full_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert!(x.len() == self.dim() && grad.len() == self.dim());
        let ScaleParams { lambda, beta } = self.scale;
        let n = self.n as f64;
        let root_n = sqrt(n);
        grad.fill(0.0);
        match self.construction {
            Construction::Embedded { base } => {
                // F = (λ/√n) Σ g(U_i x / β)
                let mut v = 0.0;
                let mut g = vec![0.0; self.embedding.block_dim];
                let gs = lambda / (root_n * beta);
                for i in 0..self.n {
                    let r = self.embedding.block(i);
                    let z: Vec<f64> = x[r.clone()].iter().map(|v| v / beta).collect();
                    v += base.value_grad_into(&z, &mut g);
                    for (o, gk) in grad[r].iter_mut().zip(&g) {
                        *o = gs * gk;
                    }
                }
                lambda * v / root_n
            }
            Construction::Separated { base } => {
                // F = (λ/n) Σ f_C(U_i x / β)
                let mut v = 0.0;
                let mut g = vec![0.0; self.embedding.block_dim];
                let gs = lambda / (n * beta);
                for i in 0..self.n {
                    let r = self.embedding.block(i);
                    let z: Vec<f64> = x[r.clone()].iter().map(|v| v / beta).collect();
                    v += fc_value_grad(&z, &base, &mut g);
                    for (o, gk) in grad[r].iter_mut().zip(&g) {
                        *o = gs * gk;
                    }
                }
                lambda * v / n
            }
            Construction::InnerProduct => {
                let gs = lambda / beta;
                let mut v = 0.0;
                for (o, xv) in grad.iter_mut().zip(x) {
                    let z = xv / beta;
                    v += 0.5 * z * z - z / root_n;
                    *o = gs * (z - 1.0 / root_n);
                }
                lambda * v
            }
        }
    }

    pub fn full(&self, x: &[f64]) -> Result<(f64, Vec<f64>), InstanceError> {
        if x.len() != self.dim() {
            return Err(InstanceError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut grad = vec![0.0; self.dim()];
        let v = self.full_into(x, &mut grad);
        Ok((v, grad))
    }

    /// A global minimizer of `F` when the construction is convex.
    pub fn minimizer(&self) -> Option<Vec<f64>> {
        let beta = self.scale.beta;
        match self.construction {
            Construction::Embedded { base: base @ (ChainFunctionSpec::NesterovSc(_) | ChainFunctionSpec::NesterovC(_)) } => {
                let z = base.minimizer()?;
                let mut out = Vec::with_capacity(self.dim());
                for _ in 0..self.n {
                    out.extend(z.iter().map(|v| beta * v));
                }
                Some(out)
            }
            Construction::InnerProduct => Some(vec![beta / sqrt(self.n as f64); self.n]),
            _ => None,
        }
    }

    /// `inf F`, when available in closed form.
    pub fn optimum_value(&self) -> Option<f64> {
        let lambda = self.scale.lambda;
        match self.construction {
            Construction::Embedded { base } => Some(lambda * sqrt(self.n as f64) * base.optimum()?),
            Construction::Separated { .. } => Some(0.0),
            Construction::InnerProduct => Some(-0.5 * lambda),
        }
    }

    /// `F(x) - inf F` for the convex families, evaluated as the quadratic
    /// form `½ (x - x*)^T ∇²F (x - x*)` around the stored minimizer.
    pub fn gap(&self, x: &[f64]) -> Option<f64> {
        let xs = self.minimizer()?;
        let beta = self.scale.beta;
        match self.construction {
            Construction::Embedded { base } => {
                let h = base.hessian(&[]);
                let mut total = 0.0;
                for i in 0..self.n {
                    let r = self.embedding.block(i);
                    let e: Vec<f64> = x[r.clone()].iter().zip(&xs[r]).map(|(a, b)| (a - b) / beta).collect();
                    total += 0.5 * h.quad_form(&e);
                }
                Some(self.scale.lambda * total / sqrt(self.n as f64))
            }
            Construction::InnerProduct => {
                let e: f64 = x.iter().zip(&xs).map(|(a, b)| (a - b) / beta).map(|v| v * v).sum();
                Some(0.5 * self.scale.lambda * e)
            }
            Construction::Separated { .. } => None,
        }
    }

    /// Independently measured residual: optimality gap for the convex
    /// families, `‖∇F(x)‖` for the nonconvex ones.
    pub fn residual(&self, x: &[f64]) -> f64 {
        match self.residual_kind() {
            ResidualKind::Gap => self.gap(x).expect("convex families carry a minimizer"),
            ResidualKind::GradNorm => {
                let mut g = vec![0.0; self.dim()];
                self.full_into(x, &mut g);
                norm(&g)
            }
        }
    }

    /// Certified lower bound on the residual at any point for which `k`
    /// blocks are still below the activation threshold. Zero when the
    /// block-count predicate fails.
    pub fn certified_floor(&self, k: usize) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let ScaleParams { lambda, .. } = self.scale;
        match self.construction {
            Construction::InnerProduct => {
                if 2 * k >= n {
                    0.25 * lambda
                } else {
                    0.0
                }
            }
            _ if 2 * k <= n => 0.0,
            Construction::Embedded { base } => {
                let kf = k as f64;
                match base {
                    ChainFunctionSpec::NesterovSc(p) => lambda * kf / sqrt(nf) * nsc_constants(&p).gap_lower,
                    ChainFunctionSpec::NesterovC(p) => lambda * kf / sqrt(nf) * nc_tail_gap_lower(&p),
                    ChainFunctionSpec::Carmon(p) => self.scale.gradient() * sqrt(kf / nf) * fc_grad_floor(&p),
                    ChainFunctionSpec::Quad(_) => 0.0,
                }
            }
            Construction::Separated { base } => self.scale.gradient() * sqrt(k as f64) / nf * fc_grad_floor(&base),
        }
    }

    /// Smallest floor that can be live: `certified_floor` at the least block
    /// count satisfying the predicate.
    pub fn min_live_floor(&self) -> f64 {
        let k = match self.construction {
            Construction::InnerProduct => self.n.div_ceil(2),
            _ => self.n / 2 + 1,
        };
        self.certified_floor(k.min(self.n))
    }

    /// Hessian of `F` (which = None) or of component `i`, as one symmetric
    /// tridiagonal block per embedding block (the ambient Hessian is their
    /// direct sum).
    pub fn hessian_blocks(&self, which: Option<usize>, x: &[f64]) -> Vec<SymTridiag> {
        let ScaleParams { lambda: _, beta } = self.scale;
        let c = self.scale.curvature();
        let nf = self.n as f64;
        let a = self.embedding.block_dim;
        let z_of = |i: usize| -> Vec<f64> { x[self.embedding.block(i)].iter().map(|v| v / beta).collect() };
        (0..self.n)
            .map(|j| match self.construction {
                Construction::Embedded { base } => {
                    let w = match which {
                        None => 1.0 / sqrt(nf),
                        Some(i) if i == j => sqrt(nf),
                        Some(_) => 0.0,
                    };
                    if w == 0.0 {
                        SymTridiag::new(vec![0.0; a], vec![0.0; a - 1])
                    } else {
                        base.hessian(&z_of(j)).scaled(c * w)
                    }
                }
                Construction::Separated { base } => {
                    let z = z_of(j);
                    match which {
                        None => crate::chainfun::fc_hessian(&z, &base).scaled(c / nf),
                        Some(i) => {
                            let mut h = if i == j {
                                q_hessian_raw(a, sqrt(base.alpha), 0.0)
                            } else {
                                SymTridiag::new(vec![0.0; a], vec![0.0; a - 1])
                            };
                            for k in 0..base.m {
                                h.diag[k] += base.alpha / nf * gamma1_second(z[k]);
                            }
                            h.scaled(c)
                        }
                    }
                }
                Construction::InnerProduct => SymTridiag::new(vec![c], vec![]),
            })
            .collect()
    }

    /// Ambient dense Hessian extreme eigenvalues via the block structure.
    pub fn hessian_extremes(&self, which: Option<usize>, x: &[f64], tol: f64) -> (f64, f64) {
        self.hessian_blocks(which, x)
            .iter()
            .map(|h| h.extreme_eigenvalues(tol))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)))
    }
}

// ---------------------------------------------------------------------------
// generic assembly

fn class_of(c: &Construction, n: usize) -> ((f64, f64), (f64, f64), f64) {
    // (F interval, component interval, average-smoothness) before scaling
    let nf = n as f64;
    match c {
        Construction::Embedded { base } => {
            let (l, u) = base.class_interval();
            let root_n = sqrt(nf);
            let comp_lo = if n > 1 { (root_n * l).min(0.0) } else { l };
            ((l / root_n, u), (comp_lo, root_n * u), u.max(-l))
        }
        Construction::Separated { base } => {
            let g = base.alpha * C_GAMMA;
            let comp = (-g / nf, 4.0 + g / nf);
            ((-g / nf, 4.0 + g), comp, comp.1)
        }
        Construction::InnerProduct => ((1.0, 1.0), (1.0, 1.0), 1.0),
    }
}

fn unscaled_gap_at_zero(c: &Construction, n: usize) -> Option<f64> {
    let nf = n as f64;
    match c {
        Construction::Embedded { base } => Some(sqrt(nf) * base.gap_at_zero()?),
        Construction::Separated { base } => Some(fc_value_at_zero(base)),
        Construction::InnerProduct => Some(0.5),
    }
}

fn unscaled_dist(c: &Construction, n: usize) -> Option<f64> {
    match c {
        Construction::Embedded { base: base @ (ChainFunctionSpec::NesterovSc(_) | ChainFunctionSpec::NesterovC(_)) } => {
            Some(sqrt(n as f64 * norm_sq(&base.minimizer()?)))
        }
        Construction::InnerProduct => Some(1.0),
        _ => None,
    }
}

/// Certified-bound gap used for `delta_bound` (Prop-level bound for the
/// nonconvex chain, exact elsewhere).
fn unscaled_delta_bound(c: &Construction, n: usize) -> Option<f64> {
    match c {
        Construction::Embedded { base: ChainFunctionSpec::Carmon(p) } => {
            Some(sqrt(n as f64) * crate::chainfun::fc_gap_bound(p))
        }
        Construction::Separated { base } => Some(crate::chainfun::fc_gap_bound(base)),
        _ => unscaled_gap_at_zero(c, n),
    }
}

fn assemble(
    family: Family,
    n: usize,
    construction: Construction,
    scale: ScaleParams,
    target_epsilon: Option<f64>,
    inputs: FactoryInputs,
) -> FiniteSumInstance {
    let block_dim = match construction {
        Construction::Embedded { base } => base.dim(),
        Construction::Separated { base } => base.dim(),
        Construction::InnerProduct => 1,
    };
    let embedding = EmbeddingFamily { block_dim, n };
    let horizon = match construction {
        Construction::InnerProduct => 0,
        _ => 0, // filled below from the threshold
    };
    let mut inst = FiniteSumInstance {
        family,
        n,
        construction,
        embedding,
        scale,
        meta: Metadata {
            avg_smooth_l: 0.0,
            f_interval: (0.0, 0.0),
            component_interval: (0.0, 0.0),
            delta_bound: f64::INFINITY,
            exact_gap_at_zero: None,
            dist_bound: None,
            horizon,
            target_epsilon: 0.0,
            lower_bound_ifo: 0,
        },
        inputs,
    };
    inst.refresh_metadata(target_epsilon);
    inst
}

impl FiniteSumInstance {
    /// Recomputes every derived constant from `(construction, n, scale)`.
    fn refresh_metadata(&mut self, target_epsilon: Option<f64>) {
        let c = self.scale.curvature();
        let (fi, ci, avg) = class_of(&self.construction, self.n);
        let lambda = self.scale.lambda;
        let horizon = match self.construction {
            Construction::InnerProduct => 0,
            _ => self.threshold(),
        };
        let lower = match self.construction {
            Construction::InnerProduct => self.n.div_ceil(2) as u64,
            _ => ceil(self.n as f64 * horizon as f64 / 2.0) as u64,
        };
        self.meta = Metadata {
            avg_smooth_l: c * avg,
            f_interval: (c * fi.0, c * fi.1),
            component_interval: (c * ci.0, c * ci.1),
            delta_bound: unscaled_delta_bound(&self.construction, self.n).map_or(f64::INFINITY, |g| lambda * g),
            exact_gap_at_zero: unscaled_gap_at_zero(&self.construction, self.n).map(|g| lambda * g),
            dist_bound: unscaled_dist(&self.construction, self.n).map(|b| self.scale.beta * b),
            horizon,
            target_epsilon: 0.0,
            lower_bound_ifo: lower,
        };
        self.meta.target_epsilon = target_epsilon.unwrap_or_else(|| self.min_live_floor());
    }

    /// Largest per-component smoothness `max(|l_i|, |L_i|)`.
    pub fn component_smoothness(&self) -> f64 {
        let (lo, hi) = self.meta.component_interval;
        hi.max(-lo)
    }
}

/// Embeds `n` copies of `base`: `f̄_i(x) = √n g(U^(i) x)`.
pub fn embed_sum(base: ChainFunctionSpec, family: EmbeddingFamily) -> Result<FiniteSumInstance, InstanceError> {
    if base.dim() != family.block_dim {
        return Err(InstanceError::DimensionMismatch { expected: family.block_dim, got: base.dim() });
    }
    let tag = match base {
        ChainFunctionSpec::NesterovSc(_) => Family::Sc,
        ChainFunctionSpec::NesterovC(_) => Family::Cvx,
        ChainFunctionSpec::Carmon(_) => Family::AvgNc,
        ChainFunctionSpec::Quad(_) => {
            return Err(InstanceError::InvalidParameter("embed one of the three chain families, not the bare quadratic"))
        }
    };
    Ok(assemble(
        tag,
        family.n,
        Construction::Embedded { base },
        ScaleParams::IDENTITY,
        None,
        FactoryInputs { n: family.n, ..Default::default() },
    ))
}

/// `g_i(x) = λ f_i(x / β)`; composes multiplicatively with any previous scaling.
pub fn rescale(inst: &FiniteSumInstance, s: ScaleParams) -> Result<FiniteSumInstance, InstanceError> {
    let s = ScaleParams::new(s.lambda, s.beta)?;
    let mut out = inst.clone();
    out.scale = ScaleParams { lambda: inst.scale.lambda * s.lambda, beta: inst.scale.beta * s.beta };
    let eps_factor = match inst.residual_kind() {
        ResidualKind::Gap => s.lambda,
        ResidualKind::GradNorm => s.lambda / s.beta,
    };
    out.refresh_metadata(Some(inst.meta.target_epsilon * eps_factor));
    Ok(out)
}

/// The separable-sum construction used for individually smooth components.
pub fn separated_sum(base: CarmonParams, n: usize) -> Result<FiniteSumInstance, InstanceError> {
    if n == 0 {
        return Err(InstanceError::InvalidSize("n must be at least 1"));
    }
    Ok(assemble(
        Family::IndNc,
        n,
        Construction::Separated { base },
        ScaleParams::IDENTITY,
        None,
        FactoryInputs { n, ..Default::default() },
    ))
}

// ---------------------------------------------------------------------------
// factories

fn require_positive(name: &'static str, v: f64) -> Result<(), InstanceError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(InstanceError::InvalidParameter(name))
    }
}

fn require_n(n: usize) -> Result<(), InstanceError> {
    if n == 0 {
        Err(InstanceError::InvalidSize("n must be at least 1"))
    } else {
        Ok(())
    }
}

/// Lowers `T` until the smallest live certificate clears `eps`; guards the
/// closed-form horizon against rounding.
fn settle_horizon(mut t: i64, eps: f64, build: impl Fn(usize) -> Result<FiniteSumInstance, InstanceError>) -> Result<Option<FiniteSumInstance>, InstanceError> {
    while t >= 1 {
        let inst = build(t as usize)?;
        if inst.min_live_floor() >= eps {
            return Ok(Some(inst));
        }
        t -= 1;
    }
    Ok(None)
}

/// Strongly convex sum of nonconvex-embedded chains (`F ∈ S^(σ, L)`, `{f_i} ∈ V^(L)`).
pub fn make_sc_instance(n: usize, l: f64, sigma: f64, delta: f64, eps: f64) -> Result<FiniteSumInstance, InstanceError> {
    require_n(n)?;
    require_positive("L must be positive", l)?;
    require_positive("sigma must be positive", sigma)?;
    require_positive("Delta must be positive", delta)?;
    require_positive("epsilon must be positive", eps)?;
    let nf = n as f64;
    let admissible = 8.0 * delta * pow(nf, 1.75) * pow(sigma / l, 1.5);
    if eps > admissible {
        return Err(hypothesis(
            "eps <= 8 Delta n^{7/4} sigma^{3/2} L^{-3/2}",
            format!("eps = {eps:e} > {admissible:e}"),
        ));
    }
    if sigma > l {
        return Err(hypothesis("sigma <= L", format!("sigma = {sigma} > L = {l}")));
    }
    let inputs = FactoryInputs { n, l: Some(l), sigma: Some(sigma), delta: Some(delta), b: None, epsilon: Some(eps) };
    let ratio = sqrt(nf) * sigma / l;
    if ratio <= 0.25 {
        let alpha = ratio;
        let s = sqrt(alpha);
        let q = (1.0 - s) / (1.0 + s);
        let lambda = 8.0 * delta / (sqrt(nf) * (1.0 - s) * (1.0 - s));
        let beta = sqrt(lambda / l);
        let t0 = floor((ln(2.0 * delta * alpha / (eps * (1.0 - s) * (1.0 - s))) / ln(1.0 / q) - 2.0) / 2.0);
        let t0 = if t0.is_finite() { t0 as i64 } else { 0 };
        let built = settle_horizon(t0, eps, |t| {
            let base = ChainFunctionSpec::NesterovSc(NesterovScParams::new(alpha, t)?);
            Ok(assemble(Family::Sc, n, Construction::Embedded { base }, ScaleParams::new(lambda, beta)?, Some(eps), inputs))
        })?;
        if let Some(inst) = built {
            return Ok(inst);
        }
    }
    if eps >= delta / 4.0 {
        return Err(hypothesis("eps < Delta / 4 (Omega(n) regime)", format!("eps = {eps:e}, Delta = {delta:e}")));
    }
    let mut inst = make_omega_n_instance(n, l, delta, OmegaVariant::Sc)?;
    inst.meta.target_epsilon = eps;
    inst.inputs = inputs;
    Ok(inst)
}

/// Convex sum (`F ∈ S^(0, L)`, `dist(0, X*) ≤ B`).
pub fn make_cvx_instance(n: usize, l: f64, b: f64, eps: f64) -> Result<FiniteSumInstance, InstanceError> {
    require_n(n)?;
    require_positive("L must be positive", l)?;
    require_positive("B must be positive", b)?;
    require_positive("epsilon must be positive", eps)?;
    if eps > l * b * b / 4.0 {
        return Err(hypothesis("eps <= L B^2 / 4", format!("eps = {eps:e} > {:e}", l * b * b / 4.0)));
    }
    let nf = n as f64;
    let inputs = FactoryInputs { n, l: Some(l), sigma: None, delta: None, b: Some(b), epsilon: Some(eps) };
    if eps <= l * b * b / (16.0 * sqrt(nf)) {
        let lambda = b * sqrt(16.0 * eps * l) / pow(nf, 0.75);
        let beta = sqrt(lambda / l);
        let t0 = floor(b * sqrt(l) / (8.0 * pow(nf, 0.25) * sqrt(eps))) as i64;
        let built = settle_horizon(t0, eps, |t| {
            let base = ChainFunctionSpec::NesterovC(NesterovCParams::new(t)?);
            Ok(assemble(Family::Cvx, n, Construction::Embedded { base }, ScaleParams::new(lambda, beta)?, Some(eps), inputs))
        })?;
        if let Some(inst) = built {
            if inst.meta.dist_bound.is_some_and(|d| d <= b * (1.0 + 1e-12)) {
                return Ok(inst);
            }
        }
    }
    let mut inst = make_omega_n_instance(n, l, b, OmegaVariant::Cvx)?;
    inst.meta.target_epsilon = eps;
    inst.inputs = inputs;
    Ok(inst)
}

/// Largest `T ≥ 0` with `scale · (√α/2 + 10 α T) ≤ Δ`.
fn nonconvex_horizon(delta_over_scale: f64, alpha: f64) -> i64 {
    let t = floor((delta_over_scale - 0.5 * sqrt(alpha)) / (10.0 * alpha));
    if t.is_finite() {
        t as i64
    } else {
        0
    }
}

/// Average-smooth nonconvex sum (`F ∈ S^(-σ, L)`, `{f_i} ∈ V^(L)`), gradient-norm target.
pub fn make_avg_nc_instance(n: usize, l: f64, sigma: f64, delta: f64, eps: f64) -> Result<FiniteSumInstance, InstanceError> {
    require_n(n)?;
    require_positive("L must be positive", l)?;
    require_positive("sigma must be positive", sigma)?;
    require_positive("Delta must be positive", delta)?;
    require_positive("epsilon must be positive", eps)?;
    let nf = n as f64;
    let root_n = sqrt(nf);
    let cap = (delta * sigma).min(l * delta / root_n) / 1e5;
    if eps * eps > cap {
        return Err(hypothesis(
            "eps^2 <= (Delta sigma ∧ L Delta n^{-1/2}) / 1e5",
            format!("eps^2 = {:e} > {cap:e}", eps * eps),
        ));
    }
    let alpha = (5.0 * sigma * root_n / (C_GAMMA * l)).min(1.0 / C_GAMMA);
    let lambda = 160.0 * eps * eps / (l * pow(alpha, 1.5));
    let beta = sqrt(5.0 * lambda / l);
    let t0 = nonconvex_horizon(delta / (lambda * root_n), alpha);
    let inputs = FactoryInputs { n, l: Some(l), sigma: Some(sigma), delta: Some(delta), b: None, epsilon: Some(eps) };
    settle_horizon(t0, eps, |t| {
        let base = ChainFunctionSpec::Carmon(CarmonParams::new(alpha, t)?);
        Ok(assemble(Family::AvgNc, n, Construction::Embedded { base }, ScaleParams::new(lambda, beta)?, Some(eps), inputs))
    })?
    .ok_or_else(|| {
        hypothesis(
            "chain horizon T >= 1 (lambda sqrt(n) (sqrt(alpha)/2 + 10 alpha) <= Delta)",
            format!("alpha = {alpha:e}, lambda = {lambda:e}"),
        )
    })
}

/// Nonconvex sum with individually `(-σ, L)`-smooth components.
pub fn make_ind_nc_instance(n: usize, l: f64, sigma: f64, delta: f64, eps: f64) -> Result<FiniteSumInstance, InstanceError> {
    require_n(n)?;
    require_positive("L must be positive", l)?;
    require_positive("sigma must be positive", sigma)?;
    require_positive("Delta must be positive", delta)?;
    require_positive("epsilon must be positive", eps)?;
    let nf = n as f64;
    let cap = (delta * l / nf).min(delta * sigma) / 1e3;
    if eps * eps > cap {
        return Err(hypothesis(
            "eps^2 <= (Delta L n^{-1} ∧ Delta sigma) / 1e3",
            format!("eps^2 = {:e} > {cap:e}", eps * eps),
        ));
    }
    let alpha = (5.0 * nf * sigma / (C_GAMMA * l)).min(nf / C_GAMMA).min(1.0);
    let lambda = 160.0 * nf * eps * eps / (l * pow(alpha, 1.5));
    let beta = sqrt(5.0 * lambda / l);
    let t0 = nonconvex_horizon(delta / lambda, alpha);
    let inputs = FactoryInputs { n, l: Some(l), sigma: Some(sigma), delta: Some(delta), b: None, epsilon: Some(eps) };
    settle_horizon(t0, eps, |t| {
        let base = CarmonParams::new(alpha, t)?;
        Ok(assemble(Family::IndNc, n, Construction::Separated { base }, ScaleParams::new(lambda, beta)?, Some(eps), inputs))
    })?
    .ok_or_else(|| {
        hypothesis(
            "chain horizon T >= 1 (lambda (sqrt(alpha)/2 + 10 alpha) <= Delta)",
            format!("alpha = {alpha:e}, lambda = {lambda:e}"),
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OmegaVariant {
    Sc,
    Cvx,
}

/// `Ω(n)` instance: `f_i(x) = λ(-√n ⟨x/β, e_i⟩ + ‖x/β‖²/2)` with
/// `(λ, β) = (2Δ, √(2Δ/L))` (SC) or `(L B², B)` (CVX).
pub fn make_omega_n_instance(n: usize, l: f64, delta_or_b: f64, variant: OmegaVariant) -> Result<FiniteSumInstance, InstanceError> {
    require_n(n)?;
    require_positive("L must be positive", l)?;
    require_positive("Delta / B must be positive", delta_or_b)?;
    let (family, scale, inputs) = match variant {
        OmegaVariant::Sc => (
            Family::OmegaN,
            ScaleParams::new(2.0 * delta_or_b, sqrt(2.0 * delta_or_b / l))?,
            FactoryInputs { n, l: Some(l), delta: Some(delta_or_b), ..Default::default() },
        ),
        OmegaVariant::Cvx => (
            Family::OmegaNCvx,
            ScaleParams::new(l * delta_or_b * delta_or_b, delta_or_b)?,
            FactoryInputs { n, l: Some(l), b: Some(delta_or_b), ..Default::default() },
        ),
    };
    Ok(assemble(family, n, Construction::InnerProduct, scale, None, inputs))
}

/// Builds the instance of `family` from a flat parameter set. `second` is
/// `σ` for SC / AVG-NC / IND-NC and `B` for CVX / OMEGA-N-CVX; `delta` is
/// ignored by the CVX families.
pub fn make_instance(family: Family, n: usize, l: f64, second: f64, delta: f64, eps: f64) -> Result<FiniteSumInstance, InstanceError> {
    match family {
        Family::Sc => make_sc_instance(n, l, second, delta, eps),
        Family::Cvx => make_cvx_instance(n, l, second, eps),
        Family::AvgNc => make_avg_nc_instance(n, l, second, delta, eps),
        Family::IndNc => make_ind_nc_instance(n, l, second, delta, eps),
        Family::OmegaN => {
            if eps >= delta / 4.0 {
                return Err(hypothesis("eps < Delta / 4", format!("eps = {eps:e}, Delta = {delta:e}")));
            }
            let mut inst = make_omega_n_instance(n, l, delta, OmegaVariant::Sc)?;
            inst.meta.target_epsilon = eps;
            inst.inputs.epsilon = Some(eps);
            Ok(inst)
        }
        Family::OmegaNCvx => {
            if eps >= l * second * second / 4.0 {
                return Err(hypothesis("eps < L B^2 / 4", format!("eps = {eps:e}")));
            }
            let mut inst = make_omega_n_instance(n, l, second, OmegaVariant::Cvx)?;
            inst.meta.target_epsilon = eps;
            inst.inputs.epsilon = Some(eps);
            Ok(inst)
        }
    }
}

// ---------------------------------------------------------------------------

/// `x ↦ F(x - origin)`: moves the start point of an instance away from zero.
#[derive(Debug, Clone)]
pub struct Shifted<'a> {
    pub inner: &'a FiniteSumInstance,
    pub origin: Vec<f64>,
}

impl<'a> Shifted<'a> {
    pub fn new(inner: &'a FiniteSumInstance, origin: Vec<f64>) -> Result<Self, InstanceError> {
        if origin.len() != inner.dim() {
            return Err(InstanceError::DimensionMismatch { expected: inner.dim(), got: origin.len() });
        }
        Ok(Self { inner, origin })
    }

    pub fn component_into(&self, i: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let y: Vec<f64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        self.inner.component_into(i, &y, grad)
    }

    pub fn full_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let y: Vec<f64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        self.inner.full_into(&y, grad)
    }
}

// ---------------------------------------------------------------------------

/// The published proof-level settings, reproduced verbatim for reference.
/// These are *not* what the factories use (several do not certify; see the
/// tests), but they document where the rates come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofSettings {
    pub alpha: f64,
    pub lambda: f64,
    pub beta: f64,
    /// Unrounded horizon.
    pub horizon: f64,
    /// `⌈horizon⌉`.
    pub horizon_ceil: u64,
    /// `n ⌈T⌉ / 2`.
    pub lower_bound: f64,
}

impl ProofSettings {
    fn finish(n: usize, alpha: f64, lambda: f64, beta: f64, horizon: f64) -> Self {
        let horizon_ceil = ceil(horizon) as u64;
        Self { alpha, lambda, beta, horizon, horizon_ceil, lower_bound: n as f64 * horizon_ceil as f64 / 2.0 }
    }

    pub fn sc_literal(n: usize, l: f64, sigma: f64, delta: f64, eps: f64) -> Self {
        let nf = n as f64;
        let alpha = sqrt(nf) * sigma / l;
        let s = sqrt(alpha);
        let lambda = 4.0 * sqrt(nf * alpha) * delta / ((1.0 - s) * (1.0 - s));
        let t = sqrt(l / (sqrt(nf) * sigma)) * ln(pow(sigma / l, 1.5) * 8.0 * pow(nf, 1.75) * delta / eps);
        Self::finish(n, alpha, lambda, sqrt(lambda / l), t)
    }

    pub fn cvx_literal(n: usize, l: f64, b: f64, eps: f64) -> Self {
        let nf = n as f64;
        let lambda = b * sqrt(16.0 * eps * l) / pow(nf, 0.75);
        let t = b * sqrt(l) / (4.0 * pow(nf, 0.25) * sqrt(eps));
        Self::finish(n, 0.0, lambda, sqrt(lambda / l), t)
    }

    pub fn avg_nc_literal(n: usize, l: f64, sigma: f64, delta: f64, eps: f64) -> Self {
        let nf = n as f64;
        let alpha = (5.0 * sigma * sqrt(nf) / (C_GAMMA * l)).min(1.0 / C_GAMMA);
        let lambda = 5.0 * eps * eps / (l * pow(alpha, 1.5));
        let t = l * delta / (55.0 * sqrt(nf) * eps * eps) * sqrt(alpha);
        Self::finish(n, alpha, lambda, sqrt(5.0 * lambda / l), t)
    }

    pub fn ind_nc_literal(n: usize, l: f64, sigma: f64, delta: f64, eps: f64) -> Self {
        let nf = n as f64;
        let alpha = (5.0 * nf * sigma / (C_GAMMA * l)).min(1.0);
        let lambda = 160.0 * nf * eps * eps / (l * pow(alpha, 1.5));
        let t = delta * l / (1760.0 * nf * eps * eps) * sqrt(alpha);
        Self::finish(n, alpha, lambda, sqrt(5.0 * lambda / l), t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_family_examples() {
        let f = make_block_family(2, 3).unwrap();
        assert_eq!(f.ambient_dim(), 6);
        assert_eq!(f.block(1), 2..4);
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(f.select(1, &x), &[2.0, 3.0]);
        assert_eq!(f.gram(1, 1), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(f.gram(0, 1), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let single = make_block_family(5, 1).unwrap();
        let m = single.matrix(0);
        for (r, row) in m.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert_eq!(*v, if r == c { 1.0 } else { 0.0 });
            }
        }
        assert!(make_block_family(0, 3).is_err());
        assert!(make_block_family(3, 0).is_err());
    }

    #[test]
    fn embed_interval_example() {
        let base = ChainFunctionSpec::NesterovSc(NesterovScParams::new(0.25, 4).unwrap());
        let inst = embed_sum(base, make_block_family(4, 4).unwrap()).unwrap();
        assert_eq!(inst.meta.f_interval, (0.125, 1.0));
        assert_eq!(inst.meta.avg_smooth_l, 1.0);
        assert_eq!(inst.family, Family::Sc);
    }

    #[test]
    fn embed_single_component_is_base() {
        let p = NesterovScParams::new(0.3, 5).unwrap();
        let base = ChainFunctionSpec::NesterovSc(p);
        let inst = embed_sum(base, make_block_family(5, 1).unwrap()).unwrap();
        let x = [0.3, -0.2, 0.5, 1.0, -2.0];
        let (v, g) = inst.component(ComponentQuery { index: 0, point: &x }).unwrap();
        let (vb, gb) = base.eval(&x).unwrap();
        assert_eq!(v, vb);
        assert_eq!(g, gb);
    }

    #[test]
    fn embed_rejects_mismatch_and_bare_quadratic() {
        let base = ChainFunctionSpec::NesterovSc(NesterovScParams::new(0.3, 5).unwrap());
        assert!(embed_sum(base, make_block_family(4, 2).unwrap()).is_err());
        let q = ChainFunctionSpec::Quad(crate::chainfun::ChainQuadParams::new(1.0, 3, 1.0).unwrap());
        assert!(embed_sum(q, make_block_family(3, 2).unwrap()).is_err());
    }

    #[test]
    fn rescale_examples() {
        let base = ChainFunctionSpec::NesterovSc(NesterovScParams::new(0.25, 4).unwrap());
        let inst = embed_sum(base, make_block_family(4, 4).unwrap()).unwrap();
        assert_eq!(rescale(&inst, ScaleParams::IDENTITY).unwrap(), inst);
        let doubled = rescale(&inst, ScaleParams::new(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(doubled.meta.avg_smooth_l, 2.0);
        let r = rescale(&inst, ScaleParams::new(4.0, 2.0).unwrap()).unwrap();
        assert_eq!(r.meta.avg_smooth_l, inst.meta.avg_smooth_l);
        assert_eq!(r.meta.f_interval, inst.meta.f_interval);
        assert!((r.meta.delta_bound - 4.0 * inst.meta.delta_bound).abs() < 1e-15);
        assert!((r.meta.dist_bound.unwrap() - 2.0 * inst.meta.dist_bound.unwrap()).abs() < 1e-15);
        assert!(rescale(&inst, ScaleParams { lambda: 0.0, beta: 1.0 }).is_err());
        assert!(rescale(&inst, ScaleParams { lambda: 1.0, beta: -1.0 }).is_err());
    }

    #[test]
    fn sc_literal_settings_match_published_arithmetic() {
        let s = ProofSettings::sc_literal(16, 1.0, 0.01, 1.0, 1e-3);
        assert!((s.alpha - 0.04).abs() < 1e-15);
        assert_eq!(s.horizon_ceil, 35);
        assert_eq!(s.lower_bound, 280.0);
    }

    #[test]
    fn sc_literal_settings_do_not_certify() {
        // floor λ α √n q^{2T+2} / 2 with the published T is ~1e-13, far below ε
        let s = ProofSettings::sc_literal(16, 1.0, 0.01, 1.0, 1e-3);
        let r = sqrt(s.alpha);
        let q = (1.0 - r) / (1.0 + r);
        let floor = s.lambda * s.alpha * 4.0 * crate::math::powi(q, 2 * 35 + 2) / 2.0;
        assert!(floor < 1e-12);
        // and F(0) - inf F = λ √n (1-α) q / 8 exceeds Δ = 1
        let gap = s.lambda * 4.0 * (1.0 - s.alpha) * q / 8.0;
        assert!(gap > 1.5);
    }

    #[test]
    fn sc_factory_example() {
        let inst = make_sc_instance(16, 1.0, 0.01, 1.0, 1e-3).unwrap();
        assert_eq!(inst.family, Family::Sc);
        let alpha = match inst.construction {
            Construction::Embedded { base: ChainFunctionSpec::NesterovSc(p) } => p.alpha,
            _ => unreachable!(),
        };
        assert!((alpha - 0.04).abs() < 1e-15);
        assert!((inst.meta.f_interval.0 - 0.01).abs() < 1e-15);
        assert!((inst.meta.f_interval.1 - 1.0).abs() < 1e-12);
        assert!((inst.meta.avg_smooth_l - 1.0).abs() < 1e-12);
        assert!((inst.meta.exact_gap_at_zero.unwrap() - 1.0).abs() < 1e-12);
        assert!(inst.certified_floor(16) >= 1e-3);
        assert!(inst.min_live_floor() >= 1e-3);
        // one more link would break the certificate
        let t = inst.meta.horizon;
        let q: f64 = 0.8 / 1.2;
        let lam = inst.scale.lambda;
        let next = lam * 4.0 * 0.04 * crate::math::powi(q, 2 * (t as i32 + 1) + 2) / 4.0;
        assert!(next < 1e-3);
    }

    #[test]
    fn sc_factory_omega_branch() {
        let inst = make_sc_instance(16, 1.0, 1.0, 1.0, 1e-3).unwrap();
        assert_eq!(inst.family, Family::OmegaN);
        assert_eq!(inst.meta.lower_bound_ifo, 8);
    }

    #[test]
    fn sc_factory_rejects_out_of_hypothesis() {
        match make_sc_instance(16, 1.0, 1e-4, 1.0, 10.0) {
            Err(InstanceError::Hypothesis { condition, .. }) => assert!(condition.contains("8 Delta")),
            other => panic!("{other:?}"),
        }
        assert!(make_sc_instance(16, 1.0, 0.01, 1.0, 0.0).is_err());
        assert!(make_sc_instance(0, 1.0, 0.01, 1.0, 1e-3).is_err());
    }

    #[test]
    fn cvx_literal_and_certified_horizon() {
        let lit = ProofSettings::cvx_literal(16, 1.0, 1.0, 1.0 / 1024.0);
        assert_eq!(lit.horizon, 4.0);
        let inst = make_cvx_instance(16, 1.0, 1.0, 1.0 / 1024.0).unwrap();
        assert_eq!(inst.family, Family::Cvx);
        assert_eq!(inst.meta.horizon, 2);
        assert_eq!(inst.meta.lower_bound_ifo, 16);
        assert!(inst.meta.dist_bound.unwrap() <= 1.0);
        assert!(inst.min_live_floor() >= 1.0 / 1024.0);
    }

    #[test]
    fn cvx_branch_and_rejection() {
        let inst = make_cvx_instance(16, 1.0, 1.0, 1.0 / 8.0).unwrap();
        assert_eq!(inst.family, Family::OmegaNCvx);
        assert!(make_cvx_instance(16, 1.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn avg_nc_alpha_branches() {
        let inst = make_avg_nc_instance(16, 1.0, 0.09, 1.0, 5e-4).unwrap();
        match inst.construction {
            Construction::Embedded { base: ChainFunctionSpec::Carmon(p) } => {
                assert!((p.alpha - 1.0 / 360.0).abs() < 1e-18)
            }
            _ => unreachable!(),
        }
        assert!(inst.meta.f_interval.0 >= -0.09 - 1e-15);
        assert!(inst.meta.f_interval.1 <= 1.0 + 1e-12);
        assert!(inst.meta.avg_smooth_l <= 1.0 + 1e-12);
        assert!(inst.meta.delta_bound <= 1.0 + 1e-12);
        assert!(inst.min_live_floor() >= 5e-4);
        assert!(make_avg_nc_instance(16, 1.0, 0.09, 1.0, 1.0).is_err());
    }

    #[test]
    fn ind_nc_lambda_example() {
        let (n, l, sigma, eps) = (8usize, 1.0, 0.1, 1e-3);
        let lit = ProofSettings::ind_nc_literal(n, l, sigma, 1.0, eps);
        let alpha = (5.0 * 8.0 * 0.1 / 360.0f64).min(1.0);
        assert!((lit.lambda - 160.0 * 8.0 * 1e-6 / pow(alpha, 1.5)).abs() < 1e-12);
        let inst = make_ind_nc_instance(n, l, sigma, 1.0, eps).unwrap();
        assert!((inst.scale.lambda - lit.lambda).abs() < 1e-12);
        let (lo, hi) = inst.meta.component_interval;
        assert!(lo >= -sigma - 1e-15 && hi <= l + 1e-12);
    }

    #[test]
    fn omega_examples() {
        let inst = make_omega_n_instance(8, 1.0, 1.0, OmegaVariant::Sc).unwrap();
        let unscaled = rescale(&inst, ScaleParams::new(1.0 / inst.scale.lambda, 1.0 / inst.scale.beta).unwrap()).unwrap();
        assert!((unscaled.meta.exact_gap_at_zero.unwrap() - 0.5).abs() < 1e-15);
        assert!((unscaled.meta.dist_bound.unwrap() - 1.0).abs() < 1e-15);
        let zero = vec![0.0; 8];
        assert!((unscaled.gap(&zero).unwrap() - 0.5).abs() < 1e-15);
        // support n/2
        let mut x = vec![0.0; 8];
        for v in x.iter_mut().take(4) {
            *v = 1.0 / sqrt(8.0);
        }
        assert!(unscaled.gap(&x).unwrap() >= 0.25 - 1e-15);
        assert!(inst.gap(&x).unwrap() >= 0.5 - 1e-15);
        assert_eq!(inst.certified_floor(4), 0.5);
        assert_eq!(inst.certified_floor(3), 0.0);
    }

    #[test]
    fn shifted_wrapper_moves_origin() {
        let inst = make_omega_n_instance(4, 1.0, 1.0, OmegaVariant::Cvx).unwrap();
        let origin = vec![1.0, -1.0, 0.5, 2.0];
        let s = Shifted::new(&inst, origin.clone()).unwrap();
        let mut g1 = vec![0.0; 4];
        let mut g2 = vec![0.0; 4];
        let v1 = s.full_into(&origin, &mut g1);
        let v2 = inst.full_into(&[0.0; 4], &mut g2);
        assert_eq!(v1, v2);
        assert_eq!(g1, g2);
        assert!(Shifted::new(&inst, vec![0.0; 3]).is_err());
    }
}
