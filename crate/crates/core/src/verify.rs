//! Executable property suite: one case per proposition/lemma item about
//! the chain functions, the embeddings and the variance bounds, each run
//! over an explicit parameter grid with explicit tolerances.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chainfun::{
    fc_eval, fc_gap_bound, fc_grad_floor, fc_hessian, fc_value_at_zero, gamma1, gamma1_prime, gamma1_second,
    nc_eval, nc_hessian, nc_minimizer, nc_tail_gap_lower, nsc_constants, nsc_eval, nsc_hessian, nsc_minimizer,
    q_eval, q_hessian, CarmonParams, ChainFunctionSpec, ChainQuadParams, NesterovCParams, NesterovScParams, C_GAMMA,
    GAMMA_CURVATURE_EXTREMA,
};
use crate::instance::{
    embed_sum, make_avg_nc_instance, make_block_family, make_cvx_instance, make_ind_nc_instance,
    make_omega_n_instance, make_sc_instance, rescale, FiniteSumInstance, OmegaVariant, ScaleParams,
};
use crate::math::{abs, dot, norm, norm_sq, pow, sqrt};
use crate::solvers::{random_pairs, variance_check};
use crate::tridiag::SymTridiag;

/// Eigensolve tolerance.
pub const EIG_TOL: f64 = 1e-8;
/// Relative tolerance of central finite-difference gradient checks.
pub const FD_TOL: f64 = 1e-6;
/// Absolute tolerance of the Γ closed form against quadrature.
pub const QUAD_TOL: f64 = 1e-9;
/// Relative slack of sampled smoothness / variance inequalities.
pub const SAMPLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub alphas: Vec<f64>,
    pub ms: Vec<usize>,
    pub ns: Vec<usize>,
    /// Random points / pairs per grid point.
    pub samples: usize,
    pub seed: u64,
}

impl Grid {
    pub fn standard() -> Self {
        Self { alphas: vec![0.01, 0.04, 0.25, 1.0], ms: vec![2, 5, 20, 100], ns: vec![1, 4, 16], samples: 100, seed: 0x5eed }
    }

    pub fn quick() -> Self {
        Self { alphas: vec![0.04, 1.0], ms: vec![2, 5], ns: vec![1, 4], samples: 10, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CaseStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseResult {
    pub id: String,
    pub title: String,
    pub tolerance: f64,
    pub checks: u64,
    pub failures: u64,
    pub status: CaseStatus,
    /// First failing instance, if any.
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SuiteReport {
    pub cases: Vec<CaseResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.status == CaseStatus::Pass)
    }
}

/// `(id, title, tolerance)` of every case, in report order.
pub const CASES: [(&str, &str, f64); 17] = [
    ("P3.5-1", "Q(x; xi, m, zeta) is (0, 4)-smooth", EIG_TOL),
    ("P3.5-2", "zero-chain: one gradient extends the span by at most one row", 1e-10),
    ("P3.6-1", "f_Nsc is (alpha, 1)-smooth", EIG_TOL),
    ("P3.6-2", "f_Nsc gap at the origin equals (1 - sqrt(alpha))^2 / 8", 1e-10),
    ("P3.6-3", "f_Nsc gap >= alpha/2 q^(2m+2) whenever x_m = 0", 1e-9),
    ("P3.8-1", "f_Nc is (0, 1)-smooth", EIG_TOL),
    ("P3.8-2", "dist^2(0, X*) <= 2m/3 for f_Nc", 1e-10),
    ("P3.8-3", "f_Nc gap >= 1/(16m) on the zero tail", 1e-10),
    ("P3.10-1", "Gamma is (-c, c)-smooth and f_C is (-alpha c, 4 + alpha c)-smooth", EIG_TOL),
    ("P3.10-2", "f_C(0) - inf f_C <= sqrt(alpha)/2 + 10 alpha m", 1e-12),
    ("P3.10-3", "|grad f_C| >= alpha^(3/4)/4 whenever x_m = x_(m+1) = 0", 1e-12),
    ("L-A.1", "sqrt(n)-embedding is zeta-average smooth with F in S(xi/sqrt(n), zeta)", EIG_TOL),
    ("L-A.2", "(lambda, beta) rescaling transforms every constant as stated", 1e-10),
    ("L-A.3", "Omega(n) strongly convex instance: gap 1/2, dist 1, >= 1/4 on small support", 1e-12),
    ("L-A.4", "Omega(n) convex instance: same certificate with dist B", 1e-12),
    ("P4.5-1", "|grad F(x) - grad F(y)|^2 <= E_i |grad f_i(x) - grad f_i(y)|^2 <= L^2 |x - y|^2", SAMPLE_SLACK),
    ("P4.5-2", "semi-stochastic gradient variance <= 2 L^2 |x - x_hat|^2", SAMPLE_SLACK),
];

pub fn case_ids() -> impl Iterator<Item = &'static str> {
    CASES.iter().map(|c| c.0)
}

struct Ctx {
    checks: u64,
    failures: u64,
    witness: Option<String>,
}

impl Ctx {
    fn new() -> Self {
        Self { checks: 0, failures: 0, witness: None }
    }

    fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }
}

fn rng_for(grid: &Grid, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(grid.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn uniform(rng: &mut ChaCha8Rng, len: usize, s: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-s..=s)).collect()
}

/// Relative error of a central-difference gradient against `grad`.
fn fd_error(f: &dyn Fn(&[f64]) -> f64, x: &[f64], grad: &[f64]) -> f64 {
    let mut y = x.to_vec();
    let mut diff = 0.0;
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1.0);
        y[k] = x[k] + h;
        let fp = f(&y);
        y[k] = x[k] - h;
        let fm = f(&y);
        y[k] = x[k];
        let d = (fp - fm) / (2.0 * h) - grad[k];
        diff += d * d;
    }
    sqrt(diff) / norm(grad).max(1.0)
}

fn xi_zeta_values(grid: &Grid) -> Vec<f64> {
    let mut v = vec![0.0, 0.5, 1.0];
    for &a in &grid.alphas {
        v.push(sqrt(a));
        v.push(2.0 * sqrt(a) / (1.0 + sqrt(a)));
    }
    v
}

/// Minimizes the quadratic `½ xᵀ H x - bᵀ x` over `{x : x_k = 0 for k ≥ free}`.
fn slice_minimizer(h: &SymTridiag, b: &[f64], free: usize) -> Vec<f64> {
    let m = h.dim();
    let mut x = vec![0.0; m];
    if free > 0 {
        let sub = SymTridiag::new(h.diag[..free].to_vec(), h.off[..free - 1].to_vec());
        let sol = sub.solve(&b[..free]).expect("principal submatrix of a PD matrix is PD");
        x[..free].copy_from_slice(&sol);
    }
    x
}

fn quad_gap(h: &SymTridiag, x: &[f64], xs: &[f64]) -> f64 {
    let e: Vec<f64> = x.iter().zip(xs).map(|(a, b)| a - b).collect();
    0.5 * h.quad_form(&e)
}

/// Adaptive Simpson quadrature.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || abs(left + right - whole) <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `120 ∫_1^t s²(s-1)/(1+s²) ds` by quadrature.
pub fn gamma1_quadrature(t: f64) -> f64 {
    simpson(&|s| 120.0 * s * s * (s - 1.0) / (1.0 + s * s), 1.0, t, 1e-13)
}

// ---------------------------------------------------------------------------
// zero-chain check

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZeroChainReport {
    pub trials: u64,
    pub violations: u64,
    pub witness: Option<String>,
}

impl ZeroChainReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("zero-chain check needs m >= t_max + 1 (m = {m}, t_max = {t_max})")]
pub struct ZeroChainPrecondition {
    pub m: usize,
    pub t_max: usize,
}

/// From span-`t` points (only the first `t` coordinates nonzero), the
/// gradient must vanish exactly beyond coordinate `t + 1`.
pub fn zero_chain_check(base: &ChainFunctionSpec, t_max: usize, trials: usize, seed: u64) -> Result<ZeroChainReport, ZeroChainPrecondition> {
    let d = base.dim();
    let m = match base {
        ChainFunctionSpec::Quad(p) => p.m,
        ChainFunctionSpec::NesterovSc(p) => p.m,
        ChainFunctionSpec::NesterovC(p) => p.dim(),
        ChainFunctionSpec::Carmon(p) => p.m,
    };
    if m < t_max + 1 {
        return Err(ZeroChainPrecondition { m, t_max });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ZeroChainReport { trials: 0, violations: 0, witness: None };
    let mut g = vec![0.0; d];
    for t in 0..=t_max {
        for trial in 0..trials.max(1) {
            let mut x = vec![0.0; d];
            if trial > 0 {
                for v in x.iter_mut().take(t) {
                    *v = rng.gen_range(-3.0..3.0);
                }
            }
            base.value_grad_into(&x, &mut g);
            rep.trials += 1;
            if let Some(k) = g.iter().skip(t + 1).position(|v| *v != 0.0) {
                rep.violations += 1;
                if rep.witness.is_none() {
                    rep.witness = Some(format!("{base:?}: span-{t} point, gradient coordinate {} nonzero", t + 2 + k));
                }
            }
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// cases

fn p3_5_1(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 351);
    let vals = xi_zeta_values(grid);
    let mut ms = grid.ms.clone();
    ms.extend([1, 200]);
    for &m in &ms {
        for &xi in &vals {
            for &zeta in &vals {
                let p = ChainQuadParams::new(xi, m, zeta).unwrap();
                let (lo, hi) = q_hessian(&p).extreme_eigenvalues(EIG_TOL * 1e-2);
                c.check(lo >= -EIG_TOL && hi <= 4.0 + EIG_TOL, || format!("xi={xi}, m={m}, zeta={zeta}: spectrum [{lo}, {hi}]"));
            }
        }
        // gradient of the definition
        let p = ChainQuadParams::new(1.0, m, 0.5).unwrap();
        for _ in 0..(grid.samples / 10).max(1) {
            let x = uniform(&mut rng, m, 2.0);
            let (_, g) = q_eval(&x, &p).unwrap();
            let e = fd_error(&|y| q_eval(y, &p).unwrap().0, &x, &g);
            c.check(e <= FD_TOL, || format!("Q gradient FD error {e:e} at m={m}"));
        }
    }
}

fn random_orthonormal_rows(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    while rows.len() < m {
        let mut v = uniform(rng, d, 1.0);
        for _ in 0..2 {
            for r in &rows {
                let c = dot(r, &v);
                v.iter_mut().zip(r).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = norm(&v);
        if n > 1e-3 {
            v.iter_mut().for_each(|a| *a /= n);
            rows.push(v);
        }
    }
    rows
}

/// `∇[Q(U x̄) + Σ μ(x̄ᵀu_i)]` for an explicit row-orthonormal `U`.
fn composite_grad(u: &[Vec<f64>], xbar: &[f64], p: &ChainQuadParams, mu_prime: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let y: Vec<f64> = u.iter().map(|r| dot(r, xbar)).collect();
    let (_, gq) = q_eval(&y, p).unwrap();
    let mut g = vec![0.0; xbar.len()];
    for (k, r) in u.iter().enumerate() {
        let c = gq[k] + mu_prime(y[k]);
        g.iter_mut().zip(r).for_each(|(a, b)| *a += c * b);
    }
    g
}

fn p3_5_2(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 352);
    type MuPrime = fn(f64) -> f64;
    let mus: [(&str, MuPrime); 4] = [
        ("0", |_| 0.0),
        ("gamma", gamma1_prime),
        ("t^2/2", |t| t),
        ("t^4", |t| 4.0 * t * t * t),
    ];
    let vals = xi_zeta_values(grid);
    for &m in &grid.ms {
        let d = m + 3;
        let u = random_orthonormal_rows(&mut rng, m, d);
        let mut ts = vec![0, 1, m / 2, m - 1];
        ts.dedup();
        for &t in &ts {
            for (name, mu) in &mus {
                let xi = vals[rng.gen_range(0..vals.len())];
                let zeta = vals[rng.gen_range(0..vals.len())];
                let p = ChainQuadParams::new(xi, m, zeta).unwrap();
                let mut xbar = vec![0.0; d];
                for r in u.iter().take(t) {
                    let coef = rng.gen_range(-2.0..2.0);
                    xbar.iter_mut().zip(r).for_each(|(a, b)| *a += coef * b);
                }
                let g = composite_grad(&u, &xbar, &p, mu);
                let coeffs: Vec<f64> = u.iter().map(|r| dot(r, &g)).collect();
                let tail = norm(&coeffs[(t + 1).min(m)..]);
                let scale = norm(&g).max(1.0);
                c.check(tail <= 1e-10 * scale, || format!("m={m}, t={t}, mu={name}: tail coefficient norm {tail:e}"));
            }
        }
        // μ with μ'(0) ≠ 0 breaks the property: the check must see it
        if m >= 3 {
            let p = ChainQuadParams::new(1.0, m, 1.0).unwrap();
            let g = composite_grad(&u, &vec![0.0; d], &p, &|_| 1.0);
            let tail = norm(&u.iter().skip(1).map(|r| dot(r, &g)).collect::<Vec<_>>());
            c.check(tail > 1e-3, || format!("m={m}: linear mu did not leave the chain"));
        }
        // exact zeros with coordinate selectors, every base family
        for &a in &grid.alphas {
            let bases = [
                ChainFunctionSpec::Quad(ChainQuadParams::new(1.0, m, 1.0).unwrap()),
                ChainFunctionSpec::NesterovSc(NesterovScParams::new(a, m).unwrap()),
                ChainFunctionSpec::NesterovC(NesterovCParams::new(m).unwrap()),
                ChainFunctionSpec::Carmon(CarmonParams::new(a, m).unwrap()),
            ];
            for b in &bases {
                let rep = zero_chain_check(b, m - 1, 3, rng.gen()).unwrap();
                c.check(rep.passed(), || rep.witness.clone().unwrap_or_default());
            }
        }
    }
}

fn p3_6_1(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 361);
    for &a in &grid.alphas {
        for &m in &grid.ms {
            let p = NesterovScParams::new(a, m).unwrap();
            let (lo, hi) = nsc_hessian(&p).extreme_eigenvalues(EIG_TOL * 1e-2);
            c.check(lo >= a - EIG_TOL && hi <= 1.0 + EIG_TOL, || format!("alpha={a}, m={m}: spectrum [{lo}, {hi}]"));
            for _ in 0..(grid.samples / 10).max(1) {
                let x = uniform(&mut rng, m, 2.0);
                let (_, g) = nsc_eval(&x, &p).unwrap();
                let e = fd_error(&|y| nsc_eval(y, &p).unwrap().0, &x, &g);
                c.check(e <= FD_TOL, || format!("f_Nsc FD error {e:e} (alpha={a}, m={m})"));
            }
        }
    }
}

fn nsc_linear_solve(p: &NesterovScParams) -> (SymTridiag, Vec<f64>, Vec<f64>) {
    let h = nsc_hessian(p);
    let mut b = vec![0.0; p.m];
    b[0] = (1.0 - p.alpha) / 4.0;
    let xs = h.solve(&b).expect("f_Nsc Hessian is positive definite");
    (h, b, xs)
}

fn p3_6_2(grid: &Grid, c: &mut Ctx) {
    for &a in &grid.alphas {
        for &m in &grid.ms {
            let p = NesterovScParams::new(a, m).unwrap();
            let (h, _, xs) = nsc_linear_solve(&p);
            let (_, g) = nsc_eval(&xs, &p).unwrap();
            c.check(norm(&g) <= 1e-10, || format!("alpha={a}, m={m}: stationarity residual {:e}", norm(&g)));
            let closed = nsc_minimizer(&p);
            let dev = xs.iter().zip(&closed).map(|(u, v)| abs(u - v)).fold(0.0, f64::max);
            c.check(dev <= 1e-10, || format!("alpha={a}, m={m}: x* deviates from q^k by {dev:e}"));
            let gap = quad_gap(&h, &vec![0.0; m], &xs);
            let s = sqrt(a);
            let expect = (1.0 - s) * (1.0 - s) / 8.0;
            c.check(abs(gap - expect) <= 1e-10 * expect.max(1e-300) + 1e-300, || {
                format!("alpha={a}, m={m}: gap {gap:e} vs (1-sqrt a)^2/8 = {expect:e}")
            });
            c.check(abs(nsc_constants(&p).gap_at_zero_bound - expect) <= 1e-15, || format!("stored gap differs at alpha={a}"));
            let q = p.q();
            let corrected = if q > 0.0 { q * q / (1.0 - q * q) } else { 0.0 };
            c.check(gap <= corrected * (1.0 + 1e-12) + 1e-300, || format!("alpha={a}: gap {gap:e} > q^2/(1-q^2) = {corrected:e}"));
        }
    }
}

fn p3_6_3(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 363);
    for &a in &grid.alphas {
        for &m in &grid.ms {
            let p = NesterovScParams::new(a, m).unwrap();
            let (h, b, xs) = nsc_linear_solve(&p);
            let lower = nsc_constants(&p).gap_lower;
            // worst point of the slice x_m = 0
            let worst = slice_minimizer(&h, &b, m - 1);
            let g = quad_gap(&h, &worst, &xs);
            c.check(g >= lower * (1.0 - 1e-9), || format!("alpha={a}, m={m}: slice minimum {g:e} < {lower:e}"));
            for _ in 0..grid.samples {
                let s = [0.1, 1.0, 3.0][rng.gen_range(0..3)];
                let mut x = uniform(&mut rng, m, s);
                x[m - 1] = 0.0;
                let g = quad_gap(&h, &x, &xs);
                c.check(g >= lower * (1.0 - 1e-9), || format!("alpha={a}, m={m}: random slice point gap {g:e} < {lower:e}"));
            }
        }
    }
}

fn p3_8_1(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 381);
    for &m in &grid.ms {
        let p = NesterovCParams::new(m).unwrap();
        let (lo, hi) = nc_hessian(&p).extreme_eigenvalues(EIG_TOL * 1e-2);
        c.check(lo >= -EIG_TOL && hi <= 1.0 + EIG_TOL, || format!("m={m}: spectrum [{lo}, {hi}]"));
        for _ in 0..(grid.samples / 10).max(1) {
            let x = uniform(&mut rng, p.dim(), 2.0);
            let (_, g) = nc_eval(&x, &p).unwrap();
            let e = fd_error(&|y| nc_eval(y, &p).unwrap().0, &x, &g);
            c.check(e <= FD_TOL, || format!("f_Nc FD error {e:e} (m={m})"));
        }
    }
}

fn nc_linear_solve(p: &NesterovCParams) -> (SymTridiag, Vec<f64>, Vec<f64>) {
    let h = nc_hessian(p);
    let mut b = vec![0.0; p.dim()];
    b[0] = 0.25;
    let xs = h.solve(&b).expect("f_Nc Hessian is positive definite");
    (h, b, xs)
}

fn p3_8_2(grid: &Grid, c: &mut Ctx) {
    for &m in &grid.ms {
        let p = NesterovCParams::new(m).unwrap();
        let (_, _, xs) = nc_linear_solve(&p);
        let (_, g) = nc_eval(&xs, &p).unwrap();
        c.check(norm(&g) <= 1e-10, || format!("m={m}: stationarity residual {:e}", norm(&g)));
        let closed = nc_minimizer(&p);
        let dev = xs.iter().zip(&closed).map(|(u, v)| abs(u - v)).fold(0.0, f64::max);
        c.check(dev <= 1e-10, || format!("m={m}: x* deviates from 1 - k/2m by {dev:e}"));
        let d2 = norm_sq(&xs);
        c.check(d2 <= 2.0 * m as f64 / 3.0 * (1.0 + 1e-10), || format!("m={m}: dist^2 {d2} > 2m/3"));
    }
}

fn p3_8_3(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 383);
    for &m in &grid.ms {
        let p = NesterovCParams::new(m).unwrap();
        let (h, b, xs) = nc_linear_solve(&p);
        let lower = nc_tail_gap_lower(&p);
        c.check(abs(lower - 1.0 / (16.0 * m as f64)) <= 1e-18, || format!("stored bound differs at m={m}"));
        let worst = slice_minimizer(&h, &b, m - 1);
        let g = quad_gap(&h, &worst, &xs);
        c.check(g >= lower * (1.0 - 1e-10), || format!("m={m}: tail-slice minimum {g:e} < 1/(16m)"));
        for _ in 0..grid.samples {
            let s = [0.1, 1.0, 3.0][rng.gen_range(0..3)];
            let mut x = uniform(&mut rng, p.dim(), s);
            x[m - 1..].iter_mut().for_each(|v| *v = 0.0);
            let g = quad_gap(&h, &x, &xs);
            c.check(g >= lower * (1.0 - 1e-10), || format!("m={m}: random tail-slice gap {g:e} < 1/(16m)"));
        }
    }
}

fn p3_10_1(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 3101);
    // Γ curvature on |t| ≤ 1e3
    let steps = 200_000;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..=steps {
        let t = -1e3 + 2e3 * k as f64 / steps as f64;
        let v = gamma1_second(t);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    for &t in &GAMMA_CURVATURE_EXTREMA {
        let v = gamma1_second(t);
        lo = lo.min(v);
        hi = hi.max(v);
        // the points are critical for γ''
        let h = 1e-5;
        let d3 = (gamma1_second(t + h) - gamma1_second(t - h)) / (2.0 * h);
        c.check(abs(d3) <= 1e-6, || format!("gamma''' = {d3:e} at claimed extremum {t}"));
    }
    c.check(lo >= -C_GAMMA && hi <= C_GAMMA, || format!("gamma'' range [{lo}, {hi}]"));
    // closed form vs quadrature, and derivative consistency
    for k in 0..grid.samples {
        let t = if k < 4 { [0.0, 1.0, -1.0, 2.5][k] } else { rng.gen_range(-3.0..3.0) };
        let q = gamma1_quadrature(t);
        let v = gamma1(t);
        c.check(abs(q - v) <= QUAD_TOL, || format!("gamma({t}) closed {v} vs quadrature {q}"));
        let h = 1e-6 * t.abs().max(1.0);
        let d1 = (gamma1(t + h) - gamma1(t - h)) / (2.0 * h);
        let d2 = (gamma1_prime(t + h) - gamma1_prime(t - h)) / (2.0 * h);
        c.check(abs(d1 - gamma1_prime(t)) <= FD_TOL * gamma1_prime(t).abs().max(1.0), || format!("gamma' FD at {t}"));
        c.check(abs(d2 - gamma1_second(t)) <= FD_TOL * gamma1_second(t).abs().max(1.0), || format!("gamma'' FD at {t}"));
    }
    // f_C spectrum at random points and at curvature extrema
    for &a in &grid.alphas {
        for &m in &grid.ms {
            let p = CarmonParams::new(a, m).unwrap();
            let (bl, bh) = (-a * C_GAMMA, 4.0 + a * C_GAMMA);
            let mut pts: Vec<Vec<f64>> = GAMMA_CURVATURE_EXTREMA.iter().map(|&t| vec![t; m + 1]).collect();
            for _ in 0..(grid.samples / 10).max(1) {
                pts.push(uniform(&mut rng, m + 1, 4.0));
            }
            for x in &pts {
                let (l, u) = fc_hessian(x, &p).extreme_eigenvalues(EIG_TOL * 1e-2);
                c.check(l >= bl - EIG_TOL && u <= bh + EIG_TOL, || format!("alpha={a}, m={m}: f_C spectrum [{l}, {u}]"));
            }
            for x in pts.iter().skip(3).take(3) {
                let (_, g) = fc_eval(x, &p).unwrap();
                let e = fd_error(&|y| fc_eval(y, &p).unwrap().0, x, &g);
                c.check(e <= FD_TOL, || format!("f_C FD error {e:e} (alpha={a}, m={m})"));
            }
        }
    }
}

fn p3_10_2(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 3102);
    for &a in &grid.alphas {
        for &m in &grid.ms {
            let p = CarmonParams::new(a, m).unwrap();
            let bound = fc_gap_bound(&p);
            let f0 = fc_eval(&vec![0.0; m + 1], &p).unwrap().0;
            c.check(abs(f0 - fc_value_at_zero(&p)) <= 1e-12 * f0.max(1.0), || format!("f_C(0) closed form mismatch"));
            let (f1, g1) = fc_eval(&vec![1.0; m + 1], &p).unwrap();
            c.check(f1 == 0.0 && norm(&g1) == 0.0, || format!("alpha={a}, m={m}: f_C(1) = {f1}"));
            // inf f_C = 0: nonnegative everywhere sampled
            for _ in 0..grid.samples {
                let x = uniform(&mut rng, m + 1, 3.0);
                let v = fc_eval(&x, &p).unwrap().0;
                c.check(v >= 0.0, || format!("alpha={a}, m={m}: f_C = {v} < 0"));
            }
            c.check(f0 - 0.0 <= bound, || format!("alpha={a}, m={m}: f_C(0) = {f0} > {bound}"));
            // descent from the origin never finds anything below 0
            let step = 1.0 / (4.0 + a * C_GAMMA);
            let mut x = vec![0.0; m + 1];
            let mut best = f0;
            for _ in 0..500 {
                let (v, g) = fc_eval(&x, &p).unwrap();
                best = best.min(v);
                x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= step * gi);
            }
            c.check(best >= 0.0 && f0 - best <= bound, || format!("alpha={a}, m={m}: descent reached {best}"));
        }
    }
}

/// Smallest gradient norm of `f_C` found on the slice `x_m = x_{m+1} = 0`
/// by projected descent on `½‖∇f_C‖²` (gradient `∇²f_C ∇f_C`).
pub fn fc_slice_grad_min(p: &CarmonParams, starts: &[Vec<f64>], iters: usize) -> f64 {
    let d = p.dim();
    let mut best = f64::INFINITY;
    let mut hg = vec![0.0; d];
    for start in starts {
        let mut x = start.clone();
        x[d - 2] = 0.0;
        x[d - 1] = 0.0;
        let (_, mut g) = fc_eval(&x, p).unwrap();
        let mut phi = 0.5 * norm_sq(&g);
        let mut step = 1.0;
        for _ in 0..iters {
            best = best.min(sqrt(2.0 * phi));
            fc_hessian(&x, p).matvec(&g, &mut hg);
            hg[d - 2] = 0.0;
            hg[d - 1] = 0.0;
            let hn = norm_sq(&hg);
            if hn == 0.0 {
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let y: Vec<f64> = x.iter().zip(&hg).map(|(a, b)| a - step * b).collect();
                let (_, gy) = fc_eval(&y, p).unwrap();
                let py = 0.5 * norm_sq(&gy);
                if py <= phi - 1e-4 * step * hn {
                    x = y;
                    g = gy;
                    phi = py;
                    step *= 2.0;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        best = best.min(sqrt(2.0 * phi));
    }
    best
}

fn p3_10_3(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 3103);
    for &a in &grid.alphas {
        for &m in &grid.ms {
            let p = CarmonParams::new(a, m).unwrap();
            let floor = fc_grad_floor(&p);
            let d = p.dim();
            for _ in 0..grid.samples {
                let s = [0.5, 1.5, 4.0][rng.gen_range(0..3)];
                let mut x = uniform(&mut rng, d, s);
                x[d - 2] = 0.0;
                x[d - 1] = 0.0;
                let gn = norm(&fc_eval(&x, &p).unwrap().1);
                c.check(gn >= floor * (1.0 - 1e-12), || format!("alpha={a}, m={m}: |grad| {gn:e} < {floor:e}"));
            }
            let mut starts = vec![vec![0.0; d], vec![1.0; d]];
            let mut ramp = vec![0.0; d];
            for (k, v) in ramp.iter_mut().enumerate() {
                *v = 1.0 - k as f64 / d as f64;
            }
            starts.push(ramp);
            for _ in 0..3 {
                starts.push(uniform(&mut rng, d, 1.5));
            }
            let found = fc_slice_grad_min(&p, &starts, 300);
            c.check(found >= floor * (1.0 - 1e-12), || format!("alpha={a}, m={m}: adversarial |grad| {found:e} < {floor:e}"));
        }
    }
}

/// Exact `E_i‖∇f_i(x) - ∇f_i(y)‖²` and `‖∇F(x) - ∇F(y)‖²`.
fn smoothness_sample(inst: &FiniteSumInstance, x: &[f64], y: &[f64]) -> (f64, f64) {
    let d = inst.dim();
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut mean = vec![0.0; d];
    let mut avg = 0.0;
    for i in 0..inst.n {
        inst.component_into(i, x, &mut gx);
        inst.component_into(i, y, &mut gy);
        for ((m, a), b) in mean.iter_mut().zip(&gx).zip(&gy) {
            *m += a - b;
        }
        avg += gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let n = inst.n as f64;
    (avg / n, norm_sq(&mean) / (n * n))
}

fn l_a_1(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 1001);
    let pairs = (grid.samples / 4).max(2);
    for &a in &grid.alphas {
        for &m in &grid.ms {
            for &n in &grid.ns {
                let bases = [
                    ChainFunctionSpec::NesterovSc(NesterovScParams::new(a, m).unwrap()),
                    ChainFunctionSpec::Carmon(CarmonParams::new(a, m).unwrap()),
                ];
                for base in bases {
                    let (xi, zeta) = base.class_interval();
                    let inst = embed_sum(base, make_block_family(base.dim(), n).unwrap()).unwrap();
                    let d = inst.dim();
                    for k in 0..pairs {
                        let s = [0.1, 1.0, 3.0][k % 3];
                        let x = uniform(&mut rng, d, s);
                        let y = uniform(&mut rng, d, s);
                        let (avg, _) = smoothness_sample(&inst, &x, &y);
                        let bound = zeta * zeta * crate::math::dist_sq(&x, &y);
                        c.check(avg <= bound * (1.0 + SAMPLE_SLACK), || {
                            format!("{base:?}, n={n}: E|dgrad|^2 = {avg:e} > zeta^2 |dx|^2 = {bound:e}")
                        });
                    }
                    let probes: Vec<Vec<f64>> = match base {
                        ChainFunctionSpec::Carmon(_) => {
                            let mut v: Vec<Vec<f64>> = GAMMA_CURVATURE_EXTREMA.iter().map(|&t| vec![t; d]).collect();
                            v.push(uniform(&mut rng, d, 3.0));
                            v
                        }
                        _ => vec![vec![0.0; d]],
                    };
                    let rn = sqrt(n as f64);
                    for x in &probes {
                        let (lo, hi) = inst.hessian_extremes(None, x, EIG_TOL * 1e-2);
                        c.check(lo >= xi / rn - EIG_TOL && hi <= zeta + EIG_TOL, || {
                            format!("{base:?}, n={n}: F spectrum [{lo}, {hi}] vs ({}, {zeta})", xi / rn)
                        });
                    }
                    c.check(inst.meta.f_interval == (xi / rn, zeta) && inst.meta.avg_smooth_l == zeta, || {
                        format!("{base:?}, n={n}: metadata {:?}", inst.meta)
                    });
                }
            }
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    abs(a - b) <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn l_a_2(grid: &Grid, c: &mut Ctx) {
    let mut rng = rng_for(grid, 1002);
    let scales = [(1.0, 1.0), (2.0, 1.0), (4.0, 2.0), (0.3, 5.0), (7.0, 0.2)];
    for &a in &grid.alphas {
        for &m in grid.ms.iter().filter(|&&m| m <= 20) {
            for &n in &grid.ns {
                let base = ChainFunctionSpec::NesterovSc(NesterovScParams::new(a, m).unwrap());
                let inst = embed_sum(base, make_block_family(m, n).unwrap()).unwrap();
                let d = inst.dim();
                let zero = vec![0.0; d];
                let (lo0, hi0) = inst.hessian_extremes(None, &zero, EIG_TOL * 1e-3);
                let (clo0, chi0) = inst.hessian_extremes(Some(0), &zero, EIG_TOL * 1e-3);
                let gap0 = inst.gap(&zero).unwrap();
                let dist0 = norm(&inst.minimizer().unwrap());
                for &(lam, beta) in &scales {
                    let s = ScaleParams::new(lam, beta).unwrap();
                    let r = rescale(&inst, s).unwrap();
                    let k = lam / (beta * beta);
                    let tol = 1e-10;
                    let (lo, hi) = r.hessian_extremes(None, &zero, EIG_TOL * 1e-3);
                    let (clo, chi) = r.hessian_extremes(Some(0), &zero, EIG_TOL * 1e-3);
                    c.check(abs(lo - k * lo0) <= EIG_TOL * k.max(1.0) && abs(hi - k * hi0) <= EIG_TOL * k.max(1.0), || {
                        format!("F spectrum not scaled by lambda/beta^2 at ({lam}, {beta})")
                    });
                    c.check(abs(clo - k * clo0) <= EIG_TOL * k.max(1.0) && abs(chi - k * chi0) <= EIG_TOL * k.max(1.0), || {
                        format!("component spectrum not scaled at ({lam}, {beta})")
                    });
                    let (f0, _) = r.full(&zero).unwrap();
                    let gap = f0 - r.optimum_value().unwrap();
                    c.check(close(gap, lam * gap0, 1e-9), || format!("gap {gap} vs lambda * {gap0} at ({lam}, {beta})"));
                    let dist = norm(&r.minimizer().unwrap());
                    c.check(close(dist, beta * dist0, tol), || format!("dist {dist} vs beta * {dist0}"));
                    let xs = r.minimizer().unwrap();
                    let (_, g) = r.full(&xs).unwrap();
                    c.check(norm(&g) <= 1e-9 * lam / beta, || format!("rescaled minimizer not stationary"));
                    c.check(
                        close(r.meta.avg_smooth_l, k * inst.meta.avg_smooth_l, tol)
                            && close(r.meta.delta_bound, lam * inst.meta.delta_bound, tol)
                            && close(r.meta.dist_bound.unwrap(), beta * inst.meta.dist_bound.unwrap(), tol),
                        || format!("metadata not rescaled at ({lam}, {beta})"),
                    );
                    for _ in 0..(grid.samples / 20).max(1) {
                        let x = uniform(&mut rng, d, beta);
                        let y = uniform(&mut rng, d, beta);
                        let (avg, _) = smoothness_sample(&r, &x, &y);
                        let bound = r.meta.avg_smooth_l * r.meta.avg_smooth_l * crate::math::dist_sq(&x, &y);
                        c.check(avg <= bound * (1.0 + SAMPLE_SLACK), || format!("rescaled average smoothness violated"));
                    }
                    // composition
                    let twice = rescale(&r, s).unwrap();
                    c.check(
                        close(twice.scale.lambda, lam * lam, 1e-15) && close(twice.scale.beta, beta * beta, 1e-15),
                        || format!("rescale does not compose multiplicatively"),
                    );
                }
            }
        }
    }
}

fn omega_case(grid: &Grid, c: &mut Ctx, variant: OmegaVariant) {
    let mut rng = rng_for(grid, 1003 + variant as u64);
    let mut ns = grid.ns.clone();
    ns.extend([8, 64]);
    for &n in &ns {
        // unscaled
        let inst = make_omega_n_instance(n, 1.0, 1.0, variant).unwrap();
        let unscaled = rescale(&inst, ScaleParams::new(1.0 / inst.scale.lambda, 1.0 / inst.scale.beta).unwrap()).unwrap();
        let zero = vec![0.0; n];
        c.check(close(unscaled.gap(&zero).unwrap(), 0.5, 1e-12), || format!("n={n}: unscaled gap at 0"));
        let (f0, _) = unscaled.full(&zero).unwrap();
        c.check(close(f0 - unscaled.optimum_value().unwrap(), 0.5, 1e-12), || format!("n={n}: F(0) - inf F"));
        c.check(close(norm(&unscaled.minimizer().unwrap()), 1.0, 1e-12), || format!("n={n}: dist(0, x*)"));
        // every support of size ≤ n/2: exact minimum over the support subspace
        let xs = unscaled.minimizer().unwrap();
        for s in 0..=n / 2 {
            let mut x = vec![0.0; n];
            let mut idx: Vec<usize> = (0..n).collect();
            for k in 0..s {
                let j = rng.gen_range(k..n);
                idx.swap(k, j);
            }
            for &k in &idx[..s] {
                x[k] = xs[k];
            }
            let g = unscaled.gap(&x).unwrap();
            let expect = (n - s) as f64 / (2.0 * n as f64);
            c.check(close(g, expect, 1e-12) && g >= 0.25 * (1.0 - 1e-12), || format!("n={n}, |supp|={s}: min gap {g}"));
            for _ in 0..3 {
                let mut y = vec![0.0; n];
                for &k in &idx[..s] {
                    y[k] = rng.gen_range(-2.0..2.0);
                }
                let gy = unscaled.gap(&y).unwrap();
                c.check(gy >= g * (1.0 - 1e-12), || format!("n={n}: random support point below the support minimum"));
            }
        }
        // scaled instance: class, average smoothness, Δ / B
        for &(l, p) in &[(1.0, 1.0), (3.0, 0.5), (0.5, 4.0)] {
            let inst = make_omega_n_instance(n, l, p, variant).unwrap();
            c.check(close(inst.meta.f_interval.0, l, 1e-12) && close(inst.meta.f_interval.1, l, 1e-12), || {
                format!("n={n}: F interval {:?} != (L, L)", inst.meta.f_interval)
            });
            let gap0 = inst.gap(&zero).unwrap();
            match variant {
                OmegaVariant::Sc => c.check(close(gap0, p, 1e-12), || format!("n={n}: gap {gap0} != Delta {p}")),
                OmegaVariant::Cvx => {
                    let dist = norm(&inst.minimizer().unwrap());
                    c.check(close(dist, p, 1e-12), || format!("n={n}: dist {dist} != B {p}"))
                }
            }
            c.check(close(inst.certified_floor(n.div_ceil(2)), inst.scale.lambda / 4.0, 1e-15), || format!("n={n}: floor"));
            for _ in 0..(grid.samples / 10).max(1) {
                let x = uniform(&mut rng, n, 2.0 * inst.scale.beta);
                let y = uniform(&mut rng, n, 2.0 * inst.scale.beta);
                let (avg, full) = smoothness_sample(&inst, &x, &y);
                let bound = l * l * crate::math::dist_sq(&x, &y);
                c.check(avg <= bound * (1.0 + SAMPLE_SLACK) && full <= avg * (1.0 + SAMPLE_SLACK), || {
                    format!("n={n}: average smoothness {avg:e} vs {bound:e}")
                });
            }
        }
    }
}

/// Factory instances exercised by the variance cases (one per family).
pub fn standard_factory_instances(n: usize) -> Vec<FiniteSumInstance> {
    let mut v = Vec::new();
    let sigma_sc = 1e-3;
    let eps_sc = (8.0 * pow(n as f64, 1.75) * pow(sigma_sc, 1.5)).min(1e-2) / 2.0;
    if let Ok(i) = make_sc_instance(n, 1.0, sigma_sc, 1.0, eps_sc) {
        v.push(i);
    }
    if let Ok(i) = make_cvx_instance(n, 1.0, 1.0, 1e-4) {
        v.push(i);
    }
    let eps_avg = sqrt((0.1f64).min(1.0 / sqrt(n as f64)) / 1e5) / 2.0;
    if let Ok(i) = make_avg_nc_instance(n, 1.0, 0.1, 1.0, eps_avg) {
        v.push(i);
    }
    if let Ok(i) = make_ind_nc_instance(n, 1.0, 0.1, 1.0, 1e-3 / sqrt(n as f64)) {
        v.push(i);
    }
    for variant in [OmegaVariant::Sc, OmegaVariant::Cvx] {
        if let Ok(i) = make_omega_n_instance(n, 1.0, 1.0, variant) {
            v.push(i);
        }
    }
    v
}

fn p4_5(grid: &Grid, c: &mut Ctx, variance: bool) {
    for &n in &grid.ns {
        for inst in standard_factory_instances(n) {
            let pairs = random_pairs(&inst, grid.samples, grid.seed ^ n as u64);
            let rep = variance_check(&inst, &pairs, SAMPLE_SLACK);
            c.checks += pairs.len() as u64 - 1;
            if variance {
                c.check(rep.variance_violations == 0, || {
                    format!("{} n={n}: {} variance violations (max ratio {})", inst.family, rep.variance_violations, rep.max_variance_ratio)
                });
            } else {
                c.check(rep.avg_smooth_violations == 0 && rep.jensen_violations == 0, || {
                    format!(
                        "{} n={n}: {} avg-smooth / {} Jensen violations (max ratio {})",
                        inst.family, rep.avg_smooth_violations, rep.jensen_violations, rep.max_avg_ratio
                    )
                });
            }
        }
    }
}

/// Runs a single case; `None` for an unknown id.
pub fn run_case(id: &str, grid: &Grid) -> Option<CaseResult> {
    let (cid, title, tol) = CASES.iter().copied().find(|c| c.0 == id)?;
    let mut c = Ctx::new();
    match cid {
        "P3.5-1" => p3_5_1(grid, &mut c),
        "P3.5-2" => p3_5_2(grid, &mut c),
        "P3.6-1" => p3_6_1(grid, &mut c),
        "P3.6-2" => p3_6_2(grid, &mut c),
        "P3.6-3" => p3_6_3(grid, &mut c),
        "P3.8-1" => p3_8_1(grid, &mut c),
        "P3.8-2" => p3_8_2(grid, &mut c),
        "P3.8-3" => p3_8_3(grid, &mut c),
        "P3.10-1" => p3_10_1(grid, &mut c),
        "P3.10-2" => p3_10_2(grid, &mut c),
        "P3.10-3" => p3_10_3(grid, &mut c),
        "L-A.1" => l_a_1(grid, &mut c),
        "L-A.2" => l_a_2(grid, &mut c),
        "L-A.3" => omega_case(grid, &mut c, OmegaVariant::Sc),
        "L-A.4" => omega_case(grid, &mut c, OmegaVariant::Cvx),
        "P4.5-1" => p4_5(grid, &mut c, false),
        "P4.5-2" => p4_5(grid, &mut c, true),
        _ => unreachable!(),
    }
    Some(CaseResult {
        id: cid.into(),
        title: title.into(),
        tolerance: tol,
        checks: c.checks,
        failures: c.failures,
        status: if c.failures == 0 { CaseStatus::Pass } else { CaseStatus::Fail },
        witness: c.witness,
    })
}

/// Runs every case sequentially.
pub fn run_suite(grid: &Grid) -> SuiteReport {
    SuiteReport { cases: case_ids().filter_map(|id| run_case(id, grid)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let r = run_suite(&Grid::quick());
        for c in &r.cases {
            assert_eq!(c.status, CaseStatus::Pass, "{c:?}");
            assert!(c.checks > 0, "{}", c.id);
        }
    }

    #[test]
    fn quadrature_matches_closed_form_at_zero() {
        assert!((gamma1_quadrature(0.0) - 7.341051225902923).abs() < 1e-9);
        assert!(gamma1_quadrature(1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_chain_examples() {
        let nsc = ChainFunctionSpec::NesterovSc(NesterovScParams::new(0.25, 6).unwrap());
        assert!(zero_chain_check(&nsc, 0, 1, 0).unwrap().passed());
        let fc = ChainFunctionSpec::Carmon(CarmonParams::new(0.5, 6).unwrap());
        assert!(zero_chain_check(&fc, 3, 100, 1).unwrap().passed());
        assert!(zero_chain_check(&fc, 6, 1, 1).is_err());
    }

    #[test]
    fn unknown_case() {
        assert!(run_case("P9.9-9", &Grid::quick()).is_none());
    }

    #[test]
    fn slice_grad_min_example() {
        let p = CarmonParams::new(1.0, 5).unwrap();
        let found = fc_slice_grad_min(&p, &[vec![0.0; 6], vec![1.0; 6]], 300);
        assert!(found >= 0.25);
    }
}
