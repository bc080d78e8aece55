//! The four base adversarial functions: the chain quadratic `Q`, the
//! strongly convex and convex Nesterov chains, and the nonconvex chain with
//! the separable `Γ` penalty, together with their closed-form constants.
//!
//! Every evaluator is a pure function of an immutable parameter record.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{atan, ln_1p, pow, powi, sqrt};
use crate::tridiag::SymTridiag;

/// Curvature constant of the `Γ` penalty.
pub const C_GAMMA: f64 = 360.0;

/// Abscissae where `Γ''` attains its local extrema: the roots of
/// `(t + 1)(t^2 - 4t + 1)`.
pub const GAMMA_CURVATURE_EXTREMA: [f64; 3] = [-1.0, 0.267_949_192_431_122_7, 3.732_050_807_568_877];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

fn check_dim(x: &[f64], expected: usize) -> Result<(), ChainError> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(ChainError::DimensionMismatch { expected, got: x.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainQuadParams {
    pub xi: f64,
    pub m: usize,
    pub zeta: f64,
}

impl ChainQuadParams {
    pub fn new(xi: f64, m: usize, zeta: f64) -> Result<Self, ChainError> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(ChainError::InvalidParameter("xi must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&zeta) {
            return Err(ChainError::InvalidParameter("zeta must lie in [0, 1]"));
        }
        if m == 0 {
            return Err(ChainError::InvalidParameter("m must be at least 1"));
        }
        Ok(Self { xi, m, zeta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NesterovScParams {
    pub alpha: f64,
    pub m: usize,
}

impl NesterovScParams {
    pub fn new(alpha: f64, m: usize) -> Result<Self, ChainError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ChainError::InvalidParameter("alpha must lie in (0, 1]"));
        }
        if m == 0 {
            return Err(ChainError::InvalidParameter("m must be at least 1"));
        }
        Ok(Self { alpha, m })
    }

    /// Geometric decay rate of the minimizer, `(1 - √α) / (1 + √α)`.
    pub fn q(&self) -> f64 {
        let s = sqrt(self.alpha);
        (1.0 - s) / (1.0 + s)
    }

    /// Terminal weight of the embedded chain quadratic.
    pub fn zeta(&self) -> f64 {
        let s = sqrt(self.alpha);
        2.0 * s / (s + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NesterovCParams {
    pub m: usize,
}

impl NesterovCParams {
    pub fn new(m: usize) -> Result<Self, ChainError> {
        if m == 0 {
            return Err(ChainError::InvalidParameter("m must be at least 1"));
        }
        Ok(Self { m })
    }

    pub fn dim(&self) -> usize {
        2 * self.m - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CarmonParams {
    pub alpha: f64,
    pub m: usize,
}

impl CarmonParams {
    pub fn new(alpha: f64, m: usize) -> Result<Self, ChainError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ChainError::InvalidParameter("alpha must lie in (0, 1]"));
        }
        if m == 0 {
            return Err(ChainError::InvalidParameter("m must be at least 1"));
        }
        Ok(Self { alpha, m })
    }

    pub fn dim(&self) -> usize {
        self.m + 1
    }

    pub fn c_gamma(&self) -> f64 {
        C_GAMMA
    }
}

// ---------------------------------------------------------------------------
// chain quadratic

/// Writes the gradient of `Q(x; xi, m, zeta)` into `grad` and returns the value.
pub(crate) fn q_value_grad(x: &[f64], xi: f64, zeta: f64, grad: &mut [f64]) -> f64 {
    let m = x.len();
    debug_assert_eq!(grad.len(), m);
    let r = x[0] - 1.0;
    let mut value = 0.5 * xi * r * r;
    grad.fill(0.0);
    grad[0] = xi * r;
    for t in 0..m - 1 {
        let d = x[t + 1] - x[t];
        value += 0.5 * d * d;
        grad[t + 1] += d;
        grad[t] -= d;
    }
    let last = x[m - 1];
    value += 0.5 * zeta * last * last;
    grad[m - 1] += zeta * last;
    value
}

pub(crate) fn q_hessian_raw(m: usize, xi: f64, zeta: f64) -> SymTridiag {
    let mut diag = vec![2.0; m];
    if m == 1 {
        diag[0] = xi + zeta;
    } else {
        diag[0] = 1.0 + xi;
        diag[m - 1] = 1.0 + zeta;
    }
    SymTridiag::new(diag, vec![-1.0; m - 1])
}

/// Value and gradient of the chain quadratic
/// `ξ/2 (x₁ - 1)² + ½ Σ (x_{t+1} - x_t)² + ζ/2 x_m²`.
pub fn q_eval(x: &[f64], p: &ChainQuadParams) -> Result<(f64, Vec<f64>), ChainError> {
    check_dim(x, p.m)?;
    let mut grad = vec![0.0; p.m];
    let v = q_value_grad(x, p.xi, p.zeta, &mut grad);
    Ok((v, grad))
}

/// Constant Hessian of `Q`.
pub fn q_hessian(p: &ChainQuadParams) -> SymTridiag {
    q_hessian_raw(p.m, p.xi, p.zeta)
}

// ---------------------------------------------------------------------------
// strongly convex Nesterov chain

pub(crate) fn nsc_value_grad(x: &[f64], p: &NesterovScParams, grad: &mut [f64]) -> f64 {
    let a = p.alpha;
    let w = (1.0 - a) / 4.0;
    let qv = q_value_grad(x, 1.0, p.zeta(), grad);
    let mut sq = 0.0;
    for (g, xi) in grad.iter_mut().zip(x) {
        *g = w * *g + a * xi;
        sq += xi * xi;
    }
    w * qv + 0.5 * a * sq
}

pub fn nsc_eval(x: &[f64], p: &NesterovScParams) -> Result<(f64, Vec<f64>), ChainError> {
    check_dim(x, p.m)?;
    let mut grad = vec![0.0; p.m];
    let v = nsc_value_grad(x, p, &mut grad);
    Ok((v, grad))
}

pub fn nsc_hessian(p: &NesterovScParams) -> SymTridiag {
    q_hessian_raw(p.m, 1.0, p.zeta()).scaled((1.0 - p.alpha) / 4.0).shifted(p.alpha)
}

/// Exact minimizer `x*_k = q^k`.
pub fn nsc_minimizer(p: &NesterovScParams) -> Vec<f64> {
    let q = p.q();
    (1..=p.m).map(|k| powi(q, k as i32)).collect()
}

/// Closed-form constants attached to the strongly convex chain.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NscConstants {
    /// Exact `f(0) - inf f = (1 - α) q / 8`.
    pub gap_at_zero_bound: f64,
    /// `α/2 · q^{2m+2}`: floor on the gap at any point whose last coordinate is zero.
    pub gap_lower: f64,
    /// Smoothness class `(α, 1)`.
    pub class_interval: (f64, f64),
}

pub fn nsc_constants(p: &NesterovScParams) -> NscConstants {
    let q = p.q();
    NscConstants {
        gap_at_zero_bound: (1.0 - p.alpha) * q / 8.0,
        gap_lower: 0.5 * p.alpha * powi(q, 2 * p.m as i32 + 2),
        class_interval: (p.alpha, 1.0),
    }
}

/// Optimal value `inf f_Nsc`.
pub fn nsc_optimum(p: &NesterovScParams) -> f64 {
    let f0 = (1.0 - p.alpha) / 8.0;
    f0 - nsc_constants(p).gap_at_zero_bound
}

// ---------------------------------------------------------------------------
// convex Nesterov chain

pub(crate) fn nc_value_grad(x: &[f64], grad: &mut [f64]) -> f64 {
    let v = q_value_grad(x, 1.0, 1.0, grad);
    for g in grad.iter_mut() {
        *g *= 0.25;
    }
    0.25 * v
}

pub fn nc_eval(x: &[f64], p: &NesterovCParams) -> Result<(f64, Vec<f64>), ChainError> {
    check_dim(x, p.dim())?;
    let mut grad = vec![0.0; p.dim()];
    let v = nc_value_grad(x, &mut grad);
    Ok((v, grad))
}

pub fn nc_hessian(p: &NesterovCParams) -> SymTridiag {
    q_hessian_raw(p.dim(), 1.0, 1.0).scaled(0.25)
}

/// Exact minimizer `x*_k = 1 - k / 2m`.
pub fn nc_minimizer(p: &NesterovCParams) -> Vec<f64> {
    let denom = (2 * p.m) as f64;
    (1..=p.dim()).map(|k| 1.0 - k as f64 / denom).collect()
}

/// `inf f_Nc = 1 / (16 m)`.
pub fn nc_optimum(p: &NesterovCParams) -> f64 {
    1.0 / (16.0 * p.m as f64)
}

/// Bound `dist²(0, X*) ≤ 2m/3`.
pub fn nc_dist_sq_bound(p: &NesterovCParams) -> f64 {
    2.0 * p.m as f64 / 3.0
}

/// Gap floor `1 / (16 m)` for points whose coordinates `m..2m-1` vanish.
pub fn nc_tail_gap_lower(p: &NesterovCParams) -> f64 {
    1.0 / (16.0 * p.m as f64)
}

// ---------------------------------------------------------------------------
// Γ penalty and the nonconvex chain

const GAMMA_OFFSET: f64 = -0.5 - 0.5 * core::f64::consts::LN_2 + core::f64::consts::FRAC_PI_4;

/// `120 ∫₁^t s²(s - 1)/(1 + s²) ds` through its antiderivative
/// `s²/2 - s - ½ ln(1 + s²) + arctan s`.
pub fn gamma1(t: f64) -> f64 {
    120.0 * (0.5 * t * t - t - 0.5 * ln_1p(t * t) + atan(t) - GAMMA_OFFSET)
}

pub fn gamma1_prime(t: f64) -> f64 {
    120.0 * t * t * (t - 1.0) / (1.0 + t * t)
}

pub fn gamma1_second(t: f64) -> f64 {
    let d = 1.0 + t * t;
    120.0 * (t * t * t * t + 3.0 * t * t - 2.0 * t) / (d * d)
}

/// Value and gradient of `Γ(x) = Σ_{i ≤ m} γ(x_i)`; the last coordinate of
/// the `m + 1` vector does not enter.
pub fn gamma_eval(x: &[f64], p: &CarmonParams) -> Result<(f64, Vec<f64>), ChainError> {
    check_dim(x, p.dim())?;
    let mut grad = vec![0.0; p.dim()];
    let mut v = 0.0;
    for i in 0..p.m {
        v += gamma1(x[i]);
        grad[i] = gamma1_prime(x[i]);
    }
    Ok((v, grad))
}

pub(crate) fn fc_value_grad(x: &[f64], p: &CarmonParams, grad: &mut [f64]) -> f64 {
    let a = p.alpha;
    let mut v = q_value_grad(x, sqrt(a), 0.0, grad);
    for i in 0..p.m {
        v += a * gamma1(x[i]);
        grad[i] += a * gamma1_prime(x[i]);
    }
    v
}

/// Value and gradient of `Q(x; √α, m+1, 0) + α Γ(x)`.
pub fn fc_eval(x: &[f64], p: &CarmonParams) -> Result<(f64, Vec<f64>), ChainError> {
    check_dim(x, p.dim())?;
    let mut grad = vec![0.0; p.dim()];
    let v = fc_value_grad(x, p, &mut grad);
    Ok((v, grad))
}

pub fn fc_hessian(x: &[f64], p: &CarmonParams) -> SymTridiag {
    let mut h = q_hessian_raw(p.dim(), sqrt(p.alpha), 0.0);
    for i in 0..p.m {
        h.diag[i] += p.alpha * gamma1_second(x[i]);
    }
    h
}

/// `f_C(0) = √α/2 + α m γ(0)`; since `Q ≥ 0`, `Γ ≥ 0` and both vanish at the
/// all-ones vector, `inf f_C = 0` and this is also the exact gap at the origin.
pub fn fc_value_at_zero(p: &CarmonParams) -> f64 {
    0.5 * sqrt(p.alpha) + p.alpha * p.m as f64 * gamma1(0.0)
}

/// Gap bound `√α/2 + 10 α m`.
pub fn fc_gap_bound(p: &CarmonParams) -> f64 {
    0.5 * sqrt(p.alpha) + 10.0 * p.alpha * p.m as f64
}

/// Gradient-norm floor `α^{3/4}/4` for points with `x_m = x_{m+1} = 0`.
pub fn fc_grad_floor(p: &CarmonParams) -> f64 {
    pow(p.alpha, 0.75) / 4.0
}

/// Smoothness class `(-α c_γ, 4 + α c_γ)`.
pub fn fc_class_interval(p: &CarmonParams) -> (f64, f64) {
    (-p.alpha * C_GAMMA, 4.0 + p.alpha * C_GAMMA)
}

// ---------------------------------------------------------------------------

/// One base hard function with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ChainFunctionSpec {
    Quad(ChainQuadParams),
    NesterovSc(NesterovScParams),
    NesterovC(NesterovCParams),
    Carmon(CarmonParams),
}

impl ChainFunctionSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Quad(p) => p.m,
            Self::NesterovSc(p) => p.m,
            Self::NesterovC(p) => p.dim(),
            Self::Carmon(p) => p.dim(),
        }
    }

    /// Writes the gradient into `grad` (length `dim()`) and returns the value.
    pub fn value_grad_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Self::Quad(p) => q_value_grad(x, p.xi, p.zeta, grad),
            Self::NesterovSc(p) => nsc_value_grad(x, p, grad),
            Self::NesterovC(_) => nc_value_grad(x, grad),
            Self::Carmon(p) => fc_value_grad(x, p, grad),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ChainError> {
        check_dim(x, self.dim())?;
        let mut grad = vec![0.0; self.dim()];
        let v = self.value_grad_into(x, &mut grad);
        Ok((v, grad))
    }

    pub fn hessian(&self, x: &[f64]) -> SymTridiag {
        match self {
            Self::Quad(p) => q_hessian(p),
            Self::NesterovSc(p) => nsc_hessian(p),
            Self::NesterovC(p) => nc_hessian(p),
            Self::Carmon(p) => fc_hessian(x, p),
        }
    }

    /// Smoothness class `(l, L)` of the function.
    pub fn class_interval(&self) -> (f64, f64) {
        match self {
            Self::Quad(_) => (0.0, 4.0),
            Self::NesterovSc(p) => (p.alpha, 1.0),
            Self::NesterovC(_) => (0.0, 1.0),
            Self::Carmon(p) => fc_class_interval(p),
        }
    }

    /// A global minimizer when one is known in closed form.
    pub fn minimizer(&self) -> Option<Vec<f64>> {
        match self {
            Self::Quad(_) => None,
            Self::NesterovSc(p) => Some(nsc_minimizer(p)),
            Self::NesterovC(p) => Some(nc_minimizer(p)),
            Self::Carmon(p) => Some(vec![1.0; p.dim()]),
        }
    }

    /// `inf f`, when known in closed form.
    pub fn optimum(&self) -> Option<f64> {
        match self {
            Self::Quad(_) => None,
            Self::NesterovSc(p) => Some(nsc_optimum(p)),
            Self::NesterovC(p) => Some(nc_optimum(p)),
            Self::Carmon(_) => Some(0.0),
        }
    }

    /// Exact `f(0) - inf f`, when known.
    pub fn gap_at_zero(&self) -> Option<f64> {
        match self {
            Self::Quad(_) => None,
            Self::NesterovSc(p) => Some(nsc_constants(p).gap_at_zero_bound),
            Self::NesterovC(p) => Some(0.125 - nc_optimum(p)),
            Self::Carmon(p) => Some(fc_value_at_zero(p)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn q_examples() {
        let p = ChainQuadParams::new(1.0, 3, 1.0).unwrap();
        let (v, g) = q_eval(&[0.0, 0.0, 0.0], &p).unwrap();
        assert_eq!(v, 0.5);
        assert_eq!(g, vec![-1.0, 0.0, 0.0]);
        let (v, g) = q_eval(&[1.0, 1.0, 1.0], &p).unwrap();
        assert_eq!(v, 0.5);
        assert_eq!(g, vec![0.0, 0.0, 1.0]);
        let p = ChainQuadParams::new(1.0, 3, 0.5).unwrap();
        assert_eq!(q_eval(&[1.0, 0.0, 0.0], &p).unwrap().0, 0.5);
    }

    #[test]
    fn q_rejects_bad_input() {
        let p = ChainQuadParams::new(1.0, 3, 1.0).unwrap();
        assert_eq!(
            q_eval(&[0.0; 2], &p),
            Err(ChainError::DimensionMismatch { expected: 3, got: 2 })
        );
        assert!(ChainQuadParams::new(1.5, 3, 1.0).is_err());
        assert!(ChainQuadParams::new(1.0, 0, 1.0).is_err());
        assert!(ChainQuadParams::new(1.0, 3, -0.1).is_err());
    }

    #[test]
    fn q_single_coordinate() {
        let p = ChainQuadParams::new(0.5, 1, 0.25).unwrap();
        let (v, g) = q_eval(&[2.0], &p).unwrap();
        assert!(close(v, 0.25 + 0.5, 1e-15));
        assert!(close(g[0], 0.5 + 0.5, 1e-15));
        assert_eq!(q_hessian(&p).diag, vec![0.75]);
    }

    #[test]
    fn nsc_examples() {
        let p = NesterovScParams::new(0.25, 4).unwrap();
        let (v, g) = nsc_eval(&[0.0; 4], &p).unwrap();
        assert!(close(v, 0.09375, 1e-15));
        assert_eq!(g, vec![-0.1875, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn nsc_constant_examples() {
        let c = nsc_constants(&NesterovScParams::new(1.0, 5).unwrap());
        assert_eq!(c.gap_lower, 0.0);
        assert_eq!(c.gap_at_zero_bound, 0.0);
        let c = nsc_constants(&NesterovScParams::new(0.25, 2).unwrap());
        assert!(close(c.gap_lower, 0.125 / 729.0, 1e-18));
        assert!(close(c.gap_lower, 1.7147e-4, 1e-8));
        assert_eq!(c.class_interval, (0.25, 1.0));
    }

    #[test]
    fn nsc_rejects_alpha_out_of_range() {
        assert!(NesterovScParams::new(0.0, 3).is_err());
        assert!(NesterovScParams::new(1.01, 3).is_err());
        assert!(CarmonParams::new(-0.5, 3).is_err());
    }

    #[test]
    fn nc_examples() {
        let p = NesterovCParams::new(2).unwrap();
        let (v, _) = nc_eval(&[0.0; 3], &p).unwrap();
        assert_eq!(v, 0.125);
        assert_eq!(nc_minimizer(&p), vec![0.75, 0.5, 0.25]);
        assert!(nc_eval(&[0.0; 4], &p).is_err());
    }

    #[test]
    fn gamma_examples() {
        let p = CarmonParams::new(0.5, 3).unwrap();
        let (v, g) = gamma_eval(&[1.0; 4], &p).unwrap();
        assert!(v.abs() < 1e-13);
        assert!(g.iter().all(|&x| x == 0.0));
        assert_eq!(gamma1_prime(-1.0), -120.0);
        // last coordinate never enters
        let (_, g) = gamma_eval(&[0.3, 0.2, 0.1, 5.0], &p).unwrap();
        assert_eq!(g[3], 0.0);
    }

    #[test]
    fn gamma_curvature_extrema_are_critical() {
        for &t in &GAMMA_CURVATURE_EXTREMA {
            let h = 1e-6;
            let d = (gamma1_second(t + h) - gamma1_second(t - h)) / (2.0 * h);
            assert!(d.abs() < 1e-6, "{t}: {d}");
        }
        assert!(close(gamma1_second(-1.0), 180.0, 1e-12));
    }

    #[test]
    fn fc_grad_floor_at_alpha_one() {
        let p = CarmonParams::new(1.0, 4).unwrap();
        assert_eq!(fc_grad_floor(&p), 0.25);
        let (_, g) = fc_eval(&[0.0; 5], &p).unwrap();
        assert!(crate::math::norm(&g) >= 0.25);
    }

    #[test]
    fn fc_zero_value_matches_eval() {
        let p = CarmonParams::new(0.04, 7).unwrap();
        let (v, _) = fc_eval(&[0.0; 8], &p).unwrap();
        assert!(close(v, fc_value_at_zero(&p), 1e-12));
        assert!(v <= fc_gap_bound(&p));
        let (v1, g1) = fc_eval(&[1.0; 8], &p).unwrap();
        assert!(v1.abs() < 1e-13 && g1.iter().all(|g| g.abs() < 1e-13));
    }
}
