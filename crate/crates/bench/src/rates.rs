//! Certified lower-bound curves straight from the factories.

use chainlb_core::chainfun::ChainFunctionSpec;
use chainlb_core::instance::{make_instance, Construction, FiniteSumInstance, InstanceError};
use chainlb_core::Family;
use serde::{Deserialize, Serialize};

use crate::fit::{fit_exponent, Fit, FitError, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Family actually built (a factory may fall back to an Ω(n) instance).
    pub family: Family,
    pub n: usize,
    pub eps: f64,
    pub horizon: usize,
    pub lower_bound: u64,
    /// `ln(2Δα / (ε(1-√α)²))`, the logarithmic factor of the strongly convex bound.
    pub log_factor: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CurveError {
    #[error("n = {n}, eps = {eps:e}: {source}")]
    Factory { n: usize, eps: f64, source: InstanceError },
    #[error("n = {n}, eps = {eps:e}: factory fell back to {got} (curve would mix regimes)")]
    Fallback { n: usize, eps: f64, got: Family },
    #[error(transparent)]
    Fit(#[from] FitError),
}

pub fn sc_log_factor(inst: &FiniteSumInstance) -> Option<f64> {
    match inst.construction {
        Construction::Embedded { base: ChainFunctionSpec::NesterovSc(p) } => {
            let s = p.alpha.sqrt();
            let delta = inst.inputs.delta?;
            Some((2.0 * delta * p.alpha / (inst.meta.target_epsilon * (1.0 - s) * (1.0 - s))).ln())
        }
        _ => None,
    }
}

/// Lower bound for every `(n, ε)` pair, `n` varying fastest.
pub fn lower_bound_curve(family: Family, ns: &[usize], l: f64, second: f64, delta: f64, eps: &[f64]) -> Result<Vec<CurvePoint>, CurveError> {
    let mut out = Vec::with_capacity(ns.len() * eps.len());
    for &e in eps {
        for &n in ns {
            let inst = make_instance(family, n, l, second, delta, e).map_err(|source| CurveError::Factory { n, eps: e, source })?;
            if inst.family != family {
                return Err(CurveError::Fallback { n, eps: e, got: inst.family });
            }
            out.push(CurvePoint {
                family,
                n,
                eps: e,
                horizon: inst.meta.horizon,
                lower_bound: inst.meta.lower_bound_ifo,
                log_factor: sc_log_factor(&inst),
            });
        }
    }
    Ok(out)
}

/// Fits `lower_bound` (optionally divided by the log factor) against `n` or `ε`.
pub fn fit_curve(points: &[CurvePoint], predictor: Predictor, normalize_log: bool) -> Result<Fit, FitError> {
    let xs: Vec<f64> = points
        .iter()
        .map(|p| match predictor {
            Predictor::N => p.n as f64,
            Predictor::Eps => p.eps,
        })
        .collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| match (normalize_log, p.log_factor) {
            (true, Some(f)) => p.lower_bound as f64 / f,
            _ => p.lower_bound as f64,
        })
        .collect();
    fit_exponent(&xs, &ys)
}
