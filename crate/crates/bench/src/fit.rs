//! Log–log least squares for rate exponents.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    N,
    Eps,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least 4 distinct predictor values, got {0}")]
    Degenerate(usize),
    #[error("log-log fit needs positive finite data (got x = {x}, y = {y})")]
    NonPositive { x: f64, y: f64 },
    #[error("x and y lengths differ")]
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// 95% confidence interval of the slope (Student t, `points − 2` dof).
    pub ci95: (f64, f64),
    pub points: usize,
    pub r_squared: f64,
}

pub const MIN_DISTINCT: usize = 4;

/// OLS of `ln y` on `ln x`.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Result<Fit, FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::Length);
    }
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(FitError::NonPositive { x, y });
        }
    }
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < MIN_DISTINCT {
        return Err(FitError::Degenerate(distinct.len()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = k - 2.0;
    let stderr = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).expect("dof >= 2").inverse_cdf(0.975);
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(Fit { slope, intercept, stderr, ci95: (slope - t * stderr, slope + t * stderr), points: lx.len(), r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [16.0, 64.0, 256.0, 1024.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.75)).collect();
        let f = fit_exponent(&xs, &ys).unwrap();
        assert!((f.slope - 0.75).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
    }

    #[test]
    fn hand_computed_noisy_fit() {
        // ln x = 0, 1, 2, 3; ln y = 0, 1, 1, 3 → slope 0.9, intercept -0.1, sse 0.7
        let e = std::f64::consts::E;
        let xs = [1.0, e, e * e, e * e * e];
        let ys = [1.0, e, e, e * e * e];
        let f = fit_exponent(&xs, &ys).unwrap();
        assert!((f.slope - 0.9).abs() < 1e-12);
        assert!((f.intercept + 0.1).abs() < 1e-12);
        assert!((f.stderr - (0.7f64 / 2.0 / 5.0).sqrt()).abs() < 1e-12);
        // t_{0.975, 2} = 4.302652729911275
        assert!((f.ci95.1 - f.slope - 4.302652729911275 * f.stderr).abs() < 1e-9);
    }

    #[test]
    fn degenerate_predictors_rejected() {
        assert_eq!(fit_exponent(&[1.0, 2.0, 2.0, 4.0], &[1.0; 4]), Err(FitError::Degenerate(3)));
        assert!(matches!(fit_exponent(&[1.0, 2.0, 3.0, 0.0], &[1.0; 4]), Err(FitError::NonPositive { .. })));
    }
}
