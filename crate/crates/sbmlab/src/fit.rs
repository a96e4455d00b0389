//! Ordinary least squares on (log-)transformed data, with the diagnostics the
//! rest of the crate reports: standard error of the slope and R^2.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r2: f64,
    pub n: usize,
}

/// Plain OLS of y on x. Rejects degenerate abscissae rather than guessing.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::input("ols: x and y lengths differ"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::input("ols: need at least two points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::input("ols: degenerate abscissa grid (all x equal or non-finite)"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let slope_se = if n > 2 {
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        r2,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitMethod {
    BoxCount,
    TailRegression,
    RateRegression,
    DecayRate,
}

/// A fitted power-law (or exponential-rate) exponent with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    pub estimate: f64,
    pub stderr: f64,
    pub r2: f64,
    pub n_points: usize,
    /// Abscissa range (in the original, untransformed units) used for the fit.
    pub scale_range: (f64, f64),
    pub method: FitMethod,
}

/// Fit `y ~ C * x^estimate` by OLS on log-log data. All inputs must be > 0.
pub fn loglog_exponent(x: &[f64], y: &[f64], method: FitMethod) -> Result<ExponentFit> {
    if x.len() < 4 {
        return Err(Error::input(format!(
            "loglog_exponent: need at least 4 points per regression, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(Error::input("loglog_exponent: data must be positive and finite"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let fit = ols(&lx, &ly)?;
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(ExponentFit {
        estimate: fit.slope,
        stderr: fit.slope_se,
        r2: fit.r2,
        n_points: fit.n,
        scale_range: (lo, hi),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept + 1.0).abs() < 1e-12);
        assert!(f.r2 > 1.0 - 1e-12);
        assert!(f.slope_se < 1e-10);
    }

    #[test]
    fn recovers_power_law() {
        let x: Vec<f64> = (1..=12).map(|i| 1.5_f64.powi(i)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v.powf(-2.5)).collect();
        let f = loglog_exponent(&x, &y, FitMethod::RateRegression).unwrap();
        assert!((f.estimate + 2.5).abs() < 1e-10);
    }

    #[test]
    fn rejects_degenerate_grid() {
        let x = vec![2.0, 2.0, 2.0, 2.0];
        let y = vec![1.0, 2.0, 3.0, 4.0];
        assert!(loglog_exponent(&x, &y, FitMethod::RateRegression).is_err());
    }

    #[test]
    fn rejects_short_input() {
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![1.0, 2.0, 3.0];
        assert!(loglog_exponent(&x, &y, FitMethod::RateRegression).is_err());
    }
}
