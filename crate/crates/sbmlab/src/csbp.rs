//! Exact laws for the d = 1 half-space exit-mass process: a stable
//! continuous-state branching process with exponent 3/2 and scaling constant
//! sqrt(6)/3. These are the sharpest closed-form oracles in the crate.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CsbpParams {
    /// Branching exponent p' in (1, 2).
    pub exponent: f64,
    /// Scaling constant c0 > 0.
    pub c0: f64,
    /// Initial mass y0 > 0.
    pub y0: f64,
}

impl CsbpParams {
    /// Parameters of the half-space exit-mass process: p' = 3/2, c0 = sqrt(6)/3.
    pub fn halfspace_d1(y0: f64) -> Result<CsbpParams> {
        let p = CsbpParams {
            exponent: 1.5,
            c0: 6.0_f64.sqrt() / 3.0,
            y0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 1.0 && self.exponent < 2.0) {
            return Err(Error::domain(format!(
                "csbp exponent must be in (1,2), got {}",
                self.exponent
            )));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::domain(format!("csbp c0 must be > 0, got {}", self.c0)));
        }
        if !(self.y0 > 0.0) {
            return Err(Error::domain(format!("csbp y0 must be > 0, got {}", self.y0)));
        }
        Ok(())
    }
}

/// Cumulant flow u^lambda(t): solution of du/dt = -c0 u^{p'}, u(0) = lambda.
///
/// Separable closed form (lambda^{1-p'} + c0 (p'-1) t)^{-1/(p'-1)}; for the
/// half-space parameters this is 6 (t + sqrt(6/lambda))^{-2}.
pub fn u_lambda(t: f64, lambda: f64, params: &CsbpParams) -> Result<f64> {
    params.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("u_lambda: lambda must be > 0, got {lambda}")));
    }
    if t < 0.0 {
        return Err(Error::domain(format!("u_lambda: t must be >= 0, got {t}")));
    }
    let q = params.exponent - 1.0;
    Ok((lambda.powf(-q) + params.c0 * q * t).powf(-1.0 / q))
}

/// Blow-up limit of the cumulant flow: lim_{lambda -> inf} u^lambda(t).
pub fn u_infinity(t: f64, params: &CsbpParams) -> Result<f64> {
    params.validate()?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("u_infinity: t must be > 0, got {t}")));
    }
    let q = params.exponent - 1.0;
    Ok((params.c0 * q * t).powf(-1.0 / q))
}

/// P(Y_r = 0) = exp(-y0 u^inf(r)); for the half-space parameters
/// exp(-6 y0 / r^2).
pub fn extinction_prob(r: f64, params: &CsbpParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("extinction_prob: r must be > 0, got {r}")));
    }
    Ok((-params.y0 * u_infinity(r, params)?).exp())
}

/// Laplace transform E exp(-lambda Y_r) = exp(-y0 u^lambda(r)).
pub fn laplace_transform(r: f64, lambda: f64, params: &CsbpParams) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(1.0);
    }
    Ok((-params.y0 * u_lambda(r, lambda, params)?).exp())
}

/// One validation cell of the exit-law report.
#[derive(Debug, Clone, Serialize)]
pub struct LawCell {
    pub r: f64,
    pub lambda: f64,
    pub empirical: f64,
    pub target: f64,
    pub stderr: f64,
    pub z: f64,
    pub n: usize,
    pub underpowered: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitLawReport {
    pub cells: Vec<LawCell>,
    pub extinction: Vec<LawCell>,
    /// Regression slope of Y_{r2} on Y_{r1} for consecutive levels.
    pub martingale_slopes: Vec<(f64, f64, f64)>,
    pub all_within_3se: bool,
}

/// Validate simulated exit masses against the closed forms. `samples[i][j]`
/// is the frozen mass of replicate i at level `r_grid[j]`.
pub fn validate_exit_law(
    samples: &[Vec<f64>],
    params: &CsbpParams,
    lambda_grid: &[f64],
    r_grid: &[f64],
) -> Result<ExitLawReport> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::input("validate_exit_law: no samples"));
    }
    if samples.iter().any(|s| s.len() != r_grid.len()) {
        return Err(Error::input("validate_exit_law: sample rows must match r_grid length"));
    }
    let n = samples.len();
    let mut cells = Vec::new();
    let mut extinction = Vec::new();
    let mut all_ok = true;

    for (j, &r) in r_grid.iter().enumerate() {
        for &lambda in lambda_grid {
            let vals: Vec<f64> = samples.iter().map(|s| (-lambda * s[j]).exp()).collect();
            let (mean, se) = mean_se(&vals);
            let target = laplace_transform(r, lambda, params)?;
            let z = if se > 0.0 { (mean - target) / se } else { 0.0 };
            let underpowered = n < 200;
            if !underpowered && z.abs() > 3.0 {
                all_ok = false;
            }
            cells.push(LawCell {
                r,
                lambda,
                empirical: mean,
                target,
                stderr: se,
                z,
                n,
                underpowered,
            });
        }
        // Extinction frequency vs exp(-6 y0 / r^2) with binomial error bars.
        let k = samples.iter().filter(|s| s[j] == 0.0).count();
        let p_hat = k as f64 / n as f64;
        let target = extinction_prob(r, params)?;
        let se = (target * (1.0 - target) / n as f64).sqrt();
        let z = if se > 0.0 { (p_hat - target) / se } else { 0.0 };
        let underpowered = n < 200;
        if !underpowered && z.abs() > 3.0 {
            all_ok = false;
        }
        extinction.push(LawCell {
            r,
            lambda: f64::INFINITY,
            empirical: p_hat,
            target,
            stderr: se,
            z,
            n,
            underpowered,
        });
    }

    // Martingale slope between consecutive levels.
    let mut martingale_slopes = Vec::new();
    for j in 1..r_grid.len() {
        let x: Vec<f64> = samples.iter().map(|s| s[j - 1]).collect();
        let y: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        if let Ok(fit) = crate::fit::ols(&x, &y) {
            martingale_slopes.push((r_grid[j - 1], r_grid[j], fit.slope));
        }
    }

    Ok(ExitLawReport {
        cells,
        extinction,
        martingale_slopes,
        all_within_3se: all_ok,
    })
}

pub(crate) fn mean_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate, OdeOptions};

    fn params() -> CsbpParams {
        CsbpParams::halfspace_d1(1.0).unwrap()
    }

    #[test]
    fn closed_form_identities() {
        let p = params();
        // t = 0 returns lambda.
        assert!((u_lambda(0.0, 3.7, &p).unwrap() - 3.7).abs() < 1e-12);
        // Half-space form: u^lambda(t) = 6 (t + sqrt(6/lambda))^{-2}.
        for (t, l) in [(0.5f64, 2.0f64), (1.0, 6.0), (3.0, 0.4)] {
            let direct = 6.0 / ((t + (6.0 / l).sqrt()) * (t + (6.0 / l).sqrt()));
            assert!((u_lambda(t, l, &p).unwrap() - direct).abs() < 1e-12 * direct);
        }
        // lambda -> inf limit equals 6/t^2.
        assert!((u_infinity(2.0, &p).unwrap() - 1.5).abs() < 1e-12);
        // Extinction value at y0 = 1, r = 1.
        let e = extinction_prob(1.0, &p).unwrap();
        assert!((e - (-6.0f64).exp()).abs() < 1e-12);
        assert!((e - 2.4788e-3).abs() < 1e-6);
    }

    #[test]
    fn agrees_with_direct_integration() {
        // Adaptive integration of du/dt = -c0 u^p to 1e-9 relative.
        let p = params();
        for &(lambda, t_end) in &[(5.0, 2.0), (0.7, 4.0), (100.0, 0.3)] {
            let run = integrate(
                |_t, u: &[f64; 1]| [-p.c0 * u[0].powf(p.exponent)],
                0.0,
                [lambda],
                t_end,
                &OdeOptions {
                    rtol: 1e-12,
                    atol: 1e-14,
                    ..OdeOptions::default()
                },
                None,
                None,
            )
            .unwrap();
            let exact = u_lambda(t_end, lambda, &p).unwrap();
            assert!(
                (run.last_y[0] - exact).abs() < 1e-9 * exact,
                "lambda={lambda}: {} vs {exact}",
                run.last_y[0]
            );
        }
    }

    #[test]
    fn semigroup_property() {
        let p = params();
        for &(l, s, t) in &[(2.0, 0.3, 0.9), (7.0, 1.0, 2.0), (0.2, 0.05, 4.0)] {
            let lhs = u_lambda(t, u_lambda(s, l, &p).unwrap(), &p).unwrap();
            let rhs = u_lambda(s + t, l, &p).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * rhs, "({l},{s},{t}): {lhs} vs {rhs}");
        }
    }

    #[test]
    fn monotonicity() {
        let p = params();
        let mut prev = f64::INFINITY;
        for i in 1..20 {
            let t = i as f64 * 0.25;
            let v = u_lambda(t, 4.0, &p).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(u_lambda(1.0, 5.0, &p).unwrap() > u_lambda(1.0, 4.0, &p).unwrap());
    }

    #[test]
    fn extinction_limits() {
        let p = params();
        assert!(extinction_prob(1e9, &p).unwrap() > 1.0 - 1e-8);
        let small = CsbpParams::halfspace_d1(1e-12).unwrap();
        assert!(extinction_prob(1.0, &small).unwrap() > 1.0 - 1e-8);
        assert!(extinction_prob(-1.0, &p).is_err());
        assert!(u_lambda(1.0, -2.0, &p).is_err());
    }
}
