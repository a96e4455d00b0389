//! Monte Carlo verification of the Bessel identities: exact hitting laws,
//! the Girsanov change-of-dimension identity, and the exponential functionals
//! of int rho^{-q} ds with their closed forms and iterated bounds.

use super::besq::{besq_transition, BesselSpec, PathState, StepOutcome};
use super::PathFunctionalSample;
use crate::error::{Error, Result};
use crate::rng::replicate_rng;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Exact transient hitting probability P_r(tau_R < inf) = (R/r)^{2 xi}.
pub fn hitting_prob(xi: f64, r: f64, big_r: f64) -> Result<f64> {
    if xi < 0.0 {
        return Err(Error::domain(format!("hitting_prob: xi must be >= 0, got {xi}")));
    }
    if !(big_r > 0.0 && big_r <= r) {
        return Err(Error::domain(format!("hitting_prob: need 0 < R <= r, got R={big_r}, r={r}")));
    }
    Ok((big_r / r).powf(2.0 * xi))
}

/// Monte Carlo companion of `hitting_prob`: paths beyond the escape barrier
/// are credited the exact residual probability, keeping the estimator
/// unbiased while bounding the horizon.
pub fn hitting_prob_mc(spec: &BesselSpec, n: usize, seed: u64) -> Result<PathFunctionalSample> {
    if spec.nu < 0.0 {
        return Err(Error::domain("hitting_prob_mc: needs transient index nu >= 0"));
    }
    let vals: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let mut st = PathState {
                t: 0.0,
                y: spec.start * spec.start,
                steps: 0,
            };
            loop {
                match super::besq::step_path(spec, &mut st, &[], &mut [], &mut rng) {
                    StepOutcome::Absorbed => return 1.0,
                    StepOutcome::Escaped(yb) => {
                        return ((spec.absorb * spec.absorb) / yb).powf(spec.nu)
                    }
                    StepOutcome::Continuing => {
                        if st.steps >= spec.max_steps {
                            // Transient paths essentially never linger this
                            // long; credit the residual from wherever we are.
                            return ((spec.absorb * spec.absorb) / st.y).powf(spec.nu);
                        }
                    }
                }
            }
        })
        .collect();
    Ok(PathFunctionalSample::from_values(
        &vals,
        "1(tau_R < inf)",
        "none (escape credited exactly)",
    ))
}

/// Bounded adapted functionals for the change-of-dimension identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhiKind {
    /// Constant 1.
    One,
    /// Indicator 1(tau_R <= t).
    HitBefore,
    /// Bounded function of the stopped radius: 1/(1 + rho^2).
    BoundedRadius,
}

impl PhiKind {
    fn eval(self, hit: bool, y_end: f64) -> f64 {
        match self {
            PhiKind::One => 1.0,
            PhiKind::HitBefore => {
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
            PhiKind::BoundedRadius => 1.0 / (1.0 + y_end),
        }
    }
    pub fn label(self) -> &'static str {
        match self {
            PhiKind::One => "1",
            PhiKind::HitBefore => "1(tau_R<=t)",
            PhiKind::BoundedRadius => "1/(1+rho^2)",
        }
    }
}

/// Simulate dimension 2+2nu from r, stopped at t_end or tau_R, accumulating
/// int rho^{-2} ds; returns (hit, y at stop, integral).
fn run_to_horizon(
    nu: f64,
    r: f64,
    big_r: f64,
    t_end: f64,
    step_scale: f64,
    rng: &mut impl Rng,
) -> (bool, f64, f64) {
    let delta = 2.0 + 2.0 * nu;
    let mut t = 0.0;
    let mut y = r * r;
    let r_absorb2 = big_r * big_r;
    let mut integral = 0.0;
    loop {
        let mut h = step_scale * y;
        let mut last = false;
        if t + h >= t_end {
            h = t_end - t;
            last = true;
            if h <= 0.0 {
                return (false, y, integral);
            }
        }
        let y1 = besq_transition(y, h, delta, rng);
        let crossed = y1 <= r_absorb2;
        let bridged = if !crossed {
            let a = y.sqrt() - big_r;
            let b = y1.sqrt() - big_r;
            a > 0.0 && b > 0.0 && rng.gen::<f64>() < (-2.0 * a * b / h).exp()
        } else {
            false
        };
        let frac = if crossed || bridged { 0.5 } else { 1.0 };
        let y1c = y1.max(r_absorb2.max(1e-300));
        integral += frac * 0.5 * (1.0 / y + 1.0 / y1c) * h;
        t += h;
        y = y1;
        if crossed || bridged {
            return (true, r_absorb2, integral);
        }
        if last {
            return (false, y, integral);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct YorCheck {
    pub lhs: PathFunctionalSample,
    pub rhs: PathFunctionalSample,
    pub nu: f64,
    pub z: f64,
    pub within_3se: bool,
}

/// Both sides of the change-of-dimension identity
/// E_r^{(2+2mu)}[Phi exp(-(lambda^2/2) int_0^{t ^ tau_R} rho^-2)]
///   = r^{nu-mu} E_r^{(2+2nu)}[rho_{t ^ tau_R}^{-nu+mu} Phi],
/// nu = sqrt(lambda^2 + mu^2), estimated by independent Monte Carlo.
pub fn yor_identity_check(
    lambda: f64,
    mu: f64,
    r: f64,
    big_r: f64,
    t: f64,
    phi: PhiKind,
    n: usize,
    seed: u64,
) -> Result<YorCheck> {
    if lambda < 0.0 {
        return Err(Error::domain("yor_identity_check: lambda must be >= 0"));
    }
    if mu <= -0.5 {
        return Err(Error::domain(format!("yor_identity_check: mu must be > -1/2, got {mu}")));
    }
    if !(big_r > 0.0 && big_r < r) {
        return Err(Error::domain("yor_identity_check: need 0 < R < r"));
    }
    let nu = (lambda * lambda + mu * mu).sqrt();
    let step_scale = 0.004;

    let lhs_vals: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let (hit, y_end, integral) = run_to_horizon(mu, r, big_r, t, step_scale, &mut rng);
            phi.eval(hit, y_end) * (-0.5 * lambda * lambda * integral).exp()
        })
        .collect();
    let rhs_vals: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed.wrapping_add(0x5851_f42d_4c95_7f2d), i);
            let (hit, y_end, _integral) = run_to_horizon(nu, r, big_r, t, step_scale, &mut rng);
            let weight = y_end.powf(0.5 * (mu - nu));
            r.powf(nu - mu) * weight * phi.eval(hit, y_end)
        })
        .collect();

    let lhs = PathFunctionalSample::from_values(
        &lhs_vals,
        &format!("Phi={} exp(-(l^2/2) int rho^-2), dim {}", phi.label(), 2.0 + 2.0 * mu),
        "t ^ tau_R horizon",
    );
    let rhs = PathFunctionalSample::from_values(
        &rhs_vals,
        &format!("r^(nu-mu) rho^(mu-nu) Phi={}, dim {}", phi.label(), 2.0 + 2.0 * nu),
        "t ^ tau_R horizon",
    );
    let se = (lhs.standard_error.powi(2) + rhs.standard_error.powi(2)).sqrt();
    let z = if se > 0.0 { (lhs.estimate - rhs.estimate) / se } else { 0.0 };
    Ok(YorCheck {
        within_3se: z.abs() <= 3.0,
        lhs,
        rhs,
        nu,
        z,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpFunctionalCheck {
    pub sample: PathFunctionalSample,
    pub closed_form: f64,
    pub z: f64,
    pub within_3se: bool,
}

/// Conditional estimate E[X | tau_1 < inf] via importance reweighting with the
/// exact hitting probability: mean of per-path contributions (absorbed paths
/// carry their weight, escaped paths carry the exact residual hitting
/// probability) divided by (1/r)^{2 nu}.
fn conditional_on_hit(
    nu: f64,
    r: f64,
    q: f64,
    gamma: f64,
    n: usize,
    seed: u64,
) -> Result<PathFunctionalSample> {
    let spec = BesselSpec::new(nu, r, 1.0)?;
    let p_hit = hitting_prob(nu, r, 1.0)?;
    let vals: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let mut st = PathState {
                t: 0.0,
                y: r * r,
                steps: 0,
            };
            let qs = [q];
            let mut acc = [0.0];
            loop {
                match super::besq::step_path(&spec, &mut st, &qs, &mut acc, &mut rng) {
                    StepOutcome::Absorbed => return (gamma * acc[0]).exp(),
                    StepOutcome::Escaped(yb) => {
                        return (gamma * acc[0]).exp() * (1.0 / yb).powf(nu)
                    }
                    StepOutcome::Continuing => {
                        if st.steps >= spec.max_steps {
                            return (gamma * acc[0]).exp() * (1.0 / st.y).powf(nu);
                        }
                    }
                }
            }
        })
        .map(|v| v / p_hit)
        .collect();
    Ok(PathFunctionalSample::from_values(
        &vals,
        &format!("exp({gamma} int rho^-{q})"),
        "tau_1 < inf (exact-probability reweighting)",
    ))
}

/// E_r^{(2+2nu)}[exp(gamma int_0^{tau_1} rho^-2) | tau_1 < inf] against the
/// closed form r^{nu - sqrt(nu^2 - 2 gamma)}.
pub fn exp_functional_mc(nu: f64, gamma: f64, r: f64, n: usize, seed: u64) -> Result<ExpFunctionalCheck> {
    if gamma < 0.0 {
        return Err(Error::domain("exp_functional_mc: gamma must be >= 0"));
    }
    if 2.0 * gamma > nu * nu {
        return Err(Error::domain(format!(
            "exp_functional_mc: need sqrt(2 gamma) <= nu, got gamma={gamma}, nu={nu}"
        )));
    }
    if r < 1.0 {
        return Err(Error::domain("exp_functional_mc: need r >= 1"));
    }
    let closed_form = r.powf(nu - (nu * nu - 2.0 * gamma).sqrt());
    if gamma == 0.0 || r == 1.0 {
        let sample = PathFunctionalSample {
            n_paths: 0,
            estimate: closed_form,
            standard_error: 0.0,
            functional: "degenerate (gamma = 0 or r = 1)".into(),
            conditioning: "tau_1 < inf".into(),
        };
        return Ok(ExpFunctionalCheck {
            sample,
            closed_form,
            z: 0.0,
            within_3se: true,
        });
    }
    let sample = conditional_on_hit(nu, r, 2.0, gamma, n, seed)?;
    let z = sample.z_against(closed_form);
    Ok(ExpFunctionalCheck {
        within_3se: z.abs() <= 3.0,
        sample,
        closed_form,
        z,
    })
}

/// The iterated-halving constant 2^nu 2^{nu 2^{q-2}/(2^{q-2}-1)}.
pub fn iterated_bound_constant(q: f64, nu: f64) -> Result<f64> {
    if q <= 2.0 {
        return Err(Error::domain("iterated_bound_constant: need q > 2"));
    }
    let w = 2.0f64.powf(q - 2.0);
    Ok(2.0f64.powf(nu) * 2.0f64.powf(nu * w / (w - 1.0)))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub bound: f64,
    pub per_r: Vec<(f64, PathFunctionalSample)>,
    pub holds: bool,
}

/// E[exp(gamma int_0^{tau_1} rho^-q) | tau_1 < inf] stays below the iterated
/// bound for every start radius in the grid.
pub fn exp_functional_bound_check(
    nu: f64,
    gamma: f64,
    q: f64,
    r_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<BoundCheck> {
    if 2.0 * gamma > nu * nu {
        return Err(Error::domain("exp_functional_bound_check: need sqrt(2 gamma) <= nu"));
    }
    if q <= 2.0 {
        return Err(Error::domain("exp_functional_bound_check: need q > 2"));
    }
    if r_grid.iter().any(|r| *r < 1.0) {
        return Err(Error::domain("exp_functional_bound_check: all r must be >= 1"));
    }
    let bound = iterated_bound_constant(q, nu)?;
    let mut per_r = Vec::new();
    let mut holds = true;
    for (k, &r) in r_grid.iter().enumerate() {
        let sample = if r == 1.0 {
            PathFunctionalSample {
                n_paths: 0,
                estimate: 1.0,
                standard_error: 0.0,
                functional: "tau_1 = 0".into(),
                conditioning: "tau_1 < inf".into(),
            }
        } else {
            conditional_on_hit(nu, r, q, gamma, n, seed.wrapping_add(k as u64))?
        };
        if sample.estimate - 3.0 * sample.standard_error >= bound {
            holds = false;
        }
        per_r.push((r, sample));
    }
    Ok(BoundCheck { bound, per_r, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_hitting_values() {
        assert!((hitting_prob(1.0, 2.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((hitting_prob(3.3, 5.0, 5.0).unwrap() - 1.0).abs() < 1e-15);
        let xi = 2.0 * 2.0_f64.sqrt();
        let v = hitting_prob(xi, 4.0, 1.0).unwrap();
        assert!((v - 4.0_f64.powf(-4.0 * 2.0_f64.sqrt())).abs() < 1e-15);
        assert!((v - 3.90e-4).abs() < 1e-5);
        assert!(hitting_prob(1.0, 1.0, 2.0).is_err());
        assert!(hitting_prob(-1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn mc_hitting_matches_exact() {
        let spec = BesselSpec::new(1.0, 2.0, 1.0).unwrap();
        let s = hitting_prob_mc(&spec, 30_000, 7).unwrap();
        let exact = 0.25;
        assert!(
            s.z_against(exact).abs() <= 3.0,
            "estimate {} +- {} vs {exact}",
            s.estimate,
            s.standard_error
        );
        // SE scaling: doubling n should shrink SE by ~sqrt(2) (within 20%).
        let s2 = hitting_prob_mc(&spec, 60_000, 8).unwrap();
        let ratio = s.standard_error / s2.standard_error;
        assert!((ratio - 2.0_f64.sqrt()).abs() < 0.2 * 2.0_f64.sqrt(), "ratio {ratio}");
    }

    #[test]
    fn yor_identity_at_lambda_zero() {
        // nu = mu: the weight is 1 and both sides estimate E[Phi].
        for phi in [PhiKind::One, PhiKind::HitBefore, PhiKind::BoundedRadius] {
            let c = yor_identity_check(0.0, 0.5, 2.0, 1.0, 2.0, phi, 20_000, 3).unwrap();
            assert!(c.within_3se, "phi {:?}: z = {}", phi, c.z);
        }
    }

    #[test]
    fn yor_degenerate_small_t() {
        // Tiny horizon: P(tau_R <= t) ~ 0, both sides ~ 0 for the indicator.
        let c = yor_identity_check(1.0, 0.5, 2.0, 1.0, 0.01, PhiKind::HitBefore, 5_000, 5).unwrap();
        assert!(c.lhs.estimate.abs() < 1e-3 && c.rhs.estimate.abs() < 1e-3);
        assert!(c.within_3se);
    }

    #[test]
    fn exp_functional_closed_form() {
        // nu=2, gamma=1, r=2: 2^{2-sqrt(2)} ~ 1.5157.
        let c = exp_functional_mc(2.0, 1.0, 2.0, 40_000, 11).unwrap();
        assert!((c.closed_form - 2.0_f64.powf(2.0 - 2.0_f64.sqrt())).abs() < 1e-12);
        assert!((c.closed_form - 1.5157).abs() < 1e-3);
        assert!(c.within_3se, "z = {}", c.z);
        // Degenerate cases are exact.
        assert!((exp_functional_mc(2.0, 0.0, 2.0, 10, 1).unwrap().sample.estimate - 1.0).abs() < 1e-15);
        assert!((exp_functional_mc(2.0, 1.0, 1.0, 10, 1).unwrap().sample.estimate - 1.0).abs() < 1e-15);
        assert!(exp_functional_mc(1.0, 2.0, 2.0, 10, 1).is_err()); // 2 gamma > nu^2
    }

    #[test]
    fn iterated_bound_values() {
        // q=3, nu=2: exponent nu (1 + 2) = 6 -> C = 2^6 = 64.
        assert!((iterated_bound_constant(3.0, 2.0).unwrap() - 64.0).abs() < 1e-12);
        // q -> inf: C -> 2^{2 nu}.
        let c = iterated_bound_constant(40.0, 2.0).unwrap();
        assert!((c - 16.0).abs() < 1e-6);
        assert!(iterated_bound_constant(2.0, 1.0).is_err());
    }
}
