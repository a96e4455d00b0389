//! Exact transition sampling for the squared Bessel process
//! dY = delta dt + 2 sqrt(Y) dW: Y_{t+h} | Y_t = y is h times a noncentral
//! chi-square with delta degrees of freedom and noncentrality y/h, realised
//! as a Poisson-mixed gamma draw. Step sizes shrink with the current value so
//! the additive functionals int rho^{-q} ds stay well resolved near zero, and
//! first passages below the absorbing level use a Brownian-bridge crossing
//! correction.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

/// Simulation policy for one Bessel path.
#[derive(Debug, Clone, Copy)]
pub struct BesselSpec {
    /// Index nu >= -1/2; process dimension delta = 2 + 2 nu.
    pub nu: f64,
    /// Starting radius.
    pub start: f64,
    /// Absorbing level R >= 0 (paths stopped at tau_R never resume).
    pub absorb: f64,
    /// Relative step-size factor: dt = step_scale * Y. Smaller is finer.
    pub step_scale: f64,
    /// Paths are truncated once rho exceeds escape_factor * start, crediting
    /// the exact residual hitting probability.
    pub escape_factor: f64,
    /// Hard cap on steps per path.
    pub max_steps: usize,
}

impl BesselSpec {
    pub fn new(nu: f64, start: f64, absorb: f64) -> Result<BesselSpec> {
        if nu < -0.5 {
            return Err(Error::domain(format!("bessel index nu must be >= -1/2, got {nu}")));
        }
        if !(start > 0.0) {
            return Err(Error::domain("bessel start must be > 0"));
        }
        if absorb < 0.0 || absorb > start {
            return Err(Error::domain(format!(
                "absorbing level must satisfy 0 <= R <= start, got R={absorb}, start={start}"
            )));
        }
        Ok(BesselSpec {
            nu,
            start,
            absorb,
            step_scale: 0.004,
            escape_factor: 50.0,
            max_steps: 4_000_000,
        })
    }

    pub fn delta(&self) -> f64 {
        2.0 + 2.0 * self.nu
    }
}

/// One exact squared-Bessel increment: returns Y at t + h given Y = y.
pub fn besq_transition(y: f64, h: f64, delta: f64, rng: &mut impl Rng) -> f64 {
    debug_assert!(delta > 0.0);
    let nc = y / h;
    let j = if nc > 0.0 {
        Poisson::new(0.5 * nc).map(|p| p.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    };
    let shape = 0.5 * delta + j;
    if shape <= 0.0 {
        return 0.0;
    }
    let g = Gamma::new(shape, 2.0).expect("gamma shape/scale positive");
    h * g.sample(rng)
}

/// Running state of one path in the squared variable.
#[derive(Debug, Clone, Copy)]
pub struct PathState {
    pub t: f64,
    /// Squared radius.
    pub y: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Continuing,
    /// Hit the absorbing level (possibly via the bridge correction).
    Absorbed,
    /// Crossed the escape barrier; carries the squared radius there.
    Escaped(f64),
}

/// Advance one step; `integrands` accumulates trapezoid contributions of
/// rho^{-q} = Y^{-q/2} for each exponent in `qs` into `acc`.
pub fn step_path(
    spec: &BesselSpec,
    state: &mut PathState,
    qs: &[f64],
    acc: &mut [f64],
    rng: &mut impl Rng,
) -> StepOutcome {
    let y0 = state.y;
    let h = spec.step_scale * y0;
    let y1 = besq_transition(y0, h, spec.delta(), rng);
    state.t += h;
    state.steps += 1;

    let r_absorb2 = spec.absorb * spec.absorb;
    let crossed = y1 <= r_absorb2;
    // Brownian-bridge correction for a crossing hidden between endpoints.
    // rho has unit diffusion coefficient, so the bridge uses radii.
    let bridged = if !crossed && spec.absorb > 0.0 {
        let a = y0.sqrt() - spec.absorb;
        let b = y1.sqrt() - spec.absorb;
        if a > 0.0 && b > 0.0 {
            let p = (-2.0 * a * b / h).exp();
            rng.gen::<f64>() < p
        } else {
            false
        }
    } else {
        false
    };

    // Trapezoid accumulation of the path functionals over [t, t+h]; on an
    // absorbed step only half the interval is credited on average.
    let frac = if crossed || bridged { 0.5 } else { 1.0 };
    let y1c = y1.max(r_absorb2.max(1e-300));
    for (k, &q) in qs.iter().enumerate() {
        let f0 = y0.powf(-0.5 * q);
        let f1 = y1c.powf(-0.5 * q);
        acc[k] += frac * 0.5 * (f0 + f1) * h;
    }

    state.y = y1;
    if crossed || bridged {
        state.y = r_absorb2;
        return StepOutcome::Absorbed;
    }
    let barrier = spec.escape_factor * spec.start;
    if y1 >= barrier * barrier {
        return StepOutcome::Escaped(y1);
    }
    StepOutcome::Continuing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;

    /// One-step mean and variance of the exact transition sampler against
    /// E[Y_{t+h}|Y_t] = Y_t + delta h and Var = 4 Y_t h + 2 delta h^2.
    #[test]
    fn transition_moments() {
        let mut rng = replicate_rng(11, 0);
        let (y, h, delta) = (2.0, 0.05, 3.4);
        let n = 400_000;
        let draws: Vec<f64> = (0..n).map(|_| besq_transition(y, h, delta, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        let exact_mean = y + delta * h;
        let exact_var = 4.0 * y * h + 2.0 * delta * h * h;
        let se_mean = (exact_var / n as f64).sqrt();
        assert!(
            (mean - exact_mean).abs() < 4.0 * se_mean,
            "mean {mean} vs {exact_mean} (se {se_mean})"
        );
        // Variance of the sample variance ~ 2 var^2 / n for near-Gaussian; the
        // noncentral chi-square has excess kurtosis, allow a wide band.
        assert!((var - exact_var).abs() < 0.02 * exact_var, "var {var} vs {exact_var}");
    }

    #[test]
    fn spec_validation() {
        assert!(BesselSpec::new(-0.6, 1.0, 0.5).is_err());
        assert!(BesselSpec::new(1.0, 1.0, 2.0).is_err());
        assert!(BesselSpec::new(1.0, -1.0, 0.0).is_err());
        let s = BesselSpec::new(0.5, 2.0, 1.0).unwrap();
        assert!((s.delta() - 3.0).abs() < 1e-15);
    }
}
