//! Travelling-wave profiles for the KPP reductions of the exterior problem:
//! (1/2) phi'' + (1/2) phi' + beta (phi^2 - phi) = 0 at wave speed c = 1/2,
//! solved on the unstable manifold at 0 and normalised to phi(0) = 1/2.

use crate::error::{Error, Result};
use crate::fit::{ols, LinearFit};
use crate::ode::{integrate, OdeOptions, OdeStatus};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WaveRegime {
    /// c = sqrt(2 beta): decay (1 - phi) ~ c0 t e^{-t/2}.
    Critical,
    /// c > sqrt(2 beta): pure exponential decay at the slow root.
    Supercritical,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveSolution {
    pub beta: f64,
    pub c: f64,
    pub regime: WaveRegime,
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    /// Fitted exponential rate of 1 - phi(t) as t -> +inf.
    pub decay_rate: f64,
    pub decay_rate_se: f64,
    /// 0: pure exponential; 1: linear polynomial factor (critical case).
    pub decay_poly_order: u8,
    pub decay_fit: LinearFit,
}

/// Expected decay rate of 1 - phi: slow root of m^2 + m + 2 beta = 0, or 1/2
/// (with linear factor) in the critical case.
pub fn expected_decay_rate(beta: f64) -> (f64, u8) {
    let disc = 1.0 - 8.0 * beta;
    if disc.abs() < 1e-12 {
        (0.5, 1)
    } else {
        ((1.0 - disc.sqrt()) / 2.0, 0)
    }
}

pub fn kpp_wave(beta: f64, regime: WaveRegime) -> Result<WaveSolution> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("kpp_wave: beta must be > 0, got {beta}")));
    }
    let c = 0.5;
    let disc = c * c - 2.0 * beta; // c^2 vs 2 beta decides the regime
    let detected = if disc.abs() < 1e-12 {
        WaveRegime::Critical
    } else if disc > 0.0 {
        WaveRegime::Supercritical
    } else {
        return Err(Error::domain(format!(
            "kpp_wave: c = 1/2 below the critical speed for beta = {beta}"
        )));
    };
    if detected != regime {
        return Err(Error::input(format!(
            "kpp_wave: requested regime {regime:?} inconsistent with beta = {beta} at c = 1/2"
        )));
    }

    // Unstable-manifold start at phi ~ 0: phi'' + phi' + 2 beta (phi^2-phi)=0,
    // growth mode m+ = (-1 + sqrt(1+8 beta))/2 with quadratic correction.
    let m_plus = (-1.0 + (1.0 + 8.0 * beta).sqrt()) / 2.0;
    let c2 = -beta / (3.0 * beta - m_plus);
    let eps = 1e-8;
    let phi0 = eps + c2 * eps * eps;
    let dphi0 = m_plus * eps + 2.0 * m_plus * c2 * eps * eps;

    let rhs_phi = move |_t: f64, s: &[f64; 2]| [s[1], -s[1] - 2.0 * beta * (s[0] * s[0] - s[0])];
    let opts = OdeOptions {
        rtol: 1e-11,
        atol: 1e-300,
        h_init: 1e-3,
        h_max: 0.2,
        max_steps: 4_000_000,
    };
    let t_limit = 400.0;
    let half_event = |_t: f64, s: &[f64; 2]| 0.5 - s[0];
    let run_up = integrate(
        rhs_phi,
        0.0,
        [phi0, dphi0],
        t_limit,
        &opts,
        Some(&half_event),
        None,
    )?;
    let t_half = match run_up.status {
        OdeStatus::Event(te) => te,
        _ => {
            return Err(Error::convergence(
                "kpp_wave unstable-manifold integration",
                format!("phi never reached 1/2 by t = {t_limit}"),
            ))
        }
    };

    // Continue in psi = 1 - phi to avoid cancellation in the tail:
    // psi'' + psi' + 2 beta psi - 2 beta psi^2 = 0.
    let rhs_psi = move |_t: f64, s: &[f64; 2]| [s[1], -s[1] - 2.0 * beta * s[0] + 2.0 * beta * s[0] * s[0]];
    let psi0 = [1.0 - run_up.last_y[0], -run_up.last_y[1]];
    let tail_len = 80.0;
    let run_dn = integrate(rhs_psi, t_half, psi0, t_half + tail_len, &opts, None, None)?;
    if run_dn.status != OdeStatus::ReachedEnd {
        return Err(Error::convergence("kpp_wave tail integration", "psi integration stopped early"));
    }

    // Tail fit on tau = t - t_half in [20, 70].
    let (poly_order, expected) = {
        let (_r, o) = expected_decay_rate(beta);
        (o, _r)
    };
    let _ = expected;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let n_fit = 120;
    for i in 0..n_fit {
        let tau = 20.0 + 50.0 * i as f64 / (n_fit - 1) as f64;
        let psi = run_dn.dense.eval(t_half + tau)[0];
        if psi <= 0.0 {
            continue;
        }
        let mut y = psi.ln();
        if poly_order == 1 {
            y -= tau.ln();
        }
        xs.push(tau);
        ys.push(y);
    }
    let fit = ols(&xs, &ys)?;
    let decay_rate = -fit.slope;

    // Sampled profile on a symmetric grid around the phi(0) = 1/2 anchor.
    let span = 30.0f64.min(t_half - 0.5);
    let n = 241;
    let mut t = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        let tau = -span + 2.0 * span * i as f64 / (n - 1) as f64;
        let tt = t_half + tau;
        let v = if tt <= t_half {
            run_up.dense.eval(tt)[0]
        } else {
            1.0 - run_dn.dense.eval(tt)[0]
        };
        t.push(tau);
        phi.push(if tau == 0.0 { 0.5 } else { v.clamp(0.0, 1.0) });
    }

    Ok(WaveSolution {
        beta,
        c,
        regime,
        t,
        phi,
        decay_rate,
        decay_rate_se: fit.slope_se,
        decay_poly_order: poly_order,
        decay_fit: fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_wave_rate_half_with_linear_factor() {
        let w = kpp_wave(0.125, WaveRegime::Critical).unwrap();
        assert_eq!(w.decay_poly_order, 1);
        assert!((w.decay_rate - 0.5).abs() < 0.01, "rate = {}", w.decay_rate);
    }

    #[test]
    fn supercritical_rates() {
        let w = kpp_wave(1.0 / 9.0, WaveRegime::Supercritical).unwrap();
        assert_eq!(w.decay_poly_order, 0);
        assert!((w.decay_rate - 1.0 / 3.0).abs() < 0.01, "rate = {}", w.decay_rate);

        let w = kpp_wave(3.0 / 25.0, WaveRegime::Supercritical).unwrap();
        assert!((w.decay_rate - 2.0 / 5.0).abs() < 0.01, "rate = {}", w.decay_rate);
    }

    #[test]
    fn profile_shape() {
        let w = kpp_wave(1.0 / 9.0, WaveRegime::Supercritical).unwrap();
        // anchored at 1/2 exactly
        let mid = w.t.iter().position(|&t| t == 0.0).unwrap();
        assert_eq!(w.phi[mid], 0.5);
        // nondecreasing in [0,1)
        for v in w.phi.windows(2) {
            assert!(v[1] >= v[0] - 1e-9);
        }
        assert!(w.phi[0] >= 0.0 && *w.phi.last().unwrap() < 1.0);
    }

    #[test]
    fn regime_validation() {
        assert!(kpp_wave(0.125, WaveRegime::Supercritical).is_err());
        assert!(kpp_wave(1.0 / 9.0, WaveRegime::Critical).is_err());
        assert!(kpp_wave(0.2, WaveRegime::Supercritical).is_err()); // beyond critical speed
        assert!(kpp_wave(-1.0, WaveRegime::Supercritical).is_err());
    }
}
