//! Point-source profiles: the explicit monotone limit, the d = 1 closed form,
//! and the inward-shooting solver recovering the source strength by its flux.

use super::{DenseRadial, GridSpec, Lambda, Profile, RadialKind, RadialSolution};
use crate::error::{Error, Result};
use crate::exponents::{Dim, ExponentTable};
use crate::ode::{integrate, DenseOutput, OdeOptions, OdeStatus};

/// u(r) = 2(4-d)/r^2 on the requested radii.
pub fn v_infinity(d: Dim, r_values: &[f64]) -> Result<RadialSolution> {
    if r_values.iter().any(|r| *r <= 0.0 || !r.is_finite()) {
        return Err(Error::domain("v_infinity: radii must be positive"));
    }
    let coeff = d.v_inf_coeff();
    let u = r_values.iter().map(|r| coeff / (r * r)).collect();
    Ok(RadialSolution {
        kind: RadialKind::VInfinity,
        d,
        lambda: Lambda::Infinite,
        epsilon: None,
        r: r_values.to_vec(),
        u,
        flux_at_origin: None,
        far_coeff: None,
        collar_h: None,
        profile: Profile::VInfinity { coeff },
    })
}

/// Closed-form d = 1 profile: 6 (|x| + (12/lambda)^{1/3})^{-2}.
///
/// Solves v'' = v^2 with v'(0+) = -lambda; verified by substitution in the
/// test suite before anything else relies on it.
pub fn v_lambda_exact_d1(lambda: f64, x: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("v_lambda_exact_d1: lambda must be > 0, got {lambda}")));
    }
    let b = (12.0 / lambda).powf(1.0 / 3.0);
    let s = x.abs() + b;
    Ok(6.0 / (s * s))
}

/// Default far-field truncation radius for a given source strength; keeps the
/// imposed asymptote error below the solver tolerances and satisfies the
/// V^inf(r_max) < 1e-4 requirement.
pub fn default_r_max(d: Dim, lambda: f64) -> f64 {
    let r_char = (12.0 / lambda).powf(1.0 / (4.0 - d.as_f64()));
    400.0 * r_char.max(1.0)
}

pub(crate) struct ShotProfile {
    pub dense: DenseRadial,
    pub flux: f64,
}

/// Characteristic polynomial of the compensated far-field linearisation.
fn char_poly(d: Dim, m: f64) -> f64 {
    let dd = d.as_f64();
    m * m + (dd - 6.0) * m - (8.0 - 2.0 * dd)
}

/// Far-field initial state for the compensated variable with coefficient `a`:
/// z = a e^{sigma t} - a^2/D(2 sigma) e^{2 sigma t}, sigma = 2 - p.
fn far_field_state(d: Dim, a: f64, t_max: f64) -> [f64; 2] {
    let p = ExponentTable::for_dim(d).p;
    let sigma = 2.0 - p;
    let kappa = -1.0 / char_poly(d, 2.0 * sigma);
    let e1 = (sigma * t_max).exp();
    let z = a * e1 + kappa * a * a * e1 * e1;
    let dz = sigma * a * e1 + 2.0 * sigma * kappa * a * a * e1 * e1;
    [z, dz]
}

fn z_rhs(d: Dim) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    let dd = d.as_f64();
    let y_inf = 8.0 - 2.0 * dd;
    move |_t, s: &[f64; 2]| [s[1], -(dd - 6.0) * s[1] + y_inf * s[0] - s[0] * s[0]]
}

fn y_rhs(d: Dim) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    let dd = d.as_f64();
    let y_inf = 8.0 - 2.0 * dd;
    move |_t, s: &[f64; 2]| [s[1], -(dd - 6.0) * s[1] - y_inf * s[0] + s[0] * s[0]]
}

/// Flux functional lambda-hat(r) = (sigma_d/2) r^{d-1} (-u'(r)) expressed in
/// the inner variable y = r^2 u.
fn flux_from_y(d: Dim, t: f64, y: f64, dy: f64) -> f64 {
    0.5 * d.unit_sphere_area() * (2.0 * y - dy) * ((d.as_f64() - 4.0) * t).exp()
}

/// Residual source below r: (sigma_d/2) int_0^r u^2 rho^{d-1} drho estimated
/// from the near-origin form of u with recovered strength `flux`.
fn flux_tail_correction(d: Dim, flux: f64, r: f64) -> f64 {
    use std::f64::consts::PI;
    match d {
        Dim::D1 => {
            // u ~ const near 0; we do not know u(0) here, so callers in d=1
            // pass the measured u(r_inner) through `flux` pre-scaled. Handled
            // separately in `shoot_once`.
            0.0 * flux * r
        }
        Dim::D2 => {
            let l = (1.0 / r).ln();
            (flux * flux / PI) * 0.5 * r * r * (l * l + l + 0.5)
        }
        Dim::D3 => flux * flux * r / (2.0 * PI),
    }
}

/// Inner radius at which the flux read-off has relative defect below ~1e-7
/// before correction.
fn inner_radius(d: Dim, lambda: f64, grid_lo: f64) -> f64 {
    use std::f64::consts::PI;
    let defect = 1e-7 * lambda;
    let r = match d {
        Dim::D1 => {
            let u0 = 6.0 * (lambda / 12.0).powf(2.0 / 3.0);
            defect / (u0 * u0)
        }
        Dim::D2 => {
            let mut r = 1e-4f64;
            for _ in 0..4 {
                let l = (1.0 / r).ln().max(1.0);
                r = (2.0 * PI * defect / (lambda * lambda * (l * l + l + 0.5))).sqrt();
            }
            r
        }
        Dim::D3 => 2.0 * PI * defect / (lambda * lambda),
    };
    r.min(0.25 * grid_lo).max(1e-60)
}

pub(crate) enum Shot {
    Ok(ShotProfile),
    /// u crossed zero before reaching the inner radius: coefficient too large.
    Died,
}

/// One inward integration for the point-source problem at far coefficient `a`.
fn shoot_once(d: Dim, a: f64, t_max: f64, t_inner: f64, tol: f64) -> Result<Shot> {
    let y_inf = 8.0 - 2.0 * d.as_f64();
    let switch_level = 0.5 * y_inf;
    let s0 = far_field_state(d, a, t_max);
    let opts = OdeOptions {
        rtol: tol,
        atol: tol * 1e-3,
        h_init: 1e-3,
        h_max: 0.25,
        max_steps: 4_000_000,
    };
    let guard_z = move |_t: f64, s: &[f64; 2]| s[0] > y_inf;
    let event_switch = move |_t: f64, s: &[f64; 2]| switch_level - s[0];
    let zrun = integrate(z_rhs(d), t_max, s0, t_inner, &opts, Some(&event_switch), Some(&guard_z))?;
    match zrun.status {
        OdeStatus::Guarded(_) => Ok(Shot::Died),
        OdeStatus::ReachedEnd => {
            // Never came near the origin profile: flux read in z variables.
            let [z, dz] = zrun.last_y;
            let (y, dy) = (y_inf - z, -dz);
            let flux = corrected_flux(d, t_inner, y, dy);
            Ok(Shot::Ok(ShotProfile {
                dense: DenseRadial {
                    y_inf,
                    z_seg: zrun.dense,
                    y_seg: None,
                    collar: None,
                },
                flux,
            }))
        }
        OdeStatus::Event(t_sw) => {
            let [z, dz] = zrun.last_y;
            let y0 = [y_inf - z, -dz];
            let yopts = OdeOptions {
                rtol: tol,
                atol: 1e-290,
                h_init: 1e-3,
                h_max: 0.25,
                max_steps: 4_000_000,
            };
            let guard_y = |_t: f64, s: &[f64; 2]| s[0] <= 0.0;
            let yrun = integrate(y_rhs(d), t_sw, y0, t_inner, &yopts, None, Some(&guard_y))?;
            match yrun.status {
                OdeStatus::ReachedEnd => {
                    let [y, dy] = yrun.last_y;
                    let flux = corrected_flux(d, t_inner, y, dy);
                    Ok(Shot::Ok(ShotProfile {
                        dense: DenseRadial {
                            y_inf,
                            z_seg: zrun.dense,
                            y_seg: Some((yrun.dense, t_sw)),
                            collar: None,
                        },
                        flux,
                    }))
                }
                _ => Ok(Shot::Died),
            }
        }
    }
}

fn corrected_flux(d: Dim, t_inner: f64, y: f64, dy: f64) -> f64 {
    let raw = flux_from_y(d, t_inner, y, dy);
    let r = t_inner.exp();
    match d {
        Dim::D1 => {
            // u approximately constant below r_inner.
            let u_inner = y * (-2.0 * t_inner).exp();
            raw + u_inner * u_inner * r
        }
        _ => {
            let mut f = raw;
            for _ in 0..2 {
                f = raw + flux_tail_correction(d, f, r);
            }
            f
        }
    }
}

/// Solve the point-source problem Delta u = u^2 - 2 lambda delta_0 (radially)
/// by inward shooting on the far-field coefficient, matching the recovered
/// origin flux to `lambda`.
pub fn solve_v_lambda(d: Dim, lambda: f64, r_max: f64, grid: &GridSpec) -> Result<RadialSolution> {
    if !lambda.is_finite() {
        return Err(Error::domain(
            "solve_v_lambda: lambda must be finite; use v_infinity for the monotone limit",
        ));
    }
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("solve_v_lambda: lambda must be in (0, inf), got {lambda}")));
    }
    let coeff = d.v_inf_coeff();
    if coeff / (r_max * r_max) >= 1e-4 {
        return Err(Error::input(format!(
            "solve_v_lambda: r_max = {r_max} too small, need V_inf(r_max) < 1e-4"
        )));
    }
    if grid.r_hi > r_max {
        return Err(Error::input("solve_v_lambda: output grid exceeds r_max"));
    }
    let tol = 1e-10;
    let ex = ExponentTable::for_dim(d);
    let t_max = r_max.ln();
    let r_inner = inner_radius(d, lambda, grid.r_lo);
    let t_inner = r_inner.ln();

    // Bracket the far coefficient; flux is strictly decreasing in it.
    let mut a_lo = coeff * lambda.powf(-ex.alpha); // initial guess scale
    let mut a_hi = a_lo;
    let mut history = Vec::new();
    let flux_of = |a: f64| -> Result<Option<f64>> {
        Ok(match shoot_once(d, a, t_max, t_inner, tol)? {
            Shot::Ok(s) => Some(s.flux),
            Shot::Died => None,
        })
    };
    let mut expand = 0;
    loop {
        match flux_of(a_lo)? {
            Some(f) if f > lambda => break,
            other => {
                history.push(format!("A={a_lo:.3e} -> {other:?}"));
                a_lo /= 8.0;
            }
        }
        expand += 1;
        if expand > 80 {
            return Err(Error::convergence(
                "solve_v_lambda flux bracketing (low side)",
                history.join("; "),
            ));
        }
    }
    expand = 0;
    loop {
        match flux_of(a_hi)? {
            Some(f) if f >= lambda => {
                history.push(format!("A={a_hi:.3e} -> flux {f:.6e}"));
                a_hi *= 8.0;
            }
            _ => break,
        }
        expand += 1;
        if expand > 80 {
            return Err(Error::convergence(
                "solve_v_lambda flux bracketing (high side)",
                history.join("; "),
            ));
        }
    }

    // Bisection in log A.
    let (mut llo, mut lhi) = (a_lo.ln(), a_hi.ln());
    let mut best: Option<(f64, ShotProfile)> = None;
    for _ in 0..120 {
        let mid = 0.5 * (llo + lhi);
        let a = mid.exp();
        match shoot_once(d, a, t_max, t_inner, tol)? {
            Shot::Died => lhi = mid,
            Shot::Ok(s) => {
                let f = s.flux;
                let rel = (f - lambda).abs() / lambda;
                let keep = match &best {
                    Some((bf, _)) => (f - lambda).abs() < (*bf - lambda).abs(),
                    None => true,
                };
                if keep {
                    best = Some((f, s));
                }
                if rel <= 1e-11 {
                    break;
                }
                if f > lambda {
                    llo = mid;
                } else {
                    lhi = mid;
                }
            }
        }
        if (lhi - llo).abs() < 1e-14 {
            break;
        }
    }
    let (flux, shot) = best.ok_or_else(|| {
        Error::convergence("solve_v_lambda bisection", history.join("; "))
    })?;
    if (flux - lambda).abs() / lambda > 1e-8 {
        return Err(Error::convergence(
            "solve_v_lambda flux matching",
            format!("best flux {flux:.9e} vs target {lambda:.9e}; {}", history.join("; ")),
        ));
    }

    let a_star = 0.5 * (llo + lhi);
    let r_points = grid.points();
    let u: Vec<f64> = r_points.iter().map(|&r| shot.dense.u_at(r)).collect();
    Ok(RadialSolution {
        kind: RadialKind::VLambda,
        d,
        lambda: Lambda::Finite(lambda),
        epsilon: None,
        r: r_points,
        u,
        flux_at_origin: Some(flux),
        far_coeff: Some(a_star.exp()),
        collar_h: None,
        profile: Profile::Dense(shot.dense),
    })
}

/// Expose one inward shot for the exit solver (shared machinery).
pub(crate) fn integrate_z_to(
    d: Dim,
    a: f64,
    t_max: f64,
    t_end: f64,
    tol: f64,
    event: Option<&dyn Fn(f64, &[f64; 2]) -> f64>,
) -> Result<(crate::ode::Integration<2>, [f64; 2])> {
    let s0 = far_field_state(d, a, t_max);
    let opts = OdeOptions {
        rtol: tol,
        atol: tol * 1e-4,
        h_init: 1e-3,
        h_max: 0.25,
        max_steps: 6_000_000,
    };
    let run = integrate(z_rhs(d), t_max, s0, t_end, &opts, event, None)?;
    let last = run.last_y;
    Ok((run, last))
}

pub(crate) fn dense_from_z(d: Dim, z_seg: DenseOutput<2>) -> DenseRadial {
    DenseRadial {
        y_inf: 8.0 - 2.0 * d.as_f64(),
        z_seg,
        y_seg: None,
        collar: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_infinity_paper_values() {
        let s = v_infinity(Dim::D3, &[1.0]).unwrap();
        assert!((s.u[0] - 2.0).abs() < 1e-12);
        let s = v_infinity(Dim::D2, &[2.0]).unwrap();
        assert!((s.u[0] - 1.0).abs() < 1e-12);
        let s = v_infinity(Dim::D1, &[1.0]).unwrap();
        assert!((s.u[0] - 6.0).abs() < 1e-12);
        assert!(v_infinity(Dim::D2, &[0.0]).is_err());
        assert!(v_infinity(Dim::D2, &[-1.0]).is_err());
    }

    /// Substitution oracle for the closed form: v'' = v^2 by central
    /// differences, v'(0+) = -lambda one-sided, and the lambda-scaling law.
    #[test]
    fn exact_d1_substitution_checks() {
        let lambda = 7.3;
        let v = |x: f64| v_lambda_exact_d1(lambda, x).unwrap();
        for x in [0.3, 1.0, 2.7] {
            let h = 1e-4;
            let v2 = (v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h);
            assert!((v2 - v(x) * v(x)).abs() < 1e-3 * v(x) * v(x));
        }
        // One-sided derivative at the origin.
        let h = 1e-7;
        let dv = (v(h) - v(0.0)) / h;
        assert!((dv + lambda).abs() < 1e-4 * lambda);
        // Scaling: V^lambda(x) = s^-2 V^{lambda s^3}(x/s).
        for s in [0.5f64, 2.0] {
            let lhs = v(1.3);
            let rhs = s.powi(-2) * v_lambda_exact_d1(lambda * s.powi(3), 1.3 / s).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * lhs);
        }
        // Frozen example values.
        assert!((v_lambda_exact_d1(12.0, 0.0).unwrap() - 6.0).abs() < 1e-12);
        assert!((v_lambda_exact_d1(12.0, 1.0).unwrap() - 1.5).abs() < 1e-12);
        assert!(v_lambda_exact_d1(0.0, 1.0).is_err());
    }

    #[test]
    fn far_field_mode_is_characteristic_root() {
        for d in [Dim::D1, Dim::D2, Dim::D3] {
            let p = ExponentTable::for_dim(d).p;
            assert!(char_poly(d, 2.0 - p).abs() < 1e-12, "sigma must be a root for d={d:?}");
        }
    }

    #[test]
    fn d1_solver_matches_closed_form() {
        let lambda = 12.0;
        let grid = GridSpec::new(0.1, 10.0, 41).unwrap();
        let s = solve_v_lambda(Dim::D1, lambda, default_r_max(Dim::D1, lambda), &grid).unwrap();
        for (&r, &u) in s.r.iter().zip(s.u.iter()) {
            let exact = v_lambda_exact_d1(lambda, r).unwrap();
            assert!(
                (u - exact).abs() <= 1e-6 * exact,
                "r={r}: solver {u} vs exact {exact}"
            );
        }
        // Spec example: d=1, lambda=12, r=1 -> 1.5 within 1e-6 relative.
        assert!((s.u_at(1.0) - 1.5).abs() < 1.5e-6);
        let flux = s.flux_at_origin.unwrap();
        assert!((flux - lambda).abs() < 1e-7 * lambda);
    }

    #[test]
    fn monotone_decreasing_profile() {
        let grid = GridSpec::new(0.2, 20.0, 60).unwrap();
        for d in [Dim::D2, Dim::D3] {
            let s = solve_v_lambda(d, 5.0, default_r_max(d, 5.0), &grid).unwrap();
            for w in s.u.windows(2) {
                assert!(w[1] < w[0], "u must be strictly decreasing");
            }
            // u(2r) < u(r) on the grid.
            for &r in &s.r {
                if 2.0 * r <= 20.0 {
                    assert!(s.u_at(2.0 * r) < s.u_at(r));
                }
            }
            // Sandwich against the monotone limit.
            let coeff = d.v_inf_coeff();
            for (&r, &u) in s.r.iter().zip(s.u.iter()) {
                assert!(u <= coeff / (r * r) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn flux_monotone_functional() {
        // r^{d-1} u'(r) nondecreasing (within tolerance) on the solved grid.
        let grid = GridSpec::new(0.1, 50.0, 80).unwrap();
        let s = solve_v_lambda(Dim::D3, 10.0, default_r_max(Dim::D3, 10.0), &grid).unwrap();
        let f: Vec<f64> = s.r.iter().map(|&r| r * r * s.du_at(r)).collect();
        for w in f.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn scaling_self_consistency_d2_d3() {
        let grid = GridSpec::new(0.5, 8.0, 17).unwrap();
        for d in [Dim::D2, Dim::D3] {
            let dd = 4.0 - d.as_f64();
            let lambda = 7.0;
            let base = solve_v_lambda(d, lambda, default_r_max(d, lambda), &grid).unwrap();
            for s in [0.5f64, 2.0] {
                let lam2 = lambda * s.powf(dd);
                let other = solve_v_lambda(d, lam2, default_r_max(d, lam2), &grid).unwrap();
                for &r in &base.r {
                    let lhs = base.u_at(r);
                    let rhs = other.u_at(r / s) / (s * s);
                    assert!(
                        (lhs - rhs).abs() <= 1e-6 * lhs,
                        "d={d:?} s={s} r={r}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn large_lambda_sandwich_d3() {
        // d=3, lambda=1e6, r=1: value in (2 - C 10^{-6 alpha}, 2).
        let grid = GridSpec::new(0.5, 4.0, 9).unwrap();
        let lambda = 1e6;
        let s = solve_v_lambda(Dim::D3, lambda, default_r_max(Dim::D3, lambda), &grid).unwrap();
        let u1 = s.u_at(1.0);
        let alpha = ExponentTable::for_dim(Dim::D3).alpha;
        let gap = 2.0 - u1;
        assert!(u1 < 2.0, "must stay below the monotone limit");
        // Gap of the right order: within a factor 50 of lambda^-alpha.
        let scale = lambda.powf(-alpha);
        assert!(gap > scale / 50.0 && gap < scale * 50.0, "gap {gap} vs scale {scale}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid = GridSpec::new(0.1, 10.0, 11).unwrap();
        assert!(solve_v_lambda(Dim::D2, -1.0, 500.0, &grid).is_err());
        assert!(solve_v_lambda(Dim::D2, f64::INFINITY, 500.0, &grid).is_err());
        assert!(solve_v_lambda(Dim::D2, 1.0, 50.0, &grid).is_err()); // r_max too small
    }
}
