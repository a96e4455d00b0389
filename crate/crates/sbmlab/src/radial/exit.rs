//! Exterior (exit-measure) profiles: Delta u = u^2 outside the ball of radius
//! eps with boundary value lambda, or with the blow-up boundary condition
//! matched through a collar asymptote 6 (r-eps)^{-2} - 6(d-1)/(5 eps) (r-eps)^{-1}.

use super::vlambda::{dense_from_z, integrate_z_to};
use super::{GridSpec, Lambda, Profile, RadialKind, RadialSolution};
use crate::error::{Error, Result};
use crate::exponents::{Dim, ExponentTable};
use crate::ode::OdeStatus;
use serde::Serialize;

/// d = 1 half-line exit profile 6 (r - x + sqrt(6/lambda))^{-2}: the Laplace
/// exponent at `x` of the mass frozen at level `r`, for x <= r.
pub fn u_exit_halfline_d1(lambda: Lambda, r: f64, x: f64) -> Result<f64> {
    if x > r {
        return Err(Error::domain(format!("u_exit_halfline_d1: need x <= r, got x={x}, r={r}")));
    }
    let offset = match lambda {
        Lambda::Infinite => 0.0,
        Lambda::Finite(l) if l > 0.0 => (6.0 / l).sqrt(),
        Lambda::Finite(l) => {
            return Err(Error::domain(format!("u_exit_halfline_d1: lambda must be > 0, got {l}")))
        }
    };
    let s = r - x + offset;
    if s == 0.0 {
        return Err(Error::domain("u_exit_halfline_d1: blow-up boundary point"));
    }
    Ok(6.0 / (s * s))
}

struct ExitShot {
    dense: crate::ode::DenseOutput<2>,
    /// z value at the inner end (finite-lambda case).
    z_end: Option<[f64; 2]>,
    /// Radius where u crossed the collar threshold (blow-up case).
    r_hit: Option<f64>,
}

fn shoot_exit(
    d: Dim,
    a: f64,
    t_max: f64,
    t_end: f64,
    collar_target: Option<f64>,
    tol: f64,
) -> Result<ExitShot> {
    let y_inf = d.v_inf_coeff();
    match collar_target {
        None => {
            let (run, last) = integrate_z_to(d, a, t_max, t_end, tol, None)?;
            match run.status {
                OdeStatus::ReachedEnd => Ok(ExitShot {
                    dense: run.dense,
                    z_end: Some(last),
                    r_hit: None,
                }),
                _ => Err(Error::convergence(
                    "exit solve",
                    format!("integration stopped early at t={}", run.last_t),
                )),
            }
        }
        Some(u_big) => {
            // Event: u(t) = (y_inf - z) e^{-2t} reaches u_big.
            let ev = move |t: f64, s: &[f64; 2]| u_big - (y_inf - s[0]) * (-2.0 * t).exp();
            let (run, _last) = integrate_z_to(d, a, t_max, t_end, tol, Some(&ev))?;
            match run.status {
                OdeStatus::Event(te) => Ok(ExitShot {
                    dense: run.dense,
                    z_end: None,
                    r_hit: Some(te.exp()),
                }),
                _ => Ok(ExitShot {
                    dense: run.dense,
                    z_end: None,
                    r_hit: None, // never blew up before t_end: coefficient too small in magnitude
                }),
            }
        }
    }
}

fn bracket_and_bisect(
    mut f: impl FnMut(f64) -> Result<f64>,
    a0: f64,
    widen: f64,
    tol_x: f64,
    what: &str,
) -> Result<f64> {
    // f is increasing in its argument; find f = 0.
    let mut lo = -a0.abs().max(1e-8);
    let mut hi = a0.abs().max(1e-8);
    let mut flo = f(lo)?;
    let mut fhi = f(hi)?;
    let mut history = Vec::new();
    let mut n = 0;
    while flo > 0.0 {
        history.push(format!("lo={lo:.3e} f={flo:.3e}"));
        lo *= widen;
        flo = f(lo)?;
        n += 1;
        if n > 70 {
            return Err(Error::convergence(what.to_string(), history.join("; ")));
        }
    }
    n = 0;
    while fhi < 0.0 {
        history.push(format!("hi={hi:.3e} f={fhi:.3e}"));
        hi *= widen;
        fhi = f(hi)?;
        n += 1;
        if n > 70 {
            return Err(Error::convergence(what.to_string(), history.join("; ")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo).abs() <= tol_x * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solve the exterior problem on (eps, r_max]. For `Lambda::Finite(l)` the
/// boundary value is u(eps) = l; for `Lambda::Infinite` the blow-up boundary
/// is replaced by the matched collar asymptote at r = eps (1+h), with the
/// collar width h refined (Richardson) until u(2 eps) is stable to 1e-7.
pub fn solve_u_exit(d: Dim, lambda: Lambda, epsilon: f64, r_max: f64) -> Result<RadialSolution> {
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!("solve_u_exit: epsilon must be > 0, got {epsilon}")));
    }
    if r_max / epsilon < 1e3 {
        return Err(Error::input(format!(
            "solve_u_exit: need r_max/epsilon >= 1e3, got {}",
            r_max / epsilon
        )));
    }
    if let Lambda::Finite(l) = lambda {
        if !(l > 0.0) {
            return Err(Error::domain(format!("solve_u_exit: lambda must be in (0, inf], got {l}")));
        }
    }

    let grid = GridSpec::new(epsilon * 1.001, r_max / 4.0, 120)?;

    if d == Dim::D1 {
        // The exterior of the interval [-eps, eps] on the side containing x
        // is a translated half-line problem with the exact closed form.
        let offset = match lambda {
            Lambda::Infinite => 0.0,
            Lambda::Finite(l) => (6.0 / l).sqrt(),
        };
        let r = grid.points();
        let u: Vec<f64> = r
            .iter()
            .map(|&x| 6.0 / ((x - epsilon + offset) * (x - epsilon + offset)))
            .collect();
        return Ok(RadialSolution {
            kind: match lambda {
                Lambda::Infinite => RadialKind::UExitInfinity,
                _ => RadialKind::UExitLambda,
            },
            d,
            lambda,
            epsilon: Some(epsilon),
            r,
            u,
            flux_at_origin: None,
            far_coeff: None,
            collar_h: None,
            profile: Profile::ExactD1U { offset, eps: epsilon },
        });
    }

    let tol = 1e-10;
    let ex = ExponentTable::for_dim(d);
    let y_inf = d.v_inf_coeff();
    let t_max = r_max.ln();

    match lambda {
        Lambda::Finite(l) => {
            let t_eps = epsilon.ln();
            let z_target = y_inf - epsilon * epsilon * l;
            // z(t_eps) is increasing in the far coefficient.
            let scale = y_inf * (1.0 + l * epsilon * epsilon).powf(ex.alpha);
            let f = |a: f64| -> Result<f64> {
                let shot = shoot_exit(d, a, t_max, t_eps, None, tol)?;
                Ok(shot.z_end.unwrap()[0] - z_target)
            };
            let a_star = bracket_and_bisect(f, scale, 4.0, 1e-14, "solve_u_exit boundary matching")?;
            let shot = shoot_exit(d, a_star, t_max, t_eps, None, tol)?;
            let dense = dense_from_z(d, shot.dense);
            let r = grid.points();
            let u: Vec<f64> = r.iter().map(|&x| dense.u_at(x)).collect();
            Ok(RadialSolution {
                kind: RadialKind::UExitLambda,
                d,
                lambda,
                epsilon: Some(epsilon),
                r,
                u,
                flux_at_origin: None,
                far_coeff: Some(a_star),
                collar_h: None,
                profile: Profile::Dense(dense),
            })
        }
        Lambda::Infinite => {
            let c1 = -6.0 * (d.as_f64() - 1.0) / (5.0 * epsilon);
            let mut h = 0.02;
            let mut prev_u2: Option<f64> = None;
            let mut prev_extrap: Option<f64> = None;
            let mut a_guess = -y_inf; // blow-up solutions sit above V^inf: negative coefficient
            let mut accepted: Option<(f64, f64, crate::ode::DenseOutput<2>)> = None;
            let mut history = Vec::new();
            for level in 0..12 {
                let s_collar = epsilon * h;
                let u_big = 6.0 / (s_collar * s_collar) + c1 / s_collar;
                let r_collar = epsilon * (1.0 + h);
                let t_end = (epsilon * (1.0 + 0.2 * h)).ln();
                // r_hit is decreasing in the coefficient; express as increasing.
                let f = |a: f64| -> Result<f64> {
                    let shot = shoot_exit(d, a, t_max, t_end, Some(u_big), tol)?;
                    match shot.r_hit {
                        Some(rh) => Ok(rh - r_collar),
                        // Never blew up: u too small everywhere => coefficient
                        // too negative is impossible here; mark as below.
                        None => Ok(-(epsilon)),
                    }
                };
                let g = |a: f64| -> Result<f64> { f(-a) };
                let a_star = -bracket_and_bisect(g, a_guess.abs(), 4.0, 1e-14, "solve_u_exit collar matching")?;
                a_guess = a_star;
                let shot = shoot_exit(d, a_star, t_max, t_end, Some(u_big), tol)?;
                let dense = dense_from_z(d, shot.dense);
                let u2 = dense.u_at(2.0 * epsilon);
                if let Some(p) = prev_u2 {
                    let extrap = (4.0 * u2 - p) / 3.0;
                    if let Some(pe) = prev_extrap {
                        history.push(format!("h={h:.2e} u(2e)={u2:.10e} extrap={extrap:.10e}"));
                        if (extrap - pe).abs() <= 1e-7 * extrap.abs() {
                            accepted = Some((a_star, h, dense.z_seg));
                            break;
                        }
                    }
                    prev_extrap = Some(extrap);
                } else {
                    history.push(format!("h={h:.2e} u(2e)={u2:.10e}"));
                }
                prev_u2 = Some(u2);
                h *= 0.5;
                if level == 11 {
                    return Err(Error::convergence(
                        "solve_u_exit collar refinement",
                        history.join("; "),
                    ));
                }
            }
            let (a_star, h_final, dense_raw) = accepted.unwrap();
            let mut dense = dense_from_z(d, dense_raw);
            dense.collar = Some((epsilon, epsilon * (1.0 + h_final), c1));
            let r = grid.points();
            let u: Vec<f64> = r.iter().map(|&x| dense.u_at(x)).collect();
            Ok(RadialSolution {
                kind: RadialKind::UExitInfinity,
                d,
                lambda,
                epsilon: Some(epsilon),
                r,
                u,
                flux_at_origin: None,
                far_coeff: Some(a_star),
                collar_h: Some(h_final),
                profile: Profile::Dense(dense),
            })
        }
    }
}

/// Empirical threshold radius for the convergence-rate bound: smallest rho
/// with U^{delta0,1}(r) >= (1-delta) V^inf(r) for all r >= rho. Reports
/// rho * delta0, which stabilises as delta0 -> 0.
#[derive(Debug, Clone, Serialize)]
pub struct ConvrateThreshold {
    pub d: u32,
    pub delta0: f64,
    pub delta: f64,
    pub rho: f64,
    pub rho_times_delta0: f64,
    pub attained: bool,
}

pub fn convrate_threshold(d: Dim, delta0: f64, delta: f64) -> Result<ConvrateThreshold> {
    if !(delta0 > 0.0 && delta0 < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("convrate_threshold: delta0, delta must be in (0,1)"));
    }
    let r_max = 4e3f64.max(40.0 / delta0);
    let sol = solve_u_exit(d, Lambda::Finite(delta0), 1.0, r_max)?;
    let y_inf = d.v_inf_coeff();
    // Condition u >= (1-delta) V^inf <=> z <= delta * y_inf.
    let n = 4000;
    let (lo, hi) = (1.0f64.ln(), (r_max / 4.0).ln());
    let mut rho = f64::INFINITY;
    let mut attained = false;
    for i in (0..n).rev() {
        let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let r = t.exp();
        let z = r * r * (y_inf / (r * r) - sol.u_at(r));
        if z <= delta * y_inf {
            rho = r;
            attained = true;
        } else {
            break;
        }
    }
    Ok(ConvrateThreshold {
        d: d.as_u32(),
        delta0,
        delta,
        rho,
        rho_times_delta0: rho * delta0,
        attained,
    })
}
