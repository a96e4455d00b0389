//! Radial semilinear solvers for `u'' + ((d-1)/r) u' = u^2` in its various
//! guises: the point-source profiles `V^lambda`, their monotone limit
//! `V^infinity = 2(4-d)/r^2`, the exterior (exit) profiles `U^{lambda,eps}`
//! with finite or blow-up boundary data, difference profiles, the associated
//! travelling waves, and power-law rate fits extracted from them.
//!
//! All numerical solves work in `t = log r` on the compensated variable
//! `z(t) = r^2 (V^inf(r) - u(r))`, which satisfies
//! `z'' + (d-6) z' - 2(4-d) z + z^2 = 0` exactly and measures the difference
//! from the singular profile without cancellation. Near the origin the solver
//! switches to `y = r^2 u` (exponentially small there) so the recovered source
//! flux keeps full relative precision.

mod exit;
mod kpp;
mod rates;
mod vlambda;

pub use exit::{convrate_threshold, solve_u_exit, u_exit_halfline_d1, ConvrateThreshold};
pub use kpp::{kpp_wave, WaveRegime, WaveSolution};
pub use rates::{
    fit_rate_exponents, fit_rate_exponents_exact_d1, lemma_5_1_check, lemma_5_4_check,
    lemma_9_3_check, measure_c_d, ConstantCheck, RateExponentFits,
};
pub use vlambda::{default_r_max, solve_v_lambda, v_infinity, v_lambda_exact_d1};

use crate::error::{Error, Result};
use crate::exponents::Dim;
use crate::ode::DenseOutput;
use serde::Serialize;

/// Boundary/source strength; the blow-up case is a first-class value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Lambda {
    Finite(f64),
    Infinite,
}

impl Lambda {
    pub fn finite(self) -> Option<f64> {
        match self {
            Lambda::Finite(v) => Some(v),
            Lambda::Infinite => None,
        }
    }
    pub fn label(self) -> String {
        match self {
            Lambda::Finite(v) => format!("{v}"),
            Lambda::Infinite => "inf".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RadialKind {
    VLambda,
    VInfinity,
    UExitLambda,
    UExitInfinity,
    Difference,
}

impl RadialKind {
    pub fn label(self) -> &'static str {
        match self {
            RadialKind::VLambda => "V_lambda",
            RadialKind::VInfinity => "V_infinity",
            RadialKind::UExitLambda => "U_exit_lambda",
            RadialKind::UExitInfinity => "U_exit_infinity",
            RadialKind::Difference => "difference",
        }
    }
}

/// Log-spaced output grid request.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub r_lo: f64,
    pub r_hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(r_lo: f64, r_hi: f64, n: usize) -> Result<GridSpec> {
        if !(r_lo > 0.0 && r_hi > r_lo && n >= 2) {
            return Err(Error::input(format!(
                "grid spec must satisfy 0 < r_lo < r_hi and n >= 2, got [{r_lo}, {r_hi}] x {n}"
            )));
        }
        Ok(GridSpec { r_lo, r_hi, n })
    }

    pub fn points(&self) -> Vec<f64> {
        let (a, b) = (self.r_lo.ln(), self.r_hi.ln());
        (0..self.n)
            .map(|i| (a + (b - a) * i as f64 / (self.n - 1) as f64).exp())
            .collect()
    }
}

/// Piecewise dense numerical profile in `t = log r`.
///
/// The outer segment carries `z = r^2 (V^inf - u)`; the optional inner segment
/// carries `y = r^2 u` (used by point-source solves once `y` is small). The
/// optional collar closes the gap between a blow-up boundary and the matched
/// numerical domain.
#[derive(Debug, Clone)]
pub(crate) struct DenseRadial {
    pub y_inf: f64,
    pub z_seg: DenseOutput<2>,
    /// Inner y-phase segment and the switch time separating it from `z_seg`.
    pub y_seg: Option<(DenseOutput<2>, f64)>,
    /// Blow-up collar: (eps, collar radius, linear correction coefficient).
    pub collar: Option<(f64, f64, f64)>,
}

impl DenseRadial {
    fn phase_state(&self, t: f64) -> (f64, f64) {
        // Returns (y, y') at t regardless of segment representation.
        if let Some((seg, t_switch)) = &self.y_seg {
            if t <= *t_switch {
                let s = seg.eval(t);
                return (s[0], s[1]);
            }
        }
        let s = self.z_seg.eval(t);
        (self.y_inf - s[0], -s[1])
    }

    pub fn u_at(&self, r: f64) -> f64 {
        if let Some((eps, r_collar, c1)) = self.collar {
            if r < r_collar {
                let s = r - eps;
                return 6.0 / (s * s) + c1 / s;
            }
        }
        let t = r.ln();
        let (y, _) = self.phase_state(t);
        y * (-2.0 * t).exp()
    }

    /// V^inf(r) - u(r), evaluated without cancellation on the outer segment.
    pub fn diff_at(&self, r: f64) -> f64 {
        let t = r.ln();
        if let Some((seg, t_switch)) = &self.y_seg {
            if t <= *t_switch {
                let s = seg.eval(t);
                return (self.y_inf - s[0]) * (-2.0 * t).exp();
            }
        }
        let s = self.z_seg.eval(t);
        s[0] * (-2.0 * t).exp()
    }

    pub fn du_at(&self, r: f64) -> f64 {
        if let Some((eps, r_collar, c1)) = self.collar {
            if r < r_collar {
                let s = r - eps;
                return -12.0 / (s * s * s) - c1 / (s * s);
            }
        }
        let t = r.ln();
        let (y, dy) = self.phase_state(t);
        (dy - 2.0 * y) * (-3.0 * t).exp()
    }

    pub fn r_span(&self) -> (f64, f64) {
        let (t0, t1) = match &self.y_seg {
            Some((seg, _)) => (seg.t_span().0, self.z_seg.t_span().1),
            None => self.z_seg.t_span(),
        };
        (t0.exp(), t1.exp())
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Profile {
    /// u = coeff / r^2.
    VInfinity { coeff: f64 },
    /// d = 1 closed form 6 (|x| + (12/lambda)^{1/3})^{-2}.
    ExactD1V { lambda: f64 },
    /// d = 1 half-line exit form 6 (r - eps + sqrt(6/lambda))^{-2} in the
    /// radial variable measured from the origin (valid for r > eps).
    ExactD1U { offset: f64, eps: f64 },
    Dense(DenseRadial),
}

/// A solved radial profile on a log grid, with dense evaluation.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub kind: RadialKind,
    pub d: Dim,
    pub lambda: Lambda,
    pub epsilon: Option<f64>,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// Recovered source strength (V^lambda solves only).
    pub flux_at_origin: Option<f64>,
    /// Far-field coefficient A in u ~ 2(4-d)/r^2 - A r^{-p}.
    pub far_coeff: Option<f64>,
    /// Final collar width for blow-up boundary solves.
    pub collar_h: Option<f64>,
    pub(crate) profile: Profile,
}

impl RadialSolution {
    pub fn u_at(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::VInfinity { coeff } => coeff / (r * r),
            Profile::ExactD1V { lambda } => {
                let b = (12.0 / lambda).powf(1.0 / 3.0);
                6.0 / ((r.abs() + b) * (r.abs() + b))
            }
            Profile::ExactD1U { offset, eps } => {
                let s = r - eps + offset;
                6.0 / (s * s)
            }
            Profile::Dense(d) => d.u_at(r),
        }
    }

    /// V^inf(r) - u(r): the rate-of-convergence difference profile.
    pub fn diff_at(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::VInfinity { .. } => 0.0,
            Profile::ExactD1V { lambda } => {
                let b = (12.0 / lambda).powf(1.0 / 3.0);
                let x = r.abs();
                // 6/x^2 - 6/(x+b)^2 computed stably.
                6.0 * b * (2.0 * x + b) / (x * x * (x + b) * (x + b))
            }
            Profile::ExactD1U { offset, eps } => {
                let coeff = 2.0 * (4.0 - self.d.as_f64());
                coeff / (r * r) - {
                    let s = r - eps + offset;
                    6.0 / (s * s)
                }
            }
            Profile::Dense(dn) => dn.diff_at(r),
        }
    }

    pub fn du_at(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::VInfinity { coeff } => -2.0 * coeff / (r * r * r),
            Profile::ExactD1V { lambda } => {
                let b = (12.0 / lambda).powf(1.0 / 3.0);
                let x = r.abs();
                -12.0 / ((x + b) * (x + b) * (x + b))
            }
            Profile::ExactD1U { offset, eps } => {
                let s = r - eps + offset;
                -12.0 / (s * s * s)
            }
            Profile::Dense(dn) => dn.du_at(r),
        }
    }

    /// CSV block per the documented schema: a (kind, d, lambda, epsilon)
    /// header pair followed by (r, u) rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("kind,d,lambda,epsilon\n");
        out.push_str(&format!(
            "{},{},{},{}\n",
            self.kind.label(),
            self.d.as_u32(),
            self.lambda.label(),
            self.epsilon.map(|e| e.to_string()).unwrap_or_default()
        ));
        out.push_str("r,u\n");
        for (r, u) in self.r.iter().zip(self.u.iter()) {
            out.push_str(&format!("{r},{u}\n"));
        }
        out
    }
}
