//! Adaptive Simpson quadrature. Used for scale-function integrals, the Levy
//! exponent and the brute-force oracles in tests.

use crate::error::{Error, Result};

fn simpson(f0: f64, f1: f64, f2: f64, h: f64) -> f64 {
    h / 6.0 * (f0 + 4.0 * f1 + f2)
}

struct Adaptive<'a> {
    f: &'a dyn Fn(f64) -> f64,
    tol: f64,
    evals: usize,
    max_evals: usize,
}

impl<'a> Adaptive<'a> {
    fn recurse(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        self.evals += 2;
        if self.evals > self.max_evals {
            return Err(Error::convergence(
                "adaptive quadrature",
                format!("exceeded {} evaluations on [{a}, {b}]", self.max_evals),
            ));
        }
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth > 60 {
            return Ok(left + right + delta / 15.0);
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        let l = self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
        let r = self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
        Ok(l + r)
    }
}

/// Integrate f over [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::input("adaptive_simpson: non-finite interval"));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    let mut ad = Adaptive {
        f: &f,
        tol,
        evals: 3,
        max_evals: 20_000_000,
    };
    let t = ad.tol;
    ad.recurse(a, b, fa, fm, fb, whole, t, 0)
}
