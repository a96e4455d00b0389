//! Adaptive Dormand-Prince 5(4) integration for the small stiff-ish radial
//! systems, with cubic-Hermite dense output and event location. Integration
//! direction may be forward or backward in the independent variable.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_max: 0.5,
            max_steps: 2_000_000,
        }
    }
}

/// Outcome of a run: reached the end, stopped at an event, or was aborted by
/// the guard predicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeStatus {
    ReachedEnd,
    Event(f64),
    Guarded(f64),
}

/// Accepted steps with derivatives; evaluates anywhere in the covered span by
/// cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct DenseOutput<const N: usize> {
    pub ts: Vec<f64>,
    pub ys: Vec<[f64; N]>,
    pub dys: Vec<[f64; N]>,
    forward: bool,
}

impl<const N: usize> DenseOutput<N> {
    fn new(forward: bool) -> Self {
        DenseOutput {
            ts: Vec::new(),
            ys: Vec::new(),
            dys: Vec::new(),
            forward,
        }
    }

    fn push(&mut self, t: f64, y: [f64; N], dy: [f64; N]) {
        self.ts.push(t);
        self.ys.push(y);
        self.dys.push(dy);
    }

    pub fn t_span(&self) -> (f64, f64) {
        let a = *self.ts.first().expect("empty dense output");
        let b = *self.ts.last().expect("empty dense output");
        if self.forward {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn bracket(&self, t: f64) -> (usize, usize) {
        let n = self.ts.len();
        let (mut lo, mut hi) = (0usize, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let before = if self.forward {
                self.ts[mid] <= t
            } else {
                self.ts[mid] >= t
            };
            if before {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, hi)
    }

    /// Hermite-interpolated state at t (t clamped to the covered span).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let n = self.ts.len();
        if n == 1 {
            return self.ys[0];
        }
        let (lo, hi) = self.span_clamped(t);
        let (i, j) = self.bracket(between(self.ts[0], self.ts[n - 1], t, self.forward));
        let _ = (lo, hi);
        hermite(
            self.ts[i], &self.ys[i], &self.dys[i], self.ts[j], &self.ys[j], &self.dys[j], t,
        )
    }

    fn span_clamped(&self, _t: f64) -> (f64, f64) {
        self.t_span()
    }
}

fn between(t0: f64, t1: f64, t: f64, forward: bool) -> f64 {
    if forward {
        t.clamp(t0, t1)
    } else {
        t.clamp(t1, t0)
    }
}

fn hermite<const N: usize>(
    ta: f64,
    ya: &[f64; N],
    fa: &[f64; N],
    tb: f64,
    yb: &[f64; N],
    fb: &[f64; N],
    t: f64,
) -> [f64; N] {
    let h = tb - ta;
    if h == 0.0 {
        return *ya;
    }
    let s = (t - ta) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let mut out = [0.0; N];
    for k in 0..N {
        out[k] = h00 * ya[k] + h10 * h * fa[k] + h01 * yb[k] + h11 * h * fb[k];
    }
    out
}

pub struct Integration<const N: usize> {
    pub dense: DenseOutput<N>,
    pub status: OdeStatus,
    pub last_t: f64,
    pub last_y: [f64; N],
    pub steps: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
const E5: f64 = -2187.0 / 6784.0 + 92097.0 / 339200.0;
const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Integrate dy/dt = f(t, y) from t0 to t_end (either direction).
///
/// `event`, when supplied, is a continuous function whose first crossing from
/// > 0 to <= 0 stops the run; the crossing time is refined by bisection on the
/// dense output. `guard` aborts immediately when it returns true (used for
/// overshoot detection in shooting loops; no refinement).
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    event: Option<&dyn Fn(f64, &[f64; N]) -> f64>,
    guard: Option<&dyn Fn(f64, &[f64; N]) -> bool>,
) -> Result<Integration<N>> {
    let forward = t_end >= t0;
    let dir = if forward { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut dense = DenseOutput::new(forward);
    dense.push(t, y, k1);

    let mut h = opts.h_init.min(opts.h_max).min((t_end - t0).abs()).max(1e-300) * dir;
    let mut steps = 0usize;
    let mut attempts = 0usize;
    let mut prev_event = event.map(|g| g(t, &y));

    while (t_end - t) * dir > 0.0 {
        attempts += 1;
        if steps >= opts.max_steps || attempts >= 4 * opts.max_steps {
            return Err(Error::convergence(
                "ode integration",
                format!("exceeded {} steps at t={t}", opts.max_steps),
            ));
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }

        // Stage evaluations.
        let mut yt = [0.0; N];
        for i in 0..N {
            yt[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = f(t + C2 * h, &yt);
        for i in 0..N {
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = f(t + C3 * h, &yt);
        for i in 0..N {
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = f(t + C4 * h, &yt);
        for i in 0..N {
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = f(t + C5 * h, &yt);
        for i in 0..N {
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let k6 = f(t + h, &yt);
        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        let k7 = f(t + h, &y_new);

        // Error estimate.
        let mut err = 0.0f64;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / N as f64).sqrt();

        if err <= 1.0 || h.abs() <= 1e-14 * t.abs().max(1.0) {
            steps += 1;
            let t_new = t + h;
            dense.push(t_new, y_new, k7);

            if let Some(g) = guard {
                if g(t_new, &y_new) {
                    return Ok(Integration {
                        dense,
                        status: OdeStatus::Guarded(t_new),
                        last_t: t_new,
                        last_y: y_new,
                        steps,
                    });
                }
            }
            if let Some(gev) = event {
                let v = gev(t_new, &y_new);
                if let Some(pv) = prev_event {
                    if pv > 0.0 && v <= 0.0 {
                        // Refine by bisection on the Hermite interpolant.
                        let (mut lo, mut hi) = (t, t_new);
                        for _ in 0..200 {
                            let mid = 0.5 * (lo + hi);
                            let ym = hermite(t, &y, &k1, t_new, &y_new, &k7, mid);
                            if gev(mid, &ym) > 0.0 {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                            if (hi - lo).abs() <= 1e-14 * mid.abs().max(1e-8) {
                                break;
                            }
                        }
                        let te = 0.5 * (lo + hi);
                        let ye = hermite(t, &y, &k1, t_new, &y_new, &k7, te);
                        let fe = f(te, &ye);
                        dense.push(te, ye, fe);
                        return Ok(Integration {
                            dense,
                            status: OdeStatus::Event(te),
                            last_t: te,
                            last_y: ye,
                            steps,
                        });
                    }
                }
                prev_event = Some(v);
            }

            t = t_new;
            y = y_new;
            k1 = k7; // FSAL
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            h = (h * fac).clamp(-opts.h_max.abs(), opts.h_max.abs());
            if h == 0.0 {
                h = 1e-300 * dir;
            }
            if h.signum() != dir {
                h = opts.h_max * dir * 1e-6;
            }
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
        }
    }

    Ok(Integration {
        dense,
        status: OdeStatus::ReachedEnd,
        last_t: t,
        last_y: y,
        steps,
    })
}
