//! Bessel processes of arbitrary real dimension delta = 2 + 2 nu: exact
//! squared-Bessel transition sampling, hitting laws, the Girsanov
//! change-of-dimension identity, exponential path functionals, and the
//! drift-perturbed Q-process with its scale-function oracle.

mod besq;
mod ops;
mod qprocess;

pub use besq::{BesselSpec, PathState, StepOutcome};
pub use ops::{
    exp_functional_bound_check, exp_functional_mc, hitting_prob, hitting_prob_mc,
    iterated_bound_constant, yor_identity_check, BoundCheck, ExpFunctionalCheck, PhiKind,
    YorCheck,
};
pub use qprocess::{
    q_occupation_bound_check, q_process_hitting, q_scale_hitting_prob, QOccupationCheck,
    QProcessCheck,
};

use crate::csbp::mean_se;
use serde::Serialize;

/// A Monte Carlo estimate of a path functional with its standard error.
#[derive(Debug, Clone, Serialize)]
pub struct PathFunctionalSample {
    pub n_paths: usize,
    pub estimate: f64,
    pub standard_error: f64,
    pub functional: String,
    pub conditioning: String,
}

impl PathFunctionalSample {
    pub(crate) fn from_values(values: &[f64], functional: &str, conditioning: &str) -> Self {
        let (mean, se) = mean_se(values);
        PathFunctionalSample {
            n_paths: values.len(),
            estimate: mean,
            standard_error: se,
            functional: functional.to_string(),
            conditioning: conditioning.to_string(),
        }
    }

    pub fn z_against(&self, exact: f64) -> f64 {
        if self.standard_error > 0.0 {
            (self.estimate - exact) / self.standard_error
        } else if self.estimate == exact {
            0.0
        } else {
            f64::INFINITY
        }
    }
}
