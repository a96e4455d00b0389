//! Total-mass marginal of the particle system. Extinction is a functional of
//! total mass alone, so the extinction-law oracle runs on the exact binomial
//! branching chain (same law as the spatial stepper's particle count, checked
//! against it in the tests) at a fraction of the cost.

use crate::csbp::mean_se;
use crate::error::Result;
use crate::exponents::Dim;
use crate::rng::replicate_rng;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

/// Empirical extinction probability by a fixed time, with the limiting target
/// exp(-2 m0 / t) implied by the branching normalisation.
#[derive(Debug, Clone, Serialize)]
pub struct ExtinctionLawResult {
    pub n_per_mass: u64,
    pub t: f64,
    pub initial_mass: f64,
    pub reps: usize,
    pub empirical: f64,
    pub stderr: f64,
    pub target: f64,
    pub z: f64,
    pub within_tol: bool,
}

/// One step of the mass chain: each of `n` particles branches with
/// probability pb into 0 or 2 copies (probability 1/2 each).
fn mass_step(n: u64, pb: f64, rng: &mut impl Rng) -> u64 {
    if n == 0 {
        return 0;
    }
    let branchers = Binomial::new(n, pb).unwrap().sample(rng);
    let deaths = if branchers > 0 {
        Binomial::new(branchers, 0.5).unwrap().sample(rng)
    } else {
        0
    };
    n + branchers - 2 * deaths
}

/// Extinction-by-t frequency from the exact mass chain, compared against
/// exp(-2 m0 / t). `tol` is an absolute gate on |empirical - target|.
pub fn extinction_law_mass_chain(
    n_per_mass: u64,
    initial_mass: f64,
    t: f64,
    reps: usize,
    seed: u64,
    tol: f64,
) -> Result<ExtinctionLawResult> {
    let dt = 0.1 / n_per_mass as f64;
    let steps = (t / dt).round() as u64;
    let pb = n_per_mass as f64 * dt;
    let n0 = (initial_mass * n_per_mass as f64).round() as u64;

    let outcomes: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let mut n = n0;
            for _ in 0..steps {
                n = mass_step(n, pb, &mut rng);
                if n == 0 {
                    return 1.0;
                }
            }
            0.0
        })
        .collect();
    let (empirical, stderr) = mean_se(&outcomes);
    let target = (-2.0 * initial_mass / t).exp();
    let z = if stderr > 0.0 { (empirical - target) / stderr } else { 0.0 };
    Ok(ExtinctionLawResult {
        n_per_mass,
        t,
        initial_mass,
        reps,
        empirical,
        stderr,
        target,
        z,
        within_tol: (empirical - target).abs() <= tol,
    })
}

/// Same experiment through the full spatial stepper (used to validate that
/// the mass chain and the particle system share the extinction law).
pub fn extinction_law_spatial(
    d: Dim,
    n_per_mass: u64,
    initial_mass: f64,
    t: f64,
    reps: usize,
    seed: u64,
    tol: f64,
) -> Result<ExtinctionLawResult> {
    use super::{Caps, InitialMeasure, ParticleCloud, SimConfig};
    let dim = d.as_u32() as usize;
    let config = SimConfig {
        d,
        n_per_mass,
        dt: 0.1 / n_per_mass as f64,
        initial: InitialMeasure::PointMass {
            position: vec![0.0; dim],
            mass: initial_mass,
        },
        t_max: t,
        freeze: vec![],
        cull: None,
        caps: Caps {
            max_particles: 50_000_000,
            max_particle_steps: u64::MAX,
        },
        master_seed: seed,
    };
    config.validate()?;
    let outcomes: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let mut cloud = ParticleCloud::new(&config).expect("validated config");
            while cloud.time < t && !cloud.is_extinct() {
                super::step(&mut cloud, &config, &mut rng, None, None).expect("no caps set");
            }
            if cloud.is_extinct() {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let (empirical, stderr) = mean_se(&outcomes);
    let target = (-2.0 * initial_mass / t).exp();
    let z = if stderr > 0.0 { (empirical - target) / stderr } else { 0.0 };
    Ok(ExtinctionLawResult {
        n_per_mass,
        t,
        initial_mass,
        reps,
        empirical,
        stderr,
        target,
        z,
        within_tol: (empirical - target).abs() <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_chain_mean_preserved() {
        // Criticality: E[n'] = n at every step.
        let mut rng = replicate_rng(3, 0);
        let mut sum = 0u64;
        let reps = 20_000;
        for _ in 0..reps {
            sum += mass_step(1000, 0.1, &mut rng);
        }
        let mean = sum as f64 / reps as f64;
        // sd per step = sqrt(n pb) ~ 10, se of mean ~ 10/sqrt(reps)
        assert!((mean - 1000.0).abs() < 4.0 * 10.0 / (reps as f64).sqrt());
    }

    #[test]
    fn extinction_law_matches_limit() {
        let r = extinction_law_mass_chain(2000, 1.0, 1.0, 4000, 41, 0.02).unwrap();
        assert!(
            r.within_tol,
            "empirical {} vs target {} (z = {})",
            r.empirical, r.target, r.z
        );
    }

    #[test]
    fn spatial_and_mass_chain_agree() {
        // Small N so the spatial run is cheap; the two estimators share the
        // law so the difference is pure Monte Carlo noise.
        let a = extinction_law_mass_chain(64, 1.0, 1.0, 3000, 7, 1.0).unwrap();
        let b = extinction_law_spatial(Dim::D1, 64, 1.0, 1.0, 1500, 8, 1.0).unwrap();
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(
            (a.empirical - b.empirical).abs() <= 3.5 * se,
            "mass chain {} vs spatial {} (se {se})",
            a.empirical,
            b.empirical
        );
    }
}
