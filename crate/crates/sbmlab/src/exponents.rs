//! The exponent family tying the radial equations, the Bessel indices and the
//! boundary dimension together: `p = mu + nu`, `alpha = (p-2)/(4-d)`,
//! `dim = d + 2 - p`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Spatial dimension, restricted to 1, 2, 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    D1,
    D2,
    D3,
}

impl Dim {
    pub fn new(d: u32) -> Result<Dim> {
        match d {
            1 => Ok(Dim::D1),
            2 => Ok(Dim::D2),
            3 => Ok(Dim::D3),
            _ => Err(Error::domain(format!("dimension must be 1, 2 or 3, got {d}"))),
        }
    }

    pub fn as_u32(self) -> u32 {
        match self {
            Dim::D1 => 1,
            Dim::D2 => 2,
            Dim::D3 => 3,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.as_u32() as f64
    }

    /// Surface area of the unit sphere: 2 points, 2*pi, 4*pi.
    pub fn unit_sphere_area(self) -> f64 {
        match self {
            Dim::D1 => 2.0,
            Dim::D2 => 2.0 * std::f64::consts::PI,
            Dim::D3 => 4.0 * std::f64::consts::PI,
        }
    }

    /// The constant in the explicit singular profile `2(4-d)/r^2`.
    pub fn v_inf_coeff(self) -> f64 {
        2.0 * (4.0 - self.as_f64())
    }
}

/// All derived exponents for one dimension.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentTable {
    pub d: Dim,
    /// Decay order of the difference profile; 3, 2*sqrt(2), (1+sqrt(17))/2.
    pub p: f64,
    /// Left-tail exponent alpha = (p-2)/(4-d).
    pub alpha: f64,
    /// Bessel drift index: -1/2, 0, 1/2.
    pub mu: f64,
    /// nu = sqrt(mu^2 + 4(4-d)).
    pub nu: f64,
    /// Boundary dimension d + 2 - p.
    pub boundary_dim: f64,
}

impl ExponentTable {
    pub fn for_dim(d: Dim) -> ExponentTable {
        let mu = match d {
            Dim::D1 => -0.5,
            Dim::D2 => 0.0,
            Dim::D3 => 0.5,
        };
        let nu = (mu * mu + 4.0 * (4.0 - d.as_f64())).sqrt();
        let p = mu + nu;
        let alpha = (p - 2.0) / (4.0 - d.as_f64());
        ExponentTable {
            d,
            p,
            alpha,
            mu,
            nu,
            boundary_dim: d.as_f64() + 2.0 - p,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_closed_forms() {
        let t1 = ExponentTable::for_dim(Dim::D1);
        assert!((t1.p - 3.0).abs() < 1e-12);
        assert!((t1.alpha - 1.0 / 3.0).abs() < 1e-12);
        assert!((t1.nu - 3.5).abs() < 1e-12);
        assert!((t1.boundary_dim - 0.0).abs() < 1e-12);

        let t2 = ExponentTable::for_dim(Dim::D2);
        assert!((t2.p - 2.0 * 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((t2.alpha - (2.0_f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((t2.boundary_dim - (4.0 - 2.0 * 2.0_f64.sqrt())).abs() < 1e-12);

        let t3 = ExponentTable::for_dim(Dim::D3);
        assert!((t3.p - (1.0 + 17.0_f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((t3.alpha - (17.0_f64.sqrt() - 3.0) / 2.0).abs() < 1e-12);
        assert!((t3.boundary_dim - (9.0 - 17.0_f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn consistency_invariants() {
        for d in [Dim::D1, Dim::D2, Dim::D3] {
            let t = ExponentTable::for_dim(d);
            // p = mu + nu exactly.
            assert!((t.p - (t.mu + t.nu)).abs() < 1e-12);
            // alpha * (4-d) = p - 2.
            assert!((t.alpha * (4.0 - d.as_f64()) - (t.p - 2.0)).abs() < 1e-12);
        }
    }
}
