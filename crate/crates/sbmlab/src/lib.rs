//! Numerical laboratory for the boundary structure of super-Brownian motion
//! at desk scale: singular radial ODE solvers and their exact closed forms,
//! Bessel-process identities verified by Monte Carlo, a critical branching
//! particle simulator with exit-measure freezing and local-time recording,
//! frontier extraction with box-counting and tail-exponent fits, and a
//! manifest-driven experiment runner tying the pieces together.
//!
//! See the `examples/` directory for one runnable program per capability and
//! `docs/formats.md` for the file formats the runner emits.

pub mod csbp;
pub mod error;
pub mod exponents;
pub mod fit;
pub mod ode;
pub mod quad;
pub mod radial;
pub mod rng;

pub use error::{Error, Result};
pub use exponents::{Dim, ExponentTable};
