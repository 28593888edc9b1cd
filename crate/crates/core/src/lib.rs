//! Driven Caldeira-Leggett particle-bath model.
//!
//! A tagged charged particle is coupled bilinearly to a bath of charged
//! harmonic oscillators, and an AC field drives both. The crate provides
//!
//! * [`bath`]: discrete and Debye-continuum baths, the memory kernel `K(t)`
//!   and the force-delay kernel `M(t)`;
//! * [`noise`]: thermal (classical and Wigner) bath sampling, the noise paths
//!   `xi(t)` and `eta(t) = xi(t) - D(t)`, correlation estimators and the
//!   analytic fluctuation-dissipation formulas;
//! * [`gle`]: an integrator for the driven generalized Langevin equation and
//!   the exact microscopic particle+bath integrator used as its oracle;
//! * [`circuit`]: the LR-circuit mapping and the generalized Nyquist noise
//!   spectrum including the driven-bath term;
//! * [`specfun`] and [`quad`]: the scalar special functions and adaptive
//!   quadrature the formulas above need.
//!
//! Monte Carlo ensembles run through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to sequential iteration
//! otherwise. Results are bit-identical either way.

pub mod bath;
pub mod circuit;
pub mod error;
pub mod gle;
pub mod grid;
pub mod noise;
pub mod par;
pub mod quad;
pub mod specfun;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use par::Execution;

/// Physical constants (CODATA 2018 exact values).
pub mod consts {
    /// Reduced Planck constant, J s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Boltzmann constant, J/K.
    pub const K_B: f64 = 1.380_649e-23;
    /// Elementary charge, C.
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    /// Electron mass, kg.
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    /// Unified atomic mass unit, kg.
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
}
