//! Numerical laboratory for the kinetic (hydrodynamic) limit of a harmonic
//! chain coupled to a single Langevin thermostat and driven by conservative
//! momentum-exchange noise.
//!
//! The crate has three layers that check each other:
//!
//! * microscopic: the full stochastic chain ([`chain_sim`]) plus an exact
//!   second-moment oracle, and Wigner-function estimation ([`wigner`]);
//! * mesoscopic: the limiting kinetic interface equation, solved both
//!   deterministically ([`kinetic_solver`]) and by a particle Monte Carlo
//!   method ([`phonon_mc`]);
//! * coefficients: the thermostat scattering data p+, p-, g connecting the
//!   two levels ([`thermostat_coeffs`], [`mild_dynamics`]).
//!
//! [`cli_io`] wires the layers into batch experiments, including the
//! headline eps -> 0 convergence study.

pub mod chain_sim;
pub mod cli_io;
pub mod dispersion;
pub mod kinetic_solver;
pub mod mild_dynamics;
pub mod numerics;
pub mod phonon_mc;
pub mod scattering;
pub mod thermostat_coeffs;
pub mod wigner;
