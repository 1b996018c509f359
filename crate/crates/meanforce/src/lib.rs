//! Equilibrium thermodynamics of a 3-D harmonic oscillator coupled to a
//! harmonic bath with an anisotropic Lorentzian susceptibility.
//!
//! The oscillator is described entirely through its dressed frequency-space
//! response: a complex symmetric susceptibility tensor χ̃(ω) built from
//! rotated Lorentzian bands, the resolvent G(ω) = [ω₀²(I − χ̃) − ω²I]⁻¹,
//! and spectral integrals over the positive frequency axis. The crate
//! computes
//!
//! * mean-force internal energy, free energy and entropy,
//! * the alternative (bare-Hamiltonian) internal energy together with the
//!   bath and interaction energies that close the energy balance,
//! * symmetrized position/momentum correlation tensors,
//!
//! and validates all of it against two independent references: an exact
//! normal-mode treatment of a finite discretized bath ([`oracle`]) and a
//! classical Langevin ensemble ([`langevin`]).
//!
//! Everything is deterministic: adaptive quadrature has no randomness, and
//! the stochastic sampler uses counter-based streams keyed by (seed,
//! trajectory), so results are independent of thread count.

pub mod error;
pub mod langevin;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod response;
pub mod rng;
pub mod tensor;
pub mod thermo;

pub use error::{Error, Result};
pub use langevin::{simulate, SimConfig, TrajectoryEnsemble};
pub use model::{LorentzBand, SusceptibilityModel, ValidationReport};
pub use oracle::{build_discrete_bath, DiscreteBath, NormalModes, OracleThermo};
pub use quad::QuadratureSpec;
pub use response::{
    classical_position_covariance, fdt_identity_residual, green_tensor, imag_green,
    momentum_correlator, position_correlator, CorrelatorResult,
};
pub use tensor::ComplexTensor;
pub use thermo::{thermo_point, thermo_sweep, BathEnergy, ThermoPoint};
