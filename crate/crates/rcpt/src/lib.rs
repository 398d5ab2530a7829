//! Reaction-coordinate polaron-transform (RCPT) toolkit for open quantum
//! systems at strong system-bath coupling.
//!
//! The pipeline has three steps: extract a reaction coordinate (RC) from a
//! structured bosonic bath, polaron-dress the system Hamiltonian on that
//! coordinate, and truncate the RC to its ground state. The result is an
//! *effective* Hamiltonian with the original coupling strength absorbed into
//! renormalized system parameters, weakly coupled to a residual bath. All
//! three representations (original, RC-extended, effective) can then be fed
//! to the same Born-Markov Redfield solver to obtain steady states, heat and
//! charge currents, and mean-force Gibbs states.
//!
//! Units: `ħ = k_B = e = 1` throughout.
//!
//! Modules map onto the stages of the pipeline:
//! - [`operators`]: dense complex operator algebra (Kronecker products,
//!   partial traces, eigendecompositions).
//! - [`spectral`]: spectral-density families, RC parameter extraction, the
//!   principal-value spectral-density mapping, and bath rate functions.
//! - [`transforms`]: the RC extraction / polaron dressing / truncation
//!   pipeline, higher-order RC blocks, and iterated mappings.
//! - [`redfield`]: non-secular Redfield superoperators, steady states,
//!   propagation, and currents.
//! - [`models`]: builders for the application models (generalized spin-boson,
//!   nonequilibrium spin-boson, absorption refrigerator, double quantum dot,
//!   dissipative spin chains) in all three representations.
//! - [`equilibrium`]: the mean-force Gibbs state family.
//! - [`scenario`]: config-driven runners, sweeps, presets, and CSV output
//!   behind the `rcpt` binary.

pub mod equilibrium;
pub mod models;
pub mod operators;
pub mod redfield;
pub mod scenario;
pub mod spectral;
pub mod transforms;

pub use operators::{Eigensystem, OperatorError, OperatorMatrix, Pauli};
pub use redfield::{Liouvillian, RedfieldError, SteadyStateResult};
pub use spectral::{Bath, BathStatistics, SpectralDensity, SpectralError};
pub use transforms::{OpenSystemModel, Representation, TransformError};

/// Complex scalar used across the crate.
pub type C64 = num_complex::Complex64;
