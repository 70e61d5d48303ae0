//! Unitary generation of coherence from thermal quantum states.
//!
//! The crate is organized bottom-up:
//!
//! - [`spinsys`]: spin-j angular-momentum algebra, the `U Jz² + Δ Jx` model
//!   Hamiltonian, its normalization and the energy eigenbasis.
//! - [`states`]: density matrices, thermal states and the entropy, divergence,
//!   coherence and overlap metrics evaluated in the energy representation.
//! - [`uopt`]: static optimization over unitaries `U = exp(iV)` for the
//!   unconstrained, energy-constrained and generalized-target objectives.
//! - [`grape`]: piecewise-constant control-field synthesis realizing a target
//!   unitary under `H(t) = H_n + ε(t) Jz`.
//! - [`harness`]: seeded multistart batches, trap census, parameter sweeps and
//!   result persistence (JSON and CSV).

pub mod error;
pub mod grape;
pub mod harness;
pub mod linalg;
pub mod optimizer;
pub mod spinsys;
pub mod states;
pub mod uopt;

pub use error::{CohError, Result};
pub use linalg::{CMatrix, HermitianMatrix};
pub use num_complex::Complex64 as C64;
