//! Simulation and training toolkit for photonic neural networks encoded in
//! time bins of a looped fiber interferometer.
//!
//! The crate is organised in layers:
//!
//! - [`linalg`]: dense complex linear algebra helpers (Hermitian eigensolver,
//!   PSD square roots, seeded Haar-random unitaries).
//! - [`fock`]: bosonic Fock basis enumeration, matrix permanents, lifting a
//!   mode unitary to the multi-photon Hilbert space, Uhlmann fidelity.
//! - [`mesh`]: Mach-Zehnder interferometer parametrisation and rectangular
//!   mesh decomposition / reconstruction of mode unitaries.
//! - [`scheduler`]: compilation of a mesh into a per-time-bin control program
//!   for the two-loop fiber architecture, plus an event-level simulator.
//! - [`distinguishability`]: Hong-Ou-Mandel visibility, jitter averaging and
//!   mixed-state propagation for partially distinguishable photon pairs.
//! - [`nonlinear`]: single- and two-photon scattering on a two-level emitter,
//!   spectral grids, and an idealised Kerr phase nonlinearity.
//! - [`engine`]: end-to-end network propagation (mode unitaries interleaved
//!   with nonlinear layers), efficiency/fidelity evaluation, loss budgets and
//!   repetition-rate estimates.
//! - [`tasks`]: reference network constructions (controlled-NOT variants,
//!   Bell-state analysis) and their input/target ensembles.
//! - [`trainer`]: cost functions, gradients and a quasi-Newton optimiser for
//!   fitting mesh phases and emitter parameters.
//! - [`timegate`]: arrival-time distributions of the scattered photons and
//!   threshold time filters trading efficiency against fidelity.

pub mod distinguishability;
pub mod engine;
pub mod fock;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod scheduler;
pub mod tasks;
pub mod timegate;
pub mod trainer;

use thiserror::Error;

/// Errors surfaced by simulator and trainer entry points.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside the supported domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An iterative numerical routine failed to converge or lost precision.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
