//! Sparse identification of pseudo-Hamiltonian systems
//!
//! ```text
//! ẋ = (S − diag(r)) ∇H(x) + F(x, t)
//! ```
//!
//! from trajectory data. `H` is a sparse combination of monomials, `r` is a
//! vector of friction coefficients, and `F` is either a sparse symbolic
//! library or a small neural network. Training minimizes the residual of a
//! one-step integration scheme evaluated on consecutive data points, so the
//! symmetric schemes in [`integrators`] see both endpoints of every pair.
//!
//! The crate is organised bottom-up:
//!
//! - [`autodiff`]: reverse-mode gradients over a per-batch tape.
//! - [`dynamics`]: the benchmark systems and seeded data generation.
//! - [`integrators`]: one-step schemes, the reference stepper and order tests.
//! - [`basis`]: monomial and trigonometric candidate libraries.
//! - [`models`]: PHSI, baseline and SINDy-style models.
//! - [`training`]: loss on the scheme, Adam, pruning and the epoch loop.
//! - [`experiments`]: presets, metrics, sweeps and reports.

pub mod autodiff;
pub mod basis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod integrators;
pub mod io;
pub mod models;
pub mod report;
pub mod training;

pub use error::{Error, Result};
