//! Sine-series simulation of linear Schrödinger equations on `(0, L)` damped
//! by an infinite memory term, either through `Δy(t − s)` or through
//! `y(t − s)`.
//!
//! * [`kernel`]: relaxation kernels, hypothesis checks, decay envelopes.
//! * [`spectral`]: projection onto `sin(2kπx/L)` and Parseval norms.
//! * [`solver`]: the Crank–Nicolson memory scheme.
//! * [`analysis`]: discrete energies, dissipativity, decay fits.
//! * [`config`] and [`cli`]: the `memschro` command line front end.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod kernel;
pub mod reference;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

pub type KernelSpec64 = kernel::KernelSpec<f64>;
pub type HypothesisReport64 = kernel::HypothesisReport<f64>;
pub type DecayEnvelope64 = kernel::DecayEnvelope<f64>;
pub type ModalCoefficients64 = spectral::ModalCoefficients<f64>;
pub type InitialHistorySpec64 = spectral::InitialHistorySpec<f64>;
pub type SimulationConfig64 = solver::SimulationConfig<f64>;
pub type ModalState64 = solver::ModalState<f64>;
pub type Solver64 = solver::Solver<f64>;
pub type EnergyTrace64 = analysis::EnergyTrace<f64>;
pub type DecayFit64 = analysis::DecayFit<f64>;

pub type KernelSpec32 = kernel::KernelSpec<f32>;
pub type SimulationConfig32 = solver::SimulationConfig<f32>;
pub type Solver32 = solver::Solver<f32>;
