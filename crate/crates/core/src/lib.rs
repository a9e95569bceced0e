//! Simulation and analysis kernels for spin resonance driven by the magnetic
//! near-field of a sinusoidally deflected electron beam.
//!
//! The crate is organised bottom-up:
//!
//! * [`nearfield`]: time-domain field of the deflected beam, its Fourier
//!   harmonics, and the unitary field of the pick-up microcoil.
//! * [`bloch`]: thermal magnetization and the small-drive steady state of the
//!   Bloch equations, with a fixed-step RK4 integrator kept as a cross-check.
//! * [`sample`]: voxelized sample, reciprocity signal, coil EMF and the
//!   indirect (coil-current) drive path.
//! * [`spectro`]: derivative lineshape, lock-in synthesis, fitting,
//!   calibration and recovery of the directly driven signal.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the `parallel`
//! feature disabled every variant runs sequentially.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod constants;
pub mod error;
pub mod exec;
pub mod lm;
pub mod nearfield;
pub mod sample;
pub mod spectro;

pub use constants::PhysicalConstants;
pub use error::{Error, Result};
pub use exec::Execution;
pub use num_complex::Complex64;
