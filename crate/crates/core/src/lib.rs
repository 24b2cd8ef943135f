//! Simulation and analysis of a resonantly driven two-level quantum emitter:
//! Lindblad dynamics under piecewise-constant drive, quasi-static spectral
//! diffusion, Rabi/Ramsey/Hahn-echo sequences, Hong–Ou–Mandel visibility with
//! finite collection windows, interferometer-imperfection corrections, and a
//! least-squares harness that recovers model parameters from traces.
//!
//! Internal units: time in ns, angular rates in rad/ns.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corrections;
pub mod emitter;
pub mod error;
pub mod fit;
pub mod hom;
pub mod lindblad;
pub mod quadrature;
pub mod reference;
pub mod sequence;
pub mod signal;
pub mod spectral;
pub mod units;

pub use emitter::{DensityMatrix, DriveSegment, EmitterParams, PulseSequence, TimeTrace};
pub use error::{Error, Result};
