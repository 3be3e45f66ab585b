//! Modular non-Hermitian tight-binding lattices.
//!
//! Builders for real-space, Bloch and generalized-Bloch Hamiltonians,
//! spectral and skin-effect diagnostics, generalized-Brillouin-zone
//! quantities, band and spectral winding numbers, Fisher-information
//! machinery for critical sensing, and sweep/scaling orchestration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod gbz;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metrology;
pub mod model;
pub mod par;
pub mod spectral;
pub mod topology;

pub use error::{NhError, Result};
pub use linalg::ComplexMatrix;
pub use model::{Boundary, CouplingPreset, ModelConfig, ModelParams, ParamLabel, PresetKind};
