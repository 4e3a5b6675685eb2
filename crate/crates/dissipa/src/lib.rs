//! Dissipative-structure analysis for constant-coefficient linear evolution
//! systems `U_t + Σ L^α D^α U = 0` in several space dimensions.
//!
//! The crate is organised bottom-up:
//!
//! * [`denselin`] small dense kernels (eigen, projections, square roots, expm)
//! * [`symbolkit`] coefficient systems and the odd/even symbol splitting
//! * [`structure`] symmetrizers, genuine coupling, compensators, obstructions
//! * [`dissipativity`] frequency sweeps, strictness, decay-type fits, asymptotics
//! * [`models`] the catalog of linearized physical models
//! * [`evolution`] pointwise envelopes and L² decay by quadrature

// NaN must fail these guards, so `!(x > y)` is intended
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denselin;
pub mod dissipativity;
pub mod evolution;
pub mod models;
pub mod structure;
pub mod symbolkit;

pub use denselin::{CMat, RMat};
pub use symbolkit::{CoefficientSystem, FrequencyPoint, MultiIndex, SymbolPair};
