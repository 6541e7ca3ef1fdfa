//! Simulation of conditional generation of coherent-state superpositions
//! `c+ |alpha> + c- |-alpha>` from squeezed vacuum by photon subtraction with
//! on/off detectors, and their amplification by conditional homodyne
//! detection.
//!
//! Two independent engines are provided: an exact truncated Fock-space engine
//! ([`fock`]) and a characteristic-function engine built from Gaussian forms
//! ([`gaussian`]). [`analytics`] holds the closed-form expressions,
//! [`protocols`] assembles the schemes end to end and [`wigner`] evaluates
//! phase-space pictures and fidelities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analytics;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod numerics;
pub mod protocols;
pub mod wigner;

pub use error::{Error, Result};
