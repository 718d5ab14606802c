//! Numerical laboratory for cocycle regularity over volume-preserving
//! hyperbolic flows.
//!
//! The crate builds concrete suspension flows over hyperbolic toral
//! automorphisms, computes multiplicative cocycles and their regularity
//! functions D_eps / R_eps, triangularizes non-autonomous linear systems
//! through differentiable Gram-Schmidt frames, constructs delta-norms and
//! Gronwall-type growth certificates, and assembles the large-deviation
//! entropy machinery (pressure curves, Legendre transforms, integrability
//! thresholds, tail rates) needed to stress-test all of the above on
//! systems with known answers.
//!
//! The crate is `no_std` (with `alloc`); all IO, configuration, and
//! parallel orchestration live in the companion `oseledets-lab` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cocycle;
pub mod deltanorm;
pub mod dynamics;
pub mod error;
pub mod mat;
pub(crate) mod math;
pub mod perron;
pub mod regularity;
pub mod rng;
pub mod smoothing;
pub mod thermo;

pub use error::{CoreError, Result};
