//! Global stability analysis of autonomous nonlinear ODE systems from
//! Jacobian eigenvalues at the equilibria and the large-state behaviour of
//! Hessian eigenvalues, with numerical trajectory evidence.
//!
//! The usual flow:
//!
//! 1. [`sysdsl::parse_system`] reads a system file into a [`SystemDef`].
//! 2. [`VectorField::new`] differentiates it symbolically (Jacobian and
//!    Hessians) and compiles everything for fast evaluation.
//! 3. [`equilibria::find_equilibria`] locates and classifies equilibria.
//! 4. [`criteria::verdict`] evaluates the two-part criterion.
//! 5. [`simkit`] integrates trajectories to corroborate the verdict.

// Validation uses `!(a < b)` so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod criteria;
pub mod denselin;
pub mod equilibria;
pub mod report;
pub mod simkit;
pub mod sysdsl;

pub use sysdsl::{HessianMode, SystemDef, VectorField};

/// Built-in benchmark system files.
pub mod benchmarks {
    /// FitzHugh-Nagumo variant with `I=0, a=0, b=0.333, c=1, tau=1`.
    pub const FHN: &str = include_str!("../systems/fhn.sys");
    /// Van der Pol oscillator with `mu = -0.1`.
    pub const VDP: &str = include_str!("../systems/vdp.sys");
}
