//! Propagators, invariants and expectation dynamics for quadratic
//! Hamiltonians with time-dependent coefficients.

pub mod characteristic;
pub mod coefficients;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod gridsim;
pub mod invariants;
pub mod jet;
pub mod ode;
pub mod propagator;
pub mod quadrature;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};

// The guide's Rust snippets run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/conventions.md")]
    pub struct Conventions;
    #[doc = include_str!("../../../book/src/propagator.md")]
    pub struct Propagator;
    #[doc = include_str!("../../../book/src/invariants.md")]
    pub struct Invariants;
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub struct Dynamics;
    #[doc = include_str!("../../../book/src/gridsim.md")]
    pub struct Gridsim;
    #[doc = include_str!("../../../book/src/verification.md")]
    pub struct Verification;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
