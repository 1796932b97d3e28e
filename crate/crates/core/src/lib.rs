//! Shooting solver for compactly supported nodal states of the radial
//! nonlinear Dirac system
//!
//! ```text
//!   u' + 2u/r = v (Ω − m − F(v² − u²))
//!   v'        = −u (Ω + m + F(v² − u²)),      F(s) = p |s|^(p−1),  0 < p < 1
//! ```
//!
//! with `u(0) = 0`, `v(0) = x`. The nonlinearity is singular on the diagonal
//! set `|u| = |v|`; solutions are continued through it in the extended sense
//! and extended by zero once they reach the origin.
//!
//! The crate is `no_std` (it needs `alloc`). Module map:
//!
//! * [`model`]: parameters, energies `H`/`H_ε`, level-set constants, the
//!   regularization cutoff `φ_ε`.
//! * [`constants`]: admissibility thresholds `p̄`, `Ω_p` and the shooting
//!   constants `r₀`, `α`, `Θ`, `γ`, `E₁`.
//! * [`integrator`]: event-driven adaptive integration across the singular set.
//! * [`shooter`]: classification of initial data and nodal bisection.
//! * [`mitlimit`]: free Dirac arcs and the `p → 0` continuation.
#![no_std]
#![allow(clippy::too_many_arguments)]

extern crate alloc;

pub mod bessel;
pub mod constants;
mod error;
pub mod integrator;
pub(crate) mod math;
pub mod mitlimit;
pub mod model;
pub(crate) mod roots;
pub mod shooter;
pub mod spinor;

pub use error::{Error, Result};
pub use model::{ModelParams, PlaneState};
