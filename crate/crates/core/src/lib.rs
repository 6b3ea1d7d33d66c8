//! Algebra and numerics for the regularity analysis of time-extremal
//! trajectories of control-affine systems with an even number of controls.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised in layers:
//!
//! * [`vecfield`]: polynomial vector fields on ℝⁿ, Lie brackets, control-affine frames.
//! * [`skew`]: Pfaffians, adjoint Pfaffians, even ranks and kernel bases of skew matrices.
//! * [`hamsym`]: polynomials in the bracket Hamiltonians `h_D`, the Goh matrix, and the
//!   two recursive ladders of vanishing functions (`φ_ℓ` and `μ_r`).
//! * [`flow`]: extremal flow integration with bang/singular control selection and
//!   switching-time localization.
//! * [`fuller`]: exact Fuller order of finitely described scattered subsets of ℝ.
//! * [`bound`]: the combinatorial upper bound on the Fuller order of generic extremals.
//!
//! Lie brackets follow `[f, g] = Dg·f − Df·g` throughout, so that
//! `d/dt ⟨p, X(q)⟩ = ⟨p, [f₀ + Σ uᵢfᵢ, X](q)⟩` along extremals and `{h_i, h_D} = h_{iD}`.
#![no_std]

extern crate alloc;

pub mod bound;
mod combinatorics;
pub mod error;
pub mod flow;
pub mod fuller;
pub mod hamsym;
pub mod random;
pub mod ring;
pub mod rk;
pub mod skew;
pub mod vecfield;

pub use error::{Error, Result};
pub use nalgebra;
pub use combinatorics::combinations_lex;
