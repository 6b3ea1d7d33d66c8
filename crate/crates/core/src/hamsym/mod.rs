//! Bracket Hamiltonians and the two ladders of vanishing functions.
//!
//! `h_D(λ) = ⟨p, f_D(q)⟩` for a covector `λ = (q, p)`. With the bracket
//! convention of this crate the Poisson bracket satisfies `{h_i, h_D} = h_{iD}`.
//! Control indices `1..=2m` are the rows and columns `0..2m` of the Goh matrix.

mod bracket;
mod eval;
mod mu;
mod phi;

pub use bracket::{base_mu, BracketPoly, Gen, BASE_PHI0};
pub use eval::{
    goh_matrix, h0i, h_eval, kappa_g, kappa_g_symbolic, phi0, phi0_symbolic, singular_control,
    singular_control_from, symbolic_goh, symbolic_h0i, BracketEvaluator, KappaG, SingularControl,
    StateCache,
};
pub use mu::{mu_sequence, relh0_check, Branch, MuOptions, MuState, MuStep, Relh0Report};
pub use phi::{phi_sequence, phi_symbolic, structure_split, StructureSplit};

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default term-count budget for symbolic expansions.
pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Cotangent point `λ = (q, p)` with `p ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl ExtremalState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), found: p.len() });
        }
        if q.iter().chain(&p).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(String::from("non-finite state")));
        }
        if p.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidInput(String::from("covector p must be nonzero")));
        }
        Ok(ExtremalState { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}
