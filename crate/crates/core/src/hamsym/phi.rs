//! The ladder `φ_{ℓ+1} = det Φ_ℓ` on the invertible-Goh stratum and the
//! split of `φ_ℓ` into its `ad_{h₀}^ℓ(φ₀)·det(H)^ℓ` part and a remainder.

use alloc::vec;
use alloc::vec::Vec;

use super::bracket::{BracketPoly, Gen, BASE_PHI0};
use super::eval::{phi0_symbolic, symbolic_goh, symbolic_h0i, BracketEvaluator};
use super::ExtremalState;
use crate::error::Result;
use crate::ring::{self, RMatrix, Ring};
use crate::vecfield::ControlAffineSystem;

fn never(_: &[u8]) -> bool {
    false
}

/// `Φ = [[h_{0I}, −H], [{h₀,φ}, {h_I,φ}ᵀ]]` for a given `φ`.
fn phi_matrix(m: usize, phi: &BracketPoly, vanishes: &dyn Fn(&[u8]) -> bool) -> RMatrix<BracketPoly> {
    let h = symbolic_goh(m);
    let h0 = symbolic_h0i(m);
    let mut rows: RMatrix<BracketPoly> = (0..2 * m)
        .map(|i| {
            let mut row = vec![h0[i].prune(vanishes)];
            row.extend(h[i].iter().map(|x| x.prune(vanishes).neg()));
            row
        })
        .collect();
    rows.push((0..=2 * m as u8).map(|i| phi.poisson_ad_pruned(i, vanishes)).collect());
    rows
}

fn ladder(
    m: usize,
    start: BracketPoly,
    lmax: usize,
    budget: usize,
    vanishes: &dyn Fn(&[u8]) -> bool,
) -> Result<Vec<BracketPoly>> {
    let mut out = vec![start];
    for _ in 0..lmax {
        let phi = &out[out.len() - 1];
        let next = ring::det(&phi_matrix(m, phi, vanishes), budget)?;
        out.push(next);
    }
    Ok(out)
}

/// `φ₀, …, φ_{ℓmax}` as polynomials in the bracket generators.
pub fn phi_symbolic(m: usize, lmax: usize, budget: usize) -> Result<Vec<BracketPoly>> {
    ladder(m, phi0_symbolic(m)?, lmax, budget, &never)
}

/// `φ₀(λ), …, φ_{ℓmax}(λ)`. The last value is the determinant of the
/// numerically evaluated `Φ_{ℓmax−1}`; the symbolic ladder is pruned of
/// brackets that vanish identically for `sys`.
pub fn phi_sequence(sys: &ControlAffineSystem, state: &ExtremalState, lmax: usize, budget: usize) -> Result<Vec<f64>> {
    let ev = BracketEvaluator::new(sys);
    let vanishes = |d: &[u8]| ev.vanishes(d);
    let at = ev.at(state);
    let m = sys.m();
    let start = phi0_symbolic(m)?.prune(&vanishes);
    let symbolic = ladder(m, start, lmax.saturating_sub(1), budget, &vanishes)?;
    let mut values = symbolic.iter().map(|p| at.eval(p)).collect::<Result<Vec<_>>>()?;
    if lmax > 0 {
        let last = &symbolic[symbolic.len() - 1];
        let numeric: RMatrix<f64> = phi_matrix(m, last, &vanishes)
            .iter()
            .map(|row| row.iter().map(|x| at.eval(x)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        values.push(ring::det(&numeric, usize::MAX)?);
    }
    Ok(values)
}

/// `φ_ℓ = ad_{h₀}^ℓ(φ₀)·det(H)^ℓ + B_ℓ` in two forms.
///
/// The formal form keeps `φ₀` as an opaque symbol so the ad-words applied to
/// it stay visible; the expanded form writes everything in `h_D`.
#[derive(Debug, Clone)]
pub struct StructureSplit {
    pub l: usize,
    pub m: usize,
    pub leading: BracketPoly,
    pub remainder: BracketPoly,
    pub formal_leading: BracketPoly,
    pub formal_remainder: BracketPoly,
    /// No `ad_{h₀}^ℓ(φ₀)` in the formal remainder and no ad-word longer than `ℓ`.
    pub formal_certified: bool,
    /// The formal split, once `φ₀` is expanded, reproduces the symbolic `φ_ℓ`.
    pub expansion_matches: bool,
    /// The expanded remainder has no `h_D` with `D = 0^ℓ·ik` (the generators
    /// carrying the top term of `ad_{h₀}^ℓ(φ₀)`).
    pub expanded_certified: bool,
}

impl StructureSplit {
    pub fn certified(&self) -> bool {
        self.formal_certified && self.expansion_matches && self.expanded_certified
    }
}

pub fn structure_split(l: usize, m: usize, budget: usize) -> Result<StructureSplit> {
    let zeros = vec![0u8; l];
    let h = symbolic_goh(m);
    let pf = ring::pfaffian(&h, budget)?;
    let det_pow = pf.mul(&pf).pow(l);

    let formal = ladder(m, BracketPoly::formal(BASE_PHI0, &[]), l, budget, &never)?;
    let formal_phi = &formal[l];
    let formal_leading = BracketPoly::formal(BASE_PHI0, &zeros).mul(&det_pow);
    let formal_remainder = formal_phi.sub(&formal_leading);
    let formal_certified = !formal_remainder.any_generator(|g| match g {
        Gen::Ad { word, .. } => word.len() > l || word.as_slice() == zeros.as_slice(),
        Gen::H(_) => false,
    });

    let phi0 = phi0_symbolic(m)?;
    let expanded = phi_symbolic(m, l, budget)?;
    let phi_l = &expanded[l];
    let mut expand = |g: &Gen| match g {
        Gen::Ad { base, word } if *base == BASE_PHI0 => Some(phi0.ad_word(word, &never)),
        _ => None,
    };
    let expansion_matches = formal_phi.substitute(&mut expand, budget)? == *phi_l;

    let leading = phi0.ad_word(&zeros, &never).mul(&det_pow);
    let remainder = phi_l.sub(&leading);
    let expanded_certified = l == 0
        || !remainder.any_generator(|g| matches!(g, Gen::H(d) if d.len() == l + 2 && d[..l].iter().all(|&i| i == 0)));

    Ok(StructureSplit {
        l,
        m,
        leading,
        remainder,
        formal_leading,
        formal_remainder,
        formal_certified,
        expansion_matches,
        expanded_certified,
    })
}
