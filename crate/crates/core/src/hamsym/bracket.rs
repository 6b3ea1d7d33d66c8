//! Polynomials in the bracket Hamiltonians `h_D` and in opaque
//! ad-words of named functions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::ring::Ring;

/// Base id of the formal symbol standing for `φ₀`.
pub const BASE_PHI0: u16 = 0;

/// Base id of the formal symbol standing for `μ_r`.
pub const fn base_mu(r: usize) -> u16 {
    1 + r as u16
}

/// A polynomial generator.
///
/// `H(D)` is `h_D = ⟨λ, f_D⟩`, stored with its last two indices ascending.
/// `Ad { base, word }` is `ad_{h_{w₁}} ∘ ⋯ ∘ ad_{h_{w_k}}(F)` for a function `F`
/// kept as an opaque symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gen {
    H(Vec<u8>),
    Ad { base: u16, word: Vec<u8> },
}

impl Gen {
    /// Normal form of `h_D`: `None` if it vanishes by antisymmetry, otherwise
    /// the generator and a sign.
    pub fn h(indices: &[u8]) -> Option<(Gen, f64)> {
        let n = indices.len();
        if n == 0 {
            return None;
        }
        if n == 1 {
            return Some((Gen::H(indices.to_vec()), 1.0));
        }
        let (a, b) = (indices[n - 2], indices[n - 1]);
        if a == b {
            return None;
        }
        let mut d = indices.to_vec();
        if a > b {
            d.swap(n - 2, n - 1);
            Some((Gen::H(d), -1.0))
        } else {
            Some((Gen::H(d), 1.0))
        }
    }

    /// `ad_{h_i}` of this generator, with sign.
    pub fn ad(&self, i: u8) -> Option<(Gen, f64)> {
        match self {
            Gen::H(d) => {
                let mut e = Vec::with_capacity(d.len() + 1);
                e.push(i);
                e.extend_from_slice(d);
                Gen::h(&e)
            }
            Gen::Ad { base, word } => {
                let mut w = Vec::with_capacity(word.len() + 1);
                w.push(i);
                w.extend_from_slice(word);
                Some((Gen::Ad { base: *base, word: w }, 1.0))
            }
        }
    }

    pub fn is_formal(&self) -> bool {
        matches!(self, Gen::Ad { .. })
    }
}

impl fmt::Display for Gen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let write_word = |f: &mut fmt::Formatter<'_>, w: &[u8]| -> fmt::Result {
            let sep = w.iter().any(|&i| i > 9);
            for (k, i) in w.iter().enumerate() {
                if sep && k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{i}")?;
            }
            Ok(())
        };
        match self {
            Gen::H(d) => {
                write!(f, "h")?;
                write_word(f, d)
            }
            Gen::Ad { base, word } => {
                if !word.is_empty() {
                    write!(f, "ad")?;
                    write_word(f, word)?;
                    write!(f, "(")?;
                }
                if *base == BASE_PHI0 {
                    write!(f, "phi0")?;
                } else {
                    write!(f, "mu{}", base - 1)?;
                }
                if !word.is_empty() {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

type Mono = Vec<Gen>;

fn mono_mul(a: &[Gen], b: &[Gen]) -> Mono {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i].clone());
            i += 1;
        } else {
            out.push(b[j].clone());
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Real polynomial in [`Gen`] generators; monomials are sorted generator
/// multisets and zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BracketPoly {
    terms: BTreeMap<Mono, f64>,
}

impl BracketPoly {
    pub fn constant(c: f64) -> Self {
        let mut p = BracketPoly::default();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn gen(g: Gen) -> Self {
        let mut p = BracketPoly::default();
        p.add_term(alloc::vec![g], 1.0);
        p
    }

    /// `h_D` in normal form (zero when `D` ends in a repeated index).
    pub fn h(indices: &[u8]) -> Self {
        match Gen::h(indices) {
            Some((g, s)) => BracketPoly::gen(g).scale(s),
            None => BracketPoly::default(),
        }
    }

    /// Opaque `ad_word(F_base)`.
    pub fn formal(base: u16, word: &[u8]) -> Self {
        BracketPoly::gen(Gen::Ad { base, word: word.to_vec() })
    }

    fn add_term(&mut self, mono: Mono, c: f64) {
        use alloc::collections::btree_map::Entry;
        if c == 0.0 {
            return;
        }
        match self.terms.entry(mono) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Gen], f64)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), *c))
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn coefficient(&self, mono: &[Gen]) -> f64 {
        let mut key = mono.to_vec();
        key.sort();
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = BracketPoly::default();
        if s == 0.0 {
            return out;
        }
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(BracketPoly::constant(1.0), |acc, _| Ring::mul(&acc, self))
    }

    pub fn generators(&self) -> BTreeSet<Gen> {
        self.terms.keys().flat_map(|m| m.iter().cloned()).collect()
    }

    /// Whether some monomial contains a generator satisfying `pred`.
    pub fn any_generator(&self, mut pred: impl FnMut(&Gen) -> bool) -> bool {
        self.terms.keys().any(|m| m.iter().any(&mut pred))
    }

    /// `{h_i, ·}` extended as a derivation.
    pub fn poisson_ad(&self, i: u8) -> Self {
        self.poisson_ad_pruned(i, &|_| false)
    }

    /// `poisson_ad` that drops every `h_D` for which `vanishes(D)` holds.
    /// `vanishes` must describe an ideal closed under brackets (for instance
    /// `f_D ≡ 0` for a fixed system), so the result is the same function.
    pub fn poisson_ad_pruned(&self, i: u8, vanishes: &dyn Fn(&[u8]) -> bool) -> Self {
        let mut out = BracketPoly::default();
        for (mono, c) in &self.terms {
            for t in 0..mono.len() {
                if t > 0 && mono[t] == mono[t - 1] {
                    // repeated factor: same image, accounted for below
                    continue;
                }
                let mult = mono[t..].iter().take_while(|g| **g == mono[t]).count();
                let Some((g, s)) = mono[t].ad(i) else { continue };
                if let Gen::H(d) = &g {
                    if vanishes(d) {
                        continue;
                    }
                }
                let mut rest: Mono = Vec::with_capacity(mono.len());
                rest.extend_from_slice(&mono[..t]);
                rest.extend_from_slice(&mono[t + 1..]);
                let pos = rest.partition_point(|x| *x < g);
                rest.insert(pos, g);
                out.add_term(rest, c * s * mult as f64);
            }
        }
        out
    }

    /// `ad_{w₁} ∘ ⋯ ∘ ad_{w_k}` (rightmost applied first).
    pub fn ad_word(&self, word: &[u8], vanishes: &dyn Fn(&[u8]) -> bool) -> Self {
        word.iter().rev().fold(self.clone(), |acc, &i| acc.poisson_ad_pruned(i, vanishes))
    }

    /// Drops every monomial containing an `h_D` with `vanishes(D)`.
    pub fn prune(&self, vanishes: &dyn Fn(&[u8]) -> bool) -> Self {
        let mut out = BracketPoly::default();
        for (m, c) in &self.terms {
            if !m.iter().any(|g| matches!(g, Gen::H(d) if vanishes(d))) {
                out.add_term(m.clone(), *c);
            }
        }
        out
    }

    /// Evaluation with generator values supplied by `value` (each distinct
    /// generator is queried once).
    pub fn eval(&self, value: &mut dyn FnMut(&Gen) -> Result<f64>) -> Result<f64> {
        Ok(self.eval_with_scale(value)?.0)
    }

    /// `(value, Σ |term|)`; the second number bounds the cancellation noise.
    pub fn eval_with_scale(&self, value: &mut dyn FnMut(&Gen) -> Result<f64>) -> Result<(f64, f64)> {
        let mut cache: BTreeMap<&Gen, f64> = BTreeMap::new();
        let (mut sum, mut abs) = (0.0, 0.0);
        for (m, c) in &self.terms {
            let mut t = *c;
            for g in m {
                let v = match cache.get(g) {
                    Some(v) => *v,
                    None => {
                        let v = value(g)?;
                        cache.insert(g, v);
                        v
                    }
                };
                t *= v;
            }
            sum += t;
            abs += t.abs();
        }
        Ok((sum, abs))
    }

    /// Replaces generators for which `map` returns a polynomial.
    pub fn substitute(&self, map: &mut dyn FnMut(&Gen) -> Option<BracketPoly>, budget: usize) -> Result<Self> {
        let mut images: BTreeMap<Gen, Option<BracketPoly>> = BTreeMap::new();
        let mut out = BracketPoly::default();
        for (m, c) in &self.terms {
            let mut term = BracketPoly::constant(*c);
            for g in m {
                let img = images.entry(g.clone()).or_insert_with(|| map(g));
                term = match img {
                    Some(p) => Ring::mul(&term, p),
                    None => Ring::mul(&term, &BracketPoly::gen(g.clone())),
                };
                if term.is_empty() {
                    break;
                }
            }
            for (tm, tc) in term.terms {
                out.add_term(tm, tc);
            }
            if out.len() > budget {
                return Err(Error::BudgetExceeded { terms: out.len(), budget });
            }
        }
        Ok(out)
    }
}

impl Ring for BracketPoly {
    fn zero() -> Self {
        BracketPoly::default()
    }

    fn one() -> Self {
        BracketPoly::constant(1.0)
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add(&self, other: &Self) -> Self {
        let (mut big, small) = if self.len() >= other.len() { (self.clone(), other) } else { (other.clone(), self) };
        for (m, c) in &small.terms {
            big.add_term(m.clone(), *c);
        }
        big
    }

    fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = BracketPoly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        out
    }

    fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    fn size(&self) -> usize {
        self.terms.len()
    }
}

impl fmt::Display for BracketPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let (sign, mag) = if *c < 0.0 { ("-", -c) } else { ("+", *c) };
            if k == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let show_coef = mag != 1.0 || m.is_empty();
            if show_coef {
                write!(f, "{mag}")?;
            }
            for (t, g) in m.iter().enumerate() {
                if t > 0 || show_coef {
                    write!(f, "*")?;
                }
                write!(f, "{g}")?;
            }
        }
        Ok(())
    }
}
