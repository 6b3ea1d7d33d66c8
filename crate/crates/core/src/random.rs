//! Seeded generators for skew matrices, extremal states and polynomial
//! control-affine systems, plus the Heisenberg benchmark.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hamsym::ExtremalState;
use crate::skew::SkewMatrix;
use crate::vecfield::{ControlAffineSystem, Monomial, PolyVectorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fresh 64-bit seed drawn from `rng`.
pub fn next_seed(rng: &mut ChaCha8Rng) -> u64 {
    rng.next_u64()
}

/// Uniform on `[lo, hi)` with 53 random bits.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
}

pub fn index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

/// Entries of the strict upper triangle uniform on `[−1, 1)`.
pub fn skew(k: usize, rng: &mut ChaCha8Rng) -> SkewMatrix {
    let upper: Vec<f64> = (0..k * k.saturating_sub(1) / 2).map(|_| uniform(rng, -1.0, 1.0)).collect();
    SkewMatrix::from_upper(k, &upper).expect("length matches")
}

/// `X·J·Xᵀ` with `X` a random `k × 2m₀` matrix and `J` the standard symplectic form: rank `2m₀`.
pub fn skew_of_rank(k: usize, m0: usize, rng: &mut ChaCha8Rng) -> SkewMatrix {
    let x = DMatrix::from_fn(k, 2 * m0, |_, _| uniform(rng, -1.0, 1.0));
    let mut j = DMatrix::zeros(2 * m0, 2 * m0);
    for i in 0..m0 {
        j[(2 * i, 2 * i + 1)] = 1.0;
        j[(2 * i + 1, 2 * i)] = -1.0;
    }
    let b = &x * j * x.transpose();
    SkewMatrix::from_antisymmetrization(&(b * 0.5)).expect("square")
}

pub fn state(n: usize, rng: &mut ChaCha8Rng) -> ExtremalState {
    loop {
        let q: Vec<f64> = (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect();
        if let Ok(s) = ExtremalState::new(q, p) {
            return s;
        }
    }
}

/// Fields `fᵢ = eᵢ + perturbation` (`i = 0, …, 2m`) with a few random
/// monomials of degree `1..=degree` per component, coefficients in `[−½, ½)`.
pub fn polynomial_system(n: usize, m: usize, degree: u32, rng: &mut ChaCha8Rng) -> Result<ControlAffineSystem> {
    let mut fields = Vec::with_capacity(2 * m + 1);
    for i in 0..=2 * m {
        let comps = (0..n)
            .map(|c| {
                let mut terms = Vec::new();
                if c == i {
                    terms.push(Monomial::new(1.0, vec![0; n]));
                }
                for _ in 0..2 {
                    let mut e = vec![0u32; n];
                    let d = 1 + index(rng, degree.max(1) as usize) as u32;
                    for _ in 0..d {
                        e[index(rng, n)] += 1;
                    }
                    terms.push(Monomial::new(uniform(rng, -0.5, 0.5), e));
                }
                terms
            })
            .collect();
        fields.push(PolyVectorField::new(n, comps)?);
    }
    ControlAffineSystem::new(n, m, fields)
}

/// Nilpotent family in dimension `n = 2m + 2`: `fᵢ = eᵢ + Pᵢ(x₀, …, x_{2m})·e_{2m+1}`
/// with random quadratic `Pᵢ`. Brackets of length four or more vanish.
pub fn nilpotent_system(m: usize, rng: &mut ChaCha8Rng) -> Result<ControlAffineSystem> {
    let n = 2 * m + 2;
    let mut fields = Vec::with_capacity(2 * m + 1);
    for i in 0..=2 * m {
        let mut vertical = Vec::new();
        for a in 0..=2 * m {
            let mut e = vec![0u32; n];
            e[a] = 1;
            vertical.push(Monomial::new(uniform(rng, -1.0, 1.0), e.clone()));
            for b in a..=2 * m {
                let mut e2 = e.clone();
                e2[b] += 1;
                vertical.push(Monomial::new(uniform(rng, -0.5, 0.5), e2));
            }
        }
        let mut comps = vec![Vec::new(); n];
        comps[i].push(Monomial::new(1.0, vec![0; n]));
        comps[n - 1] = vertical;
        fields.push(PolyVectorField::new(n, comps)?);
    }
    ControlAffineSystem::new(n, m, fields)
}

/// A random state moved along a random line in `q` onto the zero set of the
/// Goh Pfaffian (scan of `[−1, 1]` for a sign change, then bisection).
pub fn degenerate_state(sys: &ControlAffineSystem, rng: &mut ChaCha8Rng) -> Result<ExtremalState> {
    let n = sys.n();
    let pf_at = |q: &[f64], p: &[f64]| -> Result<f64> {
        let s = ExtremalState::new(q.to_vec(), p.to_vec())?;
        crate::skew::pfaffian(&crate::hamsym::goh_matrix(sys, &s)?)
    };
    for _ in 0..1000 {
        let s = state(n, rng);
        let dir: Vec<f64> = (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let at = |t: f64| -> Vec<f64> { s.q.iter().zip(&dir).map(|(q, d)| q + t * d).collect() };
        let grid: Vec<f64> = (0..=40).map(|i| -1.0 + i as f64 / 20.0).collect();
        let mut prev = (grid[0], pf_at(&at(grid[0]), &s.p)?);
        for &t in &grid[1..] {
            let cur = (t, pf_at(&at(t), &s.p)?);
            if prev.1 == 0.0 || prev.1.signum() != cur.1.signum() {
                let (mut lo, mut hi, flo) = (prev.0, cur.0, prev.1);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if pf_at(&at(mid), &s.p)?.signum() == flo.signum() && flo != 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return ExtremalState::new(at(if flo == 0.0 { prev.0 } else { hi }), s.p.clone());
            }
            prev = cur;
        }
    }
    Err(crate::error::Error::Precondition("no zero of the Goh Pfaffian found".into()))
}

/// Heisenberg frame `f₁ = ∂x − ½y∂z`, `f₂ = ∂y + ½x∂z` with constant drift.
pub fn heisenberg(drift: [f64; 3]) -> ControlAffineSystem {
    let c = |v: f64| Monomial::new(v, vec![0, 0, 0]);
    let f1 = PolyVectorField::new(3, vec![vec![c(1.0)], vec![], vec![Monomial::new(-0.5, vec![0, 1, 0])]]);
    let f2 = PolyVectorField::new(3, vec![vec![], vec![c(1.0)], vec![Monomial::new(0.5, vec![1, 0, 0])]]);
    ControlAffineSystem::new(3, 1, vec![PolyVectorField::constant(&drift), f1.unwrap(), f2.unwrap()])
        .expect("valid frame")
}
