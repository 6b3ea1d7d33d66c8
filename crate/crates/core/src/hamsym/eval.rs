//! Numeric evaluation of bracket Hamiltonians and the first-order objects
//! built from them: Goh matrix, `h_{0I}`, `φ₀`, the singular control and the
//! kernel functions `κ_i`, `g_l`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;

use nalgebra::DVector;

use super::bracket::{BracketPoly, Gen};
use super::{ExtremalState, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::ring::{self, RMatrix, Ring};
use crate::skew::{self, BlockDecomposition, SkewMatrix};
use crate::vecfield::{CompiledField, ControlAffineSystem, MultiIndex, PolyVectorField};

/// Lazily computed and cached bracket fields `f_D` of one system.
pub struct BracketEvaluator<'a> {
    sys: &'a ControlAffineSystem,
    fields: RefCell<BTreeMap<Vec<u8>, (PolyVectorField, CompiledField)>>,
}

impl<'a> BracketEvaluator<'a> {
    pub fn new(sys: &'a ControlAffineSystem) -> Self {
        BracketEvaluator { sys, fields: RefCell::new(BTreeMap::new()) }
    }

    pub fn system(&self) -> &'a ControlAffineSystem {
        self.sys
    }

    fn ensure(&self, d: &[u8]) -> Result<()> {
        if self.fields.borrow().contains_key(d) {
            return Ok(());
        }
        let max = self.sys.controls();
        if let Some(&i) = d.iter().find(|&&i| i as usize > max) {
            return Err(Error::IndexOutOfRange { index: i as usize, max });
        }
        let field = match d {
            [] => return Err(Error::InvalidInput(String::from("empty multi-index"))),
            [i] => self.sys.fields()[*i as usize].clone(),
            [i, rest @ ..] => {
                self.ensure(rest)?;
                let inner = self.fields.borrow()[rest].0.clone();
                self.sys.fields()[*i as usize].lie_bracket(&inner)?
            }
        };
        let compiled = field.compile();
        self.fields.borrow_mut().insert(d.to_vec(), (field, compiled));
        Ok(())
    }

    /// `f_D`.
    pub fn field(&self, d: &[u8]) -> Result<PolyVectorField> {
        self.ensure(d)?;
        Ok(self.fields.borrow()[d].0.clone())
    }

    /// Whether `f_D` is the zero polynomial field. Invalid indices report `false`.
    pub fn vanishes(&self, d: &[u8]) -> bool {
        if self.ensure(d).is_err() {
            return false;
        }
        self.fields.borrow()[d].0.is_zero()
    }

    /// `h_D(λ)`.
    pub fn h(&self, d: &[u8], state: &ExtremalState) -> Result<f64> {
        if state.dim() != self.sys.n() {
            return Err(Error::DimensionMismatch { expected: self.sys.n(), found: state.dim() });
        }
        self.ensure(d)?;
        Ok(self.fields.borrow()[d].1.pair(&state.q, &state.p))
    }

    pub fn at<'e>(&'e self, state: &'e ExtremalState) -> StateCache<'e, 'a> {
        StateCache { ev: self, state, values: RefCell::new(BTreeMap::new()) }
    }
}

/// Generator values at one fixed state.
pub struct StateCache<'e, 'a> {
    ev: &'e BracketEvaluator<'a>,
    state: &'e ExtremalState,
    values: RefCell<BTreeMap<Vec<u8>, f64>>,
}

impl StateCache<'_, '_> {
    pub fn state(&self) -> &ExtremalState {
        self.state
    }

    pub fn h(&self, d: &[u8]) -> Result<f64> {
        if let Some(v) = self.values.borrow().get(d) {
            return Ok(*v);
        }
        let v = self.ev.h(d, self.state)?;
        self.values.borrow_mut().insert(d.to_vec(), v);
        Ok(v)
    }

    fn gen_value(&self, g: &Gen) -> Result<f64> {
        match g {
            Gen::H(d) => self.h(d),
            Gen::Ad { .. } => Err(Error::Precondition(alloc::format!("formal symbol {g} has no numeric value"))),
        }
    }

    pub fn eval(&self, p: &BracketPoly) -> Result<f64> {
        p.eval(&mut |g| self.gen_value(g))
    }

    pub fn eval_with_scale(&self, p: &BracketPoly) -> Result<(f64, f64)> {
        p.eval_with_scale(&mut |g| self.gen_value(g))
    }

    pub fn goh(&self) -> Result<SkewMatrix> {
        let k = self.ev.sys.controls();
        let mut upper = Vec::with_capacity(k * (k - 1) / 2);
        for i in 1..=k as u8 {
            for j in i + 1..=k as u8 {
                upper.push(self.h(&[i, j])?);
            }
        }
        SkewMatrix::from_upper(k, &upper)
    }

    pub fn h0i(&self) -> Result<Vec<f64>> {
        (1..=self.ev.sys.controls() as u8).map(|i| self.h(&[0, i])).collect()
    }

    /// `h_I(λ) = (h_1, …, h_{2m})`.
    pub fn h_controls(&self) -> Result<Vec<f64>> {
        (1..=self.ev.sys.controls() as u8).map(|i| self.h(&[i])).collect()
    }
}

/// `h_D(λ) = ⟨p, f_D(q)⟩`.
pub fn h_eval(sys: &ControlAffineSystem, d: &MultiIndex, state: &ExtremalState) -> Result<f64> {
    sys.check_index(d)?;
    if state.dim() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), found: state.dim() });
    }
    let f = sys.iterated_bracket(d)?.evaluate(&state.q)?;
    Ok(f.iter().zip(&state.p).map(|(a, b)| a * b).sum())
}

/// Goh matrix `(h_{ij}(λ))_{i,j=1..2m}`.
pub fn goh_matrix(sys: &ControlAffineSystem, state: &ExtremalState) -> Result<SkewMatrix> {
    BracketEvaluator::new(sys).at(state).goh()
}

/// `h_{0I}(λ) = (h_{01}, …, h_{0,2m})`.
pub fn h0i(sys: &ControlAffineSystem, state: &ExtremalState) -> Result<Vec<f64>> {
    BracketEvaluator::new(sys).at(state).h0i()
}

pub(crate) fn phi0_from(h: &SkewMatrix, h0: &[f64]) -> Result<f64> {
    let adj = skew::adj_pfaffian(h)?;
    let pf = skew::pfaffian(h)?;
    let v = DVector::from_column_slice(h0);
    let w = adj.as_matrix() * &v;
    // ⟨adj² h, h⟩ = −‖adj·h‖² since adj is skew
    Ok(-w.norm_squared() + pf * pf)
}

/// `φ₀ = ⟨adj^Pf(H)² h_{0I}, h_{0I}⟩ + det H`.
pub fn phi0(sys: &ControlAffineSystem, state: &ExtremalState) -> Result<f64> {
    let ev = BracketEvaluator::new(sys);
    let at = ev.at(state);
    phi0_from(&at.goh()?, &at.h0i()?)
}

/// Symbolic Goh matrix with entries `h_{ij}`.
pub fn symbolic_goh(m: usize) -> RMatrix<BracketPoly> {
    let k = 2 * m;
    (0..k).map(|i| (0..k).map(|j| BracketPoly::h(&[i as u8 + 1, j as u8 + 1])).collect()).collect()
}

/// Symbolic `h_{0I}`.
pub fn symbolic_h0i(m: usize) -> Vec<BracketPoly> {
    (1..=2 * m as u8).map(|i| BracketPoly::h(&[0, i])).collect()
}

/// `φ₀` as a polynomial in `h_{ik}`, `i ∈ {0, …, 2m}`, `k ∈ {1, …, 2m}`.
pub fn phi0_symbolic(m: usize) -> Result<BracketPoly> {
    let h = symbolic_goh(m);
    let h0 = symbolic_h0i(m);
    let adj = ring::adj_pfaffian(&h, DEFAULT_BUDGET)?;
    let pf = ring::pfaffian(&h, DEFAULT_BUDGET)?;
    let col: RMatrix<BracketPoly> = h0.iter().map(|x| alloc::vec![x.clone()]).collect();
    let w = ring::matmul(&adj, &col, DEFAULT_BUDGET)?;
    let mut acc = pf.mul(&pf);
    for row in &w {
        acc = acc.sub(&row[0].mul(&row[0]));
    }
    Ok(acc)
}

/// Solution of `H u = h_{0I}` on the invertible-Goh stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularControl {
    pub u: Vec<f64>,
    pub norm: f64,
    pub feasible: bool,
}

/// `u* = H⁻¹ h_{0I}` from a Goh matrix and drift column.
pub fn singular_control_from(h: &SkewMatrix, h0: &[f64], tol: f64) -> Result<SingularControl> {
    let k = h.size();
    if h0.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: h0.len() });
    }
    let lu = h.as_matrix().clone().lu();
    let det = lu.determinant();
    if !(det.abs() > tol) {
        return Err(Error::SingularGoh { det });
    }
    let u = lu
        .solve(&DVector::from_column_slice(h0))
        .ok_or(Error::SingularGoh { det })?;
    let norm = u.norm();
    Ok(SingularControl { u: u.iter().copied().collect(), norm, feasible: norm <= 1.0 + tol })
}

pub fn singular_control(sys: &ControlAffineSystem, state: &ExtremalState, tol: f64) -> Result<SingularControl> {
    let ev = BracketEvaluator::new(sys);
    let at = ev.at(state);
    singular_control_from(&at.goh()?, &at.h0i()?, tol)
}

/// Kernel data of a degenerate Goh matrix at a basepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaG {
    /// Corank parameter: `rank H = 2(m − a)`.
    pub a: usize,
    pub permutation: Vec<usize>,
    pub j0: Vec<usize>,
    pub kappa: Vec<f64>,
    pub g: Vec<f64>,
}

/// Block decomposition of a degenerate Goh matrix; a zero matrix gives the
/// empty principal block.
/// Entries below `tol·floor` in absolute value count as zero, so that a Goh
/// matrix made of round-off is not mistaken for an invertible one.
pub(crate) fn goh_decomposition(h: &SkewMatrix, tol: f64, floor: f64) -> Result<BlockDecomposition> {
    if h.max_abs() <= tol * floor {
        return skew::block_decompose_at_rank(&SkewMatrix::zeros(h.size()), 0, tol);
    }
    let rank = skew::even_rank(h, tol).rank;
    if rank == h.size() {
        return Err(Error::FullRankGoh);
    }
    skew::block_decompose_at_rank(h, rank / 2, tol)
}

/// `κ_i = ⟨Pᵀh_{0I}, v_i⟩` and the strict upper entries of
/// `G = Eᵀ adj^Pf(A₁) E + Pf(A₁) F` over any ring.
pub(crate) fn kappa_g_generic<R: Ring>(
    h: &RMatrix<R>,
    h0: &[R],
    perm: &[usize],
    m0: usize,
    budget: usize,
) -> Result<(Vec<R>, Vec<R>)> {
    let k = h.len();
    let s = 2 * m0;
    let ph = ring::extract(h, perm, perm);
    let h0p: Vec<R> = perm.iter().map(|&i| h0[i].clone()).collect();
    let head: Vec<usize> = (0..s).collect();
    let tail: Vec<usize> = (s..k).collect();
    let f = ring::extract(&ph, &tail, &tail);
    let (kappa, gmat) = if s == 0 {
        (h0p, f)
    } else {
        let a1 = ring::extract(&ph, &head, &head);
        let e = ring::extract(&ph, &head, &tail);
        let adj = ring::adj_pfaffian(&a1, budget)?;
        let pf = ring::pfaffian(&a1, budget)?;
        let adj_e = ring::matmul(&adj, &e, budget)?;
        let kappa = (0..k - s)
            .map(|i| (0..s).fold(pf.mul(&h0p[s + i]), |acc, r| acc.sub(&h0p[r].mul(&adj_e[r][i]))))
            .collect();
        let mut g = ring::matmul(&ring::transpose(&e), &adj_e, budget)?;
        for (i, row) in g.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = x.add(&pf.mul(&f[i][j]));
            }
        }
        (kappa, g)
    };
    let mut g = Vec::new();
    for i in 0..k - s {
        for j in i + 1..k - s {
            g.push(gmat[i][j].clone());
        }
    }
    Ok((kappa, g))
}

pub(crate) fn momentum_scale(state: &ExtremalState) -> f64 {
    num_traits::Float::sqrt(state.p.iter().map(|x| x * x).sum::<f64>())
}

/// `κ_i` and `g_l` at `λ`, with the block decomposition taken at `λ` itself.
pub fn kappa_g(sys: &ControlAffineSystem, state: &ExtremalState, tol: f64) -> Result<KappaG> {
    let ev = BracketEvaluator::new(sys);
    let at = ev.at(state);
    let h = at.goh()?;
    let h0 = at.h0i()?;
    let dec = goh_decomposition(&h, tol, momentum_scale(state))?;
    let (kappa, g) = kappa_g_generic(&h.to_rows(), &h0, &dec.permutation, dec.m0, usize::MAX)?;
    Ok(KappaG { a: sys.m() - dec.m0, permutation: dec.permutation, j0: dec.j0, kappa, g })
}

/// `κ_i` and `g_l` as polynomials in `h_{jk}` for a fixed permutation.
pub fn kappa_g_symbolic(m: usize, perm: &[usize], m0: usize) -> Result<(Vec<BracketPoly>, Vec<BracketPoly>)> {
    if perm.len() != 2 * m || m0 > m {
        return Err(Error::DimensionMismatch { expected: 2 * m, found: perm.len() });
    }
    kappa_g_generic(&symbolic_goh(m), &symbolic_h0i(m), perm, m0, DEFAULT_BUDGET)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::vecfield::Monomial;
    use nalgebra::DMatrix;

    fn mono(c: f64, e: &[u32]) -> Monomial {
        Monomial::new(c, e.to_vec())
    }

    pub(crate) fn heisenberg() -> ControlAffineSystem {
        let f0 = PolyVectorField::new(3, alloc::vec![alloc::vec![], alloc::vec![], alloc::vec![mono(1.0, &[0, 0, 0])]]).unwrap();
        let f1 = PolyVectorField::new(
            3,
            alloc::vec![alloc::vec![mono(1.0, &[0, 0, 0])], alloc::vec![], alloc::vec![mono(-0.5, &[0, 1, 0])]],
        )
        .unwrap();
        let f2 = PolyVectorField::new(
            3,
            alloc::vec![alloc::vec![], alloc::vec![mono(1.0, &[0, 0, 0])], alloc::vec![mono(0.5, &[1, 0, 0])]],
        )
        .unwrap();
        ControlAffineSystem::new(3, 1, alloc::vec![f0, f1, f2]).unwrap()
    }

    /// `f₁ = ∂₁`, `f₂ = ∂₃`, `f₀ = ∂₂ − x₁∂₃`, so that `[f₀, f₁] = f₂`.
    fn drift_bracket_system() -> ControlAffineSystem {
        let f1 = PolyVectorField::constant(&[1.0, 0.0, 0.0]);
        let f2 = PolyVectorField::constant(&[0.0, 0.0, 1.0]);
        let f0 = PolyVectorField::new(
            3,
            alloc::vec![alloc::vec![], alloc::vec![mono(1.0, &[0, 0, 0])], alloc::vec![mono(-1.0, &[1, 0, 0])]],
        )
        .unwrap();
        ControlAffineSystem::new(3, 1, alloc::vec![f0, f1, f2]).unwrap()
    }

    fn state(q: &[f64], p: &[f64]) -> ExtremalState {
        ExtremalState::new(q.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn h_eval_examples() {
        let sys = heisenberg();
        let d12 = MultiIndex::pair(1, 2);
        assert_eq!(h_eval(&sys, &d12, &state(&[0.0; 3], &[0.0, 0.0, 2.5])).unwrap(), 2.5);
        let s = state(&[0.3, -0.7, 1.1], &[0.4, 0.1, -0.9]);
        assert_eq!(h_eval(&sys, &MultiIndex::pair(0, 1), &s).unwrap(), 0.0);
        assert_eq!(h_eval(&sys, &MultiIndex::single(1), &state(&[0.0; 3], &[0.0, 1.0, 0.0])).unwrap(), 0.0);
        let ev = BracketEvaluator::new(&sys);
        assert_eq!(ev.h(&[1, 2], &s).unwrap(), h_eval(&sys, &d12, &s).unwrap());
    }

    #[test]
    fn goh_examples() {
        let sys = heisenberg();
        let h = goh_matrix(&sys, &state(&[1.0, 2.0, 3.0], &[0.2, 0.3, 0.7])).unwrap();
        assert_eq!(h.upper(), alloc::vec![0.7]);
        assert_eq!(h0i(&sys, &state(&[1.0, 2.0, 3.0], &[0.2, 0.3, 0.7])).unwrap(), alloc::vec![0.0, 0.0]);
        let sys = drift_bracket_system();
        let s = state(&[0.5, 0.0, 0.0], &[0.1, 0.2, 0.3]);
        assert_eq!(h0i(&sys, &s).unwrap()[0], 0.3);
        assert_eq!(goh_matrix(&sys, &s).unwrap().upper(), alloc::vec![0.0]);
    }

    #[test]
    fn phi0_examples() {
        let p = phi0_symbolic(1).unwrap();
        let expected = BracketPoly::h(&[1, 2])
            .pow(2)
            .sub(&BracketPoly::h(&[0, 1]).pow(2))
            .sub(&BracketPoly::h(&[0, 2]).pow(2));
        assert_eq!(p, expected);
        let sys = heisenberg();
        assert_eq!(phi0(&sys, &state(&[0.0; 3], &[1.0, 0.0, 3.0])).unwrap(), 9.0);
    }

    #[test]
    fn singular_control_examples() {
        let h = SkewMatrix::from_upper(2, &[2.0]).unwrap();
        let sc = singular_control_from(&h, &[2.0, 0.0], 1e-12).unwrap();
        assert!((sc.u[0] - 0.0).abs() < 1e-15 && (sc.u[1] - 1.0).abs() < 1e-15);
        assert!((sc.norm - 1.0).abs() < 1e-15 && sc.feasible);
        let sc = singular_control_from(&h, &[0.0, 0.0], 1e-12).unwrap();
        assert_eq!(sc.norm, 0.0);
        let z = SkewMatrix::zeros(2);
        assert!(matches!(singular_control_from(&z, &[1.0, 0.0], 1e-12), Err(Error::SingularGoh { .. })));
    }

    #[test]
    fn kappa_g_examples() {
        let sys = heisenberg();
        let s = state(&[0.0; 3], &[1.0, 1.0, 0.0]);
        let kg = kappa_g(&sys, &s, 1e-10).unwrap();
        assert_eq!((kg.a, kg.g.clone(), kg.kappa.clone()), (1, alloc::vec![0.0], alloc::vec![0.0, 0.0]));
        let (kappa, g) = kappa_g_symbolic(1, &[0, 1], 0).unwrap();
        assert_eq!(kappa, symbolic_h0i(1));
        assert_eq!(g, alloc::vec![BracketPoly::h(&[1, 2])]);
        assert_eq!(kappa_g(&sys, &state(&[0.0; 3], &[0.0, 0.0, 1.0]), 1e-10), Err(Error::FullRankGoh));
    }

    #[test]
    fn kappa_g_on_rank_two_goh() {
        let b = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, -1.0, 0.5]) * DMatrix::from_row_slice(1, 4, &[0.3, -1.0, 2.0, 1.0]);
        let h = SkewMatrix::from_antisymmetrization(&b).unwrap();
        let dec = goh_decomposition(&h, 1e-10, 1.0).unwrap();
        assert_eq!(dec.m0, 1);
        let h0 = [0.3, -0.2, 0.9, 1.1];
        let (kappa, g) = kappa_g_generic(&h.to_rows(), &h0, &dec.permutation, dec.m0, usize::MAX).unwrap();
        assert_eq!((kappa.len(), g.len()), (2, 1));
        assert!(g[0].abs() <= 1e-8);
        // κ_i = ⟨h0I, kernel vector⟩ in original coordinates
        let basis = skew::kernel_basis(&h, &dec).unwrap();
        for (k, v) in kappa.iter().zip(&basis) {
            let direct: f64 = v.iter().zip(&h0).map(|(a, b)| a * b).sum();
            assert!((k - direct).abs() <= 1e-12);
        }
    }
}
