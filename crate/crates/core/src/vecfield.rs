//! Polynomial vector fields on ℝⁿ and control-affine frames.
//!
//! Bracket convention: `[f, g] = Dg·f − Df·g`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A single term `coefficient · x^exponents`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(coefficient: f64, exponents: Vec<u32>) -> Self {
        Monomial { coefficient, exponents }
    }
}

/// Polynomial in `nvars` real variables. Like terms are merged and zero
/// coefficients pruned on every operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

fn ipow(x: f64, e: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..e {
        acc *= x;
    }
    acc
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The coordinate function `x_var`.
    pub fn var(nvars: usize, var: usize) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        let mut p = Poly::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    pub fn from_monomials(nvars: usize, monomials: &[Monomial]) -> Result<Self> {
        let mut p = Poly::zero(nvars);
        for m in monomials {
            if m.exponents.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, found: m.exponents.len() });
            }
            if !m.coefficient.is_finite() {
                return Err(Error::InvalidInput(String::from("non-finite coefficient")));
            }
            p.add_term(m.exponents.clone(), m.coefficient);
        }
        Ok(p)
    }

    fn add_term(&mut self, exponents: Vec<u32>, c: f64) {
        use alloc::collections::btree_map::Entry;
        if c == 0.0 {
            return;
        }
        match self.terms.entry(exponents) {
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

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn monomials(&self) -> Vec<Monomial> {
        self.terms.iter().map(|(e, c)| Monomial::new(*c, e.clone())).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| e.iter().zip(x).fold(*c, |acc, (&k, &xi)| acc * ipow(xi, k)))
            .sum()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    /// Formal partial derivative with respect to `x_var`.
    pub fn derivative(&self, var: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[var] -= 1;
            out.add_term(d, c * e[var] as f64);
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (v, k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*x{}", v + 1)?,
                    _ => write!(f, "*x{}^{}", v + 1, k)?,
                }
            }
        }
        Ok(())
    }
}

/// Polynomial vector field `Σ components[i] ∂/∂x_i` on ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyVectorField {
    dim: usize,
    components: Vec<Poly>,
}

fn check_point(dim: usize, q: &[f64]) -> Result<()> {
    if q.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: q.len() });
    }
    Ok(())
}

impl PolyVectorField {
    pub fn new(dim: usize, components: Vec<Vec<Monomial>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(String::from("vector field dimension must be positive")));
        }
        if components.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: components.len() });
        }
        let components = components
            .iter()
            .map(|c| Poly::from_monomials(dim, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyVectorField { dim, components })
    }

    pub fn from_polys(components: Vec<Poly>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::InvalidInput(String::from("vector field dimension must be positive")));
        }
        if let Some(c) = components.iter().find(|c| c.nvars() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: c.nvars() });
        }
        Ok(PolyVectorField { dim, components })
    }

    pub fn zero(dim: usize) -> Self {
        PolyVectorField { dim, components: vec![Poly::zero(dim); dim] }
    }

    /// Constant field with the given value.
    pub fn constant(value: &[f64]) -> Self {
        let dim = value.len();
        PolyVectorField { dim, components: value.iter().map(|&c| Poly::constant(dim, c)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Poly::is_zero)
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Poly::degree).max().unwrap_or(0)
    }

    pub fn evaluate(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_point(self.dim, q)?;
        Ok(self.components.iter().map(|c| c.eval(q)).collect())
    }

    /// `J[i][j] = ∂f_i/∂x_j (q)` by formal differentiation.
    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self.dim, q)?;
        Ok(DMatrix::from_fn(self.dim, self.dim, |i, j| self.components[i].derivative(j).eval(q)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(PolyVectorField {
            dim: self.dim,
            components: self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        PolyVectorField { dim: self.dim, components: self.components.iter().map(|c| c.scale(s)).collect() }
    }

    /// Directional derivative `Dg·f` of `g` along `self`, componentwise.
    fn derivative_along(&self, g: &Self) -> Vec<Poly> {
        (0..self.dim)
            .map(|i| {
                (0..self.dim).fold(Poly::zero(self.dim), |acc, j| {
                    acc.add(&g.components[i].derivative(j).mul(&self.components[j]))
                })
            })
            .collect()
    }

    /// `[self, other] = D(other)·self − D(self)·other`.
    pub fn lie_bracket(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let a = self.derivative_along(other);
        let b = other.derivative_along(self);
        Ok(PolyVectorField { dim: self.dim, components: a.iter().zip(&b).map(|(x, y)| x.sub(y)).collect() })
    }

    /// Flattened form with precomputed Jacobian polynomials, for fast repeated evaluation.
    pub fn compile(&self) -> CompiledField {
        let flatten = |p: &Poly| -> Vec<(f64, Vec<u32>)> { p.terms.iter().map(|(e, c)| (*c, e.clone())).collect() };
        CompiledField {
            dim: self.dim,
            components: self.components.iter().map(flatten).collect(),
            jacobian: self
                .components
                .iter()
                .map(|c| (0..self.dim).map(|j| flatten(&c.derivative(j))).collect())
                .collect(),
        }
    }
}

/// Evaluation-only form of a [`PolyVectorField`].
#[derive(Debug, Clone)]
pub struct CompiledField {
    dim: usize,
    components: Vec<Vec<(f64, Vec<u32>)>>,
    jacobian: Vec<Vec<Vec<(f64, Vec<u32>)>>>,
}

fn eval_flat(terms: &[(f64, Vec<u32>)], x: &[f64]) -> f64 {
    terms.iter().map(|(c, e)| e.iter().zip(x).fold(*c, |acc, (&k, &xi)| acc * ipow(xi, k))).sum()
}

impl CompiledField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_into(&self, q: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = eval_flat(c, q);
        }
    }

    pub fn eval(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(q, &mut out);
        out
    }

    /// `⟨p, f(q)⟩`.
    pub fn pair(&self, q: &[f64], p: &[f64]) -> f64 {
        self.components.iter().zip(p).map(|(c, pi)| pi * eval_flat(c, q)).sum()
    }

    /// Accumulates `scale · J(q)ᵀ p` into `out`.
    pub fn add_jacobian_transpose_times(&self, q: &[f64], p: &[f64], scale: f64, out: &mut [f64]) {
        for (i, row) in self.jacobian.iter().enumerate() {
            if p[i] == 0.0 {
                continue;
            }
            for (j, d) in row.iter().enumerate() {
                if !d.is_empty() {
                    out[j] += scale * p[i] * eval_flat(d, q);
                }
            }
        }
    }
}

/// Multi-index `D = i₁⋯i_k` over `{0, …, 2m}` naming the right-nested bracket
/// `f_D = [f_{i₁}, [⋯, [f_{i_{k−1}}, f_{i_k}]⋯]]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn new(indices: Vec<u8>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput(String::from("multi-index must be nonempty")));
        }
        Ok(MultiIndex(indices))
    }

    pub fn single(i: u8) -> Self {
        MultiIndex(vec![i])
    }

    pub fn pair(i: u8, j: u8) -> Self {
        MultiIndex(vec![i, j])
    }

    pub fn indices(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `iD`: prepend one index (the multi-index of `[f_i, f_D]`).
    pub fn prepend(&self, i: u8) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(i);
        v.extend_from_slice(&self.0);
        MultiIndex(v)
    }

    /// Drop the first index; `None` for length one.
    pub fn tail(&self) -> Option<Self> {
        if self.0.len() <= 1 {
            None
        } else {
            Some(MultiIndex(self.0[1..].to_vec()))
        }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = self.0.iter().any(|&i| i > 9);
        for (k, i) in self.0.iter().enumerate() {
            if sep && k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

/// `q̇ = f₀(q) + Σ_{i=1}^{2m} u_i f_i(q)` with `‖u‖ ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlAffineSystem {
    n: usize,
    m: usize,
    fields: Vec<PolyVectorField>,
}

impl ControlAffineSystem {
    pub fn new(n: usize, m: usize, fields: Vec<PolyVectorField>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput(String::from("m must be at least 1 (2m controls)")));
        }
        if fields.len() != 2 * m + 1 {
            return Err(Error::InvalidInput(format!("expected {} fields, found {}", 2 * m + 1, fields.len())));
        }
        if 2 * m + 1 > n {
            return Err(Error::InvalidInput(format!("2m+1 = {} exceeds ambient dimension {}", 2 * m + 1, n)));
        }
        if let Some(f) = fields.iter().find(|f| f.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: f.dim() });
        }
        Ok(ControlAffineSystem { n, m, fields })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of controlled fields, `2m`.
    pub fn controls(&self) -> usize {
        2 * self.m
    }

    pub fn fields(&self) -> &[PolyVectorField] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> Result<&PolyVectorField> {
        self.fields.get(i).ok_or(Error::IndexOutOfRange { index: i, max: 2 * self.m })
    }

    pub fn check_index(&self, d: &MultiIndex) -> Result<()> {
        match d.indices().iter().find(|&&i| i as usize > 2 * self.m) {
            Some(&i) => Err(Error::IndexOutOfRange { index: i as usize, max: 2 * self.m }),
            None => Ok(()),
        }
    }

    /// Right-nested bracket `f_D`; `|D| = 1` returns the field itself.
    pub fn iterated_bracket(&self, d: &MultiIndex) -> Result<PolyVectorField> {
        self.check_index(d)?;
        let idx = d.indices();
        let mut acc = self.fields[idx[idx.len() - 1] as usize].clone();
        for &i in idx[..idx.len() - 1].iter().rev() {
            acc = self.fields[i as usize].lie_bracket(&acc)?;
        }
        Ok(acc)
    }

    /// Whether `f₀(q), …, f_{2m}(q)` have full row rank `2m+1`, i.e. every
    /// singular value of the stacked `(2m+1)×n` matrix exceeds `tol`.
    pub fn frame_independent(&self, q: &[f64], tol: f64) -> bool {
        if q.len() != self.n {
            return false;
        }
        let rows = 2 * self.m + 1;
        let mut mat = DMatrix::zeros(rows, self.n);
        for (r, f) in self.fields.iter().enumerate() {
            match f.evaluate(q) {
                Ok(v) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return false;
                    }
                    for (c, x) in v.into_iter().enumerate() {
                        mat[(r, c)] = x;
                    }
                }
                Err(_) => return false,
            }
        }
        let sv = mat.transpose().svd(false, false).singular_values;
        sv.len() == rows && sv.iter().all(|&s| s > tol)
    }
}
