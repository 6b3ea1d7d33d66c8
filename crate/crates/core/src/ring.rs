//! Commutative-ring abstraction shared by the numeric (`f64`) and symbolic
//! ([`BracketPoly`](crate::hamsym::BracketPoly)) matrix routines.
//!
//! Determinants, Pfaffians and adjoint Pfaffians are written once against
//! [`Ring`] so the symbolic ladders and the numeric evaluations use the
//! same sign conventions.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub trait Ring: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Storage size used for budget accounting (number of terms).
    fn size(&self) -> usize {
        1
    }
}

impl Ring for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
}

/// Dense row-major matrix over a ring.
pub type RMatrix<R> = Vec<Vec<R>>;

fn check_budget<R: Ring>(x: &R, budget: usize) -> Result<()> {
    let terms = x.size();
    if terms > budget {
        Err(Error::BudgetExceeded { terms, budget })
    } else {
        Ok(())
    }
}

/// Rejects a product whose naive term count is far beyond the budget before
/// it is formed.
fn check_product<R: Ring>(a: &R, b: &R, budget: usize) -> Result<()> {
    let terms = a.size().saturating_mul(b.size());
    if terms / 4 > budget {
        Err(Error::BudgetExceeded { terms, budget })
    } else {
        Ok(())
    }
}

/// Determinant by expansion over column subsets (row-by-row dynamic
/// programming, `O(2ⁿ·n)` ring products). Suitable for the small matrices of
/// the bracket ladders.
pub fn det<R: Ring>(a: &RMatrix<R>, budget: usize) -> Result<R> {
    let n = a.len();
    if let Some(row) = a.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: row.len() });
    }
    if n == 0 {
        return Ok(R::one());
    }
    // partial[mask] = signed sum over injections of rows 0..popcount(mask) onto mask
    let mut partial: BTreeMap<u32, R> = BTreeMap::new();
    partial.insert(0, R::one());
    for row in a.iter() {
        let mut next: BTreeMap<u32, R> = BTreeMap::new();
        for (mask, value) in partial.iter() {
            if value.is_zero() {
                continue;
            }
            for (c, entry) in row.iter().enumerate() {
                let bit = 1u32 << c;
                if mask & bit != 0 || entry.is_zero() {
                    continue;
                }
                // inversions added by placing column c after the columns already used
                let above = (mask >> (c + 1)).count_ones();
                check_product(value, entry, budget)?;
                let mut term = value.mul(entry);
                if above % 2 == 1 {
                    term = term.neg();
                }
                check_budget(&term, budget)?;
                let slot = next.entry(mask | bit).or_insert_with(R::zero);
                *slot = slot.add(&term);
                check_budget(slot, budget)?;
            }
        }
        partial = next;
    }
    Ok(partial.remove(&((1u32 << n) - 1)).unwrap_or_else(R::zero))
}

/// Pfaffian of the principal submatrix indexed by `idx` (ascending), via the
/// signed perfect-matching sum expanded along the first index.
fn pfaffian_sub<R: Ring>(a: &RMatrix<R>, idx: &[usize], memo: &mut BTreeMap<Vec<usize>, R>, budget: usize) -> Result<R> {
    if idx.is_empty() {
        return Ok(R::one());
    }
    if idx.len() % 2 == 1 {
        return Ok(R::zero());
    }
    if let Some(v) = memo.get(idx) {
        return Ok(v.clone());
    }
    let first = idx[0];
    let mut acc = R::zero();
    for pos in 1..idx.len() {
        let entry = &a[first][idx[pos]];
        if entry.is_zero() {
            continue;
        }
        let rest: Vec<usize> = idx[1..].iter().copied().filter(|&x| x != idx[pos]).collect();
        let minor = pfaffian_sub(a, &rest, memo, budget)?;
        check_product(entry, &minor, budget)?;
        let term = entry.mul(&minor);
        acc = if pos % 2 == 1 { acc.add(&term) } else { acc.sub(&term) };
        check_budget(&acc, budget)?;
    }
    memo.insert(idx.to_vec(), acc.clone());
    Ok(acc)
}

/// Pfaffian of an even skew matrix, normalised so that `Pf([[0,a],[−a,0]]) = a`.
/// Only the strict upper triangle is read.
pub fn pfaffian<R: Ring>(a: &RMatrix<R>, budget: usize) -> Result<R> {
    let k = a.len();
    if k % 2 == 1 {
        return Err(Error::OddSize(k));
    }
    let idx: Vec<usize> = (0..k).collect();
    let mut memo = BTreeMap::new();
    pfaffian_sub(a, &idx, &mut memo, budget)
}

/// Adjoint Pfaffian `B` with `B·A = Pf(A)·Id`.
///
/// For `i < j` (zero-based), `B[i][j] = (−1)^(i+j) · Pf(A with rows/columns i, j removed)`
/// and `B[j][i] = −B[i][j]`. Entries are homogeneous of degree `k/2 − 1`.
pub fn adj_pfaffian<R: Ring>(a: &RMatrix<R>, budget: usize) -> Result<RMatrix<R>> {
    let k = a.len();
    if k % 2 == 1 {
        return Err(Error::OddSize(k));
    }
    let mut out = vec![vec![R::zero(); k]; k];
    let mut memo = BTreeMap::new();
    for i in 0..k {
        for j in i + 1..k {
            let rest: Vec<usize> = (0..k).filter(|&x| x != i && x != j).collect();
            let minor = pfaffian_sub(a, &rest, &mut memo, budget)?;
            let signed = if (i + j) % 2 == 0 { minor } else { minor.neg() };
            out[j][i] = signed.neg();
            out[i][j] = signed;
        }
    }
    Ok(out)
}

pub fn matmul<R: Ring>(a: &RMatrix<R>, b: &RMatrix<R>, budget: usize) -> Result<RMatrix<R>> {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    let mut out = Vec::with_capacity(a.len());
    for row in a {
        if row.len() != inner {
            return Err(Error::DimensionMismatch { expected: inner, found: row.len() });
        }
        let mut out_row = Vec::with_capacity(cols);
        for c in 0..cols {
            let mut acc = R::zero();
            for (t, x) in row.iter().enumerate() {
                if x.is_zero() || b[t][c].is_zero() {
                    continue;
                }
                check_product(x, &b[t][c], budget)?;
                acc = acc.add(&x.mul(&b[t][c]));
                check_budget(&acc, budget)?;
            }
            out_row.push(acc);
        }
        out.push(out_row);
    }
    Ok(out)
}

pub fn transpose<R: Ring>(a: &RMatrix<R>) -> RMatrix<R> {
    let cols = a.first().map_or(0, |r| r.len());
    (0..cols).map(|c| a.iter().map(|row| row[c].clone()).collect()).collect()
}

/// Submatrix with the given row and column index lists.
pub fn extract<R: Ring>(a: &RMatrix<R>, rows: &[usize], cols: &[usize]) -> RMatrix<R> {
    rows.iter().map(|&r| cols.iter().map(|&c| a[r][c].clone()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skew4(a12: f64, a13: f64, a14: f64, a23: f64, a24: f64, a34: f64) -> RMatrix<f64> {
        vec![
            vec![0.0, a12, a13, a14],
            vec![-a12, 0.0, a23, a24],
            vec![-a13, -a23, 0.0, a34],
            vec![-a14, -a24, -a34, 0.0],
        ]
    }

    #[test]
    fn det_small() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(det(&a, usize::MAX).unwrap(), -2.0);
        let p = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]];
        assert_eq!(det(&p, usize::MAX).unwrap(), 1.0);
        assert_eq!(det::<f64>(&vec![], usize::MAX).unwrap(), 1.0);
    }

    #[test]
    fn pfaffian_four_by_four_matches_matching_sum() {
        let (a12, a13, a14, a23, a24, a34) = (1.5, -0.25, 2.0, 0.75, -1.0, 3.0);
        let pf = pfaffian(&skew4(a12, a13, a14, a23, a24, a34), usize::MAX).unwrap();
        assert_eq!(pf, a12 * a34 - a13 * a24 + a14 * a23);
    }

    #[test]
    fn adjoint_two_by_two() {
        let a = vec![vec![0.0, 5.0], vec![-5.0, 0.0]];
        let b = adj_pfaffian(&a, usize::MAX).unwrap();
        assert_eq!(b, vec![vec![0.0, -1.0], vec![1.0, 0.0]]);
        let prod = matmul(&b, &a, usize::MAX).unwrap();
        assert_eq!(prod, vec![vec![5.0, 0.0], vec![0.0, 5.0]]);
    }

    #[test]
    fn adjoint_four_by_four_identity() {
        let a = skew4(1.0, 2.0, -1.0, 0.5, 3.0, -2.0);
        let pf = pfaffian(&a, usize::MAX).unwrap();
        let prod = matmul(&adj_pfaffian(&a, usize::MAX).unwrap(), &a, usize::MAX).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { pf } else { 0.0 };
                assert!((prod[i][j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn odd_size_rejected() {
        let a = vec![vec![0.0; 3]; 3];
        assert_eq!(pfaffian(&a, usize::MAX), Err(Error::OddSize(3)));
        assert!(adj_pfaffian(&a, usize::MAX).is_err());
    }
}
