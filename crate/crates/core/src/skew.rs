//! Skew-symmetric matrices: Pfaffians, adjoint Pfaffians, even rank,
//! principal-block decomposition and polynomial kernel bases.
//!
//! Library indices are zero-based.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::combinatorics::combinations_lex;
use crate::error::{Error, Result};
use crate::ring::{self, RMatrix};

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Real skew-symmetric `k×k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    data: DMatrix<f64>,
}

impl SkewMatrix {
    pub fn zeros(k: usize) -> Self {
        SkewMatrix { data: DMatrix::zeros(k, k) }
    }

    /// Builds the matrix from its strict upper triangle listed row by row:
    /// `a₀₁, a₀₂, …, a₀,k−1, a₁₂, …`.
    pub fn from_upper(k: usize, upper: &[f64]) -> Result<Self> {
        let expected = k * k.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: upper.len() });
        }
        if upper.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(String::from("non-finite matrix entry")));
        }
        let mut data = DMatrix::zeros(k, k);
        let mut it = upper.iter();
        for i in 0..k {
            for j in i + 1..k {
                let v = *it.next().unwrap_or(&0.0);
                data[(i, j)] = v;
                data[(j, i)] = -v;
            }
        }
        Ok(SkewMatrix { data })
    }

    /// Accepts a dense matrix only if it is exactly antisymmetric.
    pub fn from_dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let k = m.nrows();
        for i in 0..k {
            for j in i..k {
                if m[(i, j)] != -m[(j, i)] || !m[(i, j)].is_finite() {
                    return Err(Error::InvalidInput(alloc::format!("entry ({i},{j}) breaks antisymmetry")));
                }
            }
        }
        Ok(SkewMatrix { data: m })
    }

    /// `B − Bᵀ` for arbitrary square `B`.
    pub fn from_antisymmetrization(b: &DMatrix<f64>) -> Result<Self> {
        Self::from_dense(b - b.transpose())
    }

    pub fn size(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn upper(&self) -> Vec<f64> {
        let k = self.size();
        let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for i in 0..k {
            for j in i + 1..k {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    pub fn to_rows(&self) -> RMatrix<f64> {
        let k = self.size();
        (0..k).map(|i| (0..k).map(|j| self.data[(i, j)]).collect()).collect()
    }

    fn from_rows_unchecked(rows: &RMatrix<f64>) -> Self {
        let k = rows.len();
        SkewMatrix { data: DMatrix::from_fn(k, k, |i, j| rows[i][j]) }
    }

    /// Principal submatrix on the given indices, in the given order.
    pub fn principal(&self, idx: &[usize]) -> Self {
        SkewMatrix { data: DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.data[(idx[a], idx[b])]) }
    }

    /// `PᵀAP` where column `a` of `P` is `e_{perm[a]}`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        self.principal(perm)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }
}

/// Pfaffian with `Pf([[0,a],[−a,0]]) = a`, by the signed perfect-matching
/// sum expanded along the first row (memoized on index subsets).
pub fn pfaffian(a: &SkewMatrix) -> Result<f64> {
    ring::pfaffian(&a.to_rows(), usize::MAX)
}

/// Adjoint Pfaffian: `adj_pfaffian(A)·A = Pf(A)·Id`.
///
/// Entry `(i, j)`, `i < j`, is `(−1)^(i+j)` times the Pfaffian of `A` with
/// rows and columns `i, j` removed.
pub fn adj_pfaffian(a: &SkewMatrix) -> Result<SkewMatrix> {
    Ok(SkewMatrix::from_rows_unchecked(&ring::adj_pfaffian(&a.to_rows(), usize::MAX)?))
}

/// Numeric even rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvenRank {
    pub rank: usize,
    pub raw_rank: usize,
    /// Set when the raw singular-value count was odd and got rounded down.
    pub odd_raw: bool,
}

/// Count of singular values above `tol·σ_max`, rounded down to even.
pub fn even_rank(a: &SkewMatrix, tol: f64) -> EvenRank {
    let raw = numeric_rank(a.as_matrix(), tol);
    EvenRank { rank: raw - raw % 2, raw_rank: raw, odd_raw: raw % 2 == 1 }
}

/// Singular values above `tol·σ_max` for any rectangular matrix.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0, |acc: f64, &s| acc.max(s));
    if top == 0.0 || !top.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Block form `PᵀAP = [[A1, A2], [−A2ᵀ, A3]]` with `A1` invertible of size `2m₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    /// `permutation[a]` is the original index placed at position `a`:
    /// `J₀` ascending, then the complement ascending.
    pub permutation: Vec<usize>,
    pub m0: usize,
    pub a1: SkewMatrix,
    pub a2: DMatrix<f64>,
    pub a3: SkewMatrix,
    pub j0: Vec<usize>,
    pub pf_a1: f64,
}

impl BlockDecomposition {
    pub fn size(&self) -> usize {
        self.permutation.len()
    }
}

/// Lexicographically first index set of size `2·m0` whose principal Pfaffian
/// exceeds `tol·max|a_ij|^m0` in absolute value.
pub fn lex_min_principal(a: &SkewMatrix, m0: usize, tol: f64) -> Option<(Vec<usize>, f64)> {
    let k = a.size();
    if 2 * m0 > k {
        return None;
    }
    if m0 == 0 {
        return Some((Vec::new(), 1.0));
    }
    let scale = (0..m0).fold(1.0, |acc, _| acc * a.max_abs());
    combinations_lex(k, 2 * m0).into_iter().find_map(|j| {
        let pf = pfaffian(&a.principal(&j)).ok()?;
        (pf.abs() > tol * scale).then_some((j, pf))
    })
}

/// Block decomposition at the numeric even rank of `A`.
pub fn block_decompose(a: &SkewMatrix, tol: f64) -> Result<BlockDecomposition> {
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let r = even_rank(a, tol);
    if r.rank == 0 {
        return Err(Error::ZeroMatrix);
    }
    block_decompose_at_rank(a, r.rank / 2, tol)
}

/// Block decomposition with a prescribed half-rank `m0`. `m0 = 0` gives an
/// empty `J₀`, the identity permutation and `A3 = A`.
pub fn block_decompose_at_rank(a: &SkewMatrix, m0: usize, tol: f64) -> Result<BlockDecomposition> {
    let k = a.size();
    if 2 * m0 > k {
        return Err(Error::Precondition(alloc::format!("half-rank {m0} too large for size {k}")));
    }
    let (j0, pf_a1) = lex_min_principal(a, m0, tol).ok_or_else(|| {
        Error::IllConditioned(alloc::format!("no principal {}x{} block above tolerance", 2 * m0, 2 * m0))
    })?;
    let mut permutation = j0.clone();
    permutation.extend((0..k).filter(|i| !j0.contains(i)));
    let p = a.permuted(&permutation);
    let s = 2 * m0;
    let full = p.as_matrix();
    Ok(BlockDecomposition {
        m0,
        a1: SkewMatrix { data: full.view((0, 0), (s, s)).into_owned() },
        a2: full.view((0, s), (s, k - s)).into_owned(),
        a3: SkewMatrix { data: full.view((s, s), (k - s, k - s)).into_owned() },
        permutation,
        j0,
        pf_a1,
    })
}

fn check_decomposition(a: &SkewMatrix, dec: &BlockDecomposition) -> Result<()> {
    let k = a.size();
    let s = 2 * dec.m0;
    let mut seen = vec![false; k];
    let perm_ok = dec.permutation.len() == k
        && dec.permutation.iter().all(|&i| i < k && !core::mem::replace(&mut seen[i], true));
    let shapes_ok = dec.a1.size() == s
        && dec.a3.size() == k - s
        && dec.a2.nrows() == s
        && dec.a2.ncols() == k - s
        && dec.j0.as_slice() == &dec.permutation[..s.min(dec.permutation.len())];
    if !perm_ok || !shapes_ok {
        return Err(Error::InvalidInput(String::from("inconsistent decomposition")));
    }
    let p = a.permuted(&dec.permutation);
    let matches = (0..k).all(|i| {
        (0..k).all(|j| {
            let block = match (i < s, j < s) {
                (true, true) => dec.a1.get(i, j),
                (true, false) => dec.a2[(i, j - s)],
                (false, true) => -dec.a2[(j, i - s)],
                (false, false) => dec.a3.get(i - s, j - s),
            };
            block == p.get(i, j)
        })
    });
    if matches {
        Ok(())
    } else {
        Err(Error::InvalidInput(String::from("inconsistent decomposition")))
    }
}

/// Kernel vectors `v_i = P·(−adj(A1)·A2·e_i, Pf(A1)·e_i)`, `i = 1, …, k − 2m₀`.
///
/// The components are polynomial of degree `m₀` in the entries of `A`; they
/// span `ker A` when `rank A = 2m₀`.
pub fn kernel_basis(a: &SkewMatrix, dec: &BlockDecomposition) -> Result<Vec<Vec<f64>>> {
    check_decomposition(a, dec)?;
    let k = a.size();
    let s = 2 * dec.m0;
    let adj = adj_pfaffian(&dec.a1)?;
    let pf = pfaffian(&dec.a1)?;
    let top = -(adj.as_matrix() * &dec.a2);
    Ok((0..k - s)
        .map(|i| {
            let mut v = vec![0.0; k];
            for r in 0..s {
                v[dec.permutation[r]] = top[(r, i)];
            }
            v[dec.permutation[s + i]] = pf;
            v
        })
        .collect())
}

/// Frobenius norm of `A2ᵀ·adj(A1)·A2 + Pf(A1)·A3`; zero iff `rank A = 2m₀`.
pub fn parskew_residual(dec: &BlockDecomposition) -> f64 {
    let adj = match adj_pfaffian(&dec.a1) {
        Ok(adj) => adj,
        Err(_) => return f64::NAN,
    };
    let pf = pfaffian(&dec.a1).unwrap_or(f64::NAN);
    let r = dec.a2.transpose() * adj.as_matrix() * &dec.a2 + dec.a3.as_matrix() * pf;
    r.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::random::{self, ChaCha8Rng};

    fn random_skew(k: usize, rng: &mut ChaCha8Rng) -> SkewMatrix {
        let upper: Vec<f64> = (0..k * (k - 1) / 2).map(|_| random::uniform(rng, -1.0, 1.0)).collect();
        SkewMatrix::from_upper(k, &upper).unwrap()
    }

    /// Σ x_i y_iᵀ − y_i x_iᵀ, rank 2·m0 almost surely.
    fn random_low_rank(k: usize, m0: usize, rng: &mut ChaCha8Rng) -> SkewMatrix {
        let mut b = DMatrix::zeros(k, k);
        for _ in 0..m0 {
            let x = DMatrix::from_fn(k, 1, |_, _| random::uniform(rng, -1.0, 1.0));
            let y = DMatrix::from_fn(k, 1, |_, _| random::uniform(rng, -1.0, 1.0));
            b += &x * y.transpose();
        }
        SkewMatrix::from_antisymmetrization(&b).unwrap()
    }

    fn unit(k: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        v
    }

    #[test]
    fn pfaffian_examples() {
        assert_eq!(pfaffian(&SkewMatrix::from_upper(2, &[3.0]).unwrap()).unwrap(), 3.0);
        let a = SkewMatrix::from_upper(4, &[1.0, 0.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(pfaffian(&a).unwrap(), 2.0);
        assert_eq!(pfaffian(&SkewMatrix::zeros(6)).unwrap(), 0.0);
        assert_eq!(pfaffian(&SkewMatrix::zeros(3)), Err(Error::OddSize(3)));
    }

    #[test]
    fn construction_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(SkewMatrix::from_dense(m).is_err());
        assert!(SkewMatrix::from_upper(3, &[1.0]).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let a = SkewMatrix::from_upper(2, &[5.0]).unwrap();
        assert_eq!(adj_pfaffian(&a).unwrap().upper(), vec![-1.0]);
        assert!(adj_pfaffian(&SkewMatrix::zeros(4)).unwrap().is_zero());
        let mut rng = random::rng(6);
        let a = random_skew(6, &mut rng);
        let pf = pfaffian(&a).unwrap();
        let inv = a.as_matrix().clone().try_inverse().unwrap();
        let expected = inv * pf;
        let adj = adj_pfaffian(&a).unwrap();
        assert!((adj.as_matrix() - &expected).norm() <= 1e-9 * expected.norm());
    }

    #[test]
    fn even_rank_examples() {
        assert_eq!(even_rank(&SkewMatrix::from_upper(2, &[1.0]).unwrap(), DEFAULT_RANK_TOL).rank, 2);
        assert_eq!(even_rank(&SkewMatrix::zeros(4), DEFAULT_RANK_TOL).rank, 0);
        let a = SkewMatrix::from_upper(4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let r = even_rank(&a, DEFAULT_RANK_TOL);
        assert_eq!((r.rank, r.odd_raw), (2, false));
    }

    #[test]
    fn block_examples() {
        let a = SkewMatrix::from_upper(4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let d = block_decompose(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((d.m0, d.j0.clone()), (1, vec![0, 1]));
        assert_eq!(d.a1.upper(), vec![1.0]);
        assert!(d.a2.iter().all(|&x| x == 0.0) && d.a3.is_zero());
        assert_eq!(kernel_basis(&a, &d).unwrap(), vec![unit(4, 2), unit(4, 3)]);
        assert_eq!(parskew_residual(&d), 0.0);

        let b = SkewMatrix::from_upper(4, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let d = block_decompose(&b, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(d.j0, vec![2, 3]);
        assert_eq!(d.permutation, vec![2, 3, 0, 1]);
        assert_eq!(parskew_residual(&d), 0.0);

        let c = SkewMatrix::from_upper(4, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]).unwrap();
        let d = block_decompose(&c, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((d.m0, d.permutation.clone()), (2, vec![0, 1, 2, 3]));
        assert!(kernel_basis(&c, &d).unwrap().is_empty());

        assert_eq!(block_decompose(&SkewMatrix::zeros(4), DEFAULT_RANK_TOL), Err(Error::ZeroMatrix));
    }

    #[test]
    fn zero_half_rank_gives_canonical_basis() {
        let a = SkewMatrix::from_upper(4, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]).unwrap();
        let d = block_decompose_at_rank(&a, 0, DEFAULT_RANK_TOL).unwrap();
        assert!(d.j0.is_empty());
        let basis = kernel_basis(&a, &d).unwrap();
        assert_eq!(basis, (0..4).map(|i| unit(4, i)).collect::<Vec<_>>());
    }

    #[test]
    fn residual_examples() {
        let mut rng = random::rng(11);
        let a = random_low_rank(6, 1, &mut rng);
        let d = block_decompose(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(d.m0, 1);
        assert!(parskew_residual(&d) <= 1e-9);
        let full = SkewMatrix::from_upper(4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let forced = block_decompose_at_rank(&full, 1, DEFAULT_RANK_TOL).unwrap();
        assert!(parskew_residual(&forced) > 0.5);
    }

    #[test]
    fn kernel_rejects_foreign_decomposition() {
        let a = SkewMatrix::from_upper(4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let b = SkewMatrix::from_upper(4, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let d = block_decompose(&b, DEFAULT_RANK_TOL).unwrap();
        assert!(kernel_basis(&a, &d).is_err());
    }

    #[test]
    fn pfaffian_squared_is_determinant_on_ensemble() {
        let mut rng = random::rng(2024);
        for seed in 0..1000 {
            for k in [2, 4, 6, 8] {
                let a = random_skew(k, &mut rng);
                let pf = pfaffian(&a).unwrap();
                let det = a.as_matrix().determinant();
                assert!((pf * pf - det).abs() <= 1e-9 * det.abs().max(1e-300) + 1e-15, "seed {seed} k {k}");
                let adj = adj_pfaffian(&a).unwrap();
                let resid = (adj.as_matrix() * a.as_matrix() - DMatrix::identity(k, k) * pf).norm();
                assert!(resid <= 1e-9 * (1.0 + pf.abs()) * a.as_matrix().norm());
            }
        }
    }

    #[test]
    fn low_rank_kernels_on_ensemble() {
        let mut rng = random::rng(77);
        for k in 2..=8 {
            for m0 in 1..=k / 2 {
                for _ in 0..20 {
                    let a = random_low_rank(k, m0, &mut rng);
                    let d = block_decompose(&a, DEFAULT_RANK_TOL).unwrap();
                    assert_eq!(d.m0, m0);
                    let basis = kernel_basis(&a, &d).unwrap();
                    assert_eq!(basis.len(), k - 2 * m0);
                    for v in &basis {
                        let v = DMatrix::from_column_slice(k, 1, v);
                        assert!((a.as_matrix() * &v).norm() <= 1e-8 * a.as_matrix().norm() * v.norm());
                    }
                    if !basis.is_empty() {
                        let stacked = DMatrix::from_fn(k, basis.len(), |r, c| basis[c][r]);
                        assert_eq!(numeric_rank(&stacked, 1e-10), basis.len());
                    }
                    assert!(parskew_residual(&d) <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn lex_minimal_j0_matches_brute_force() {
        // all 2-subsets of 4 indices
        let pairs = combinations_lex(4, 2);
        for (a, b) in pairs.iter().map(|p| (p[0], p[1])) {
            for mask in 0u32..64 {
                // rank-2 matrix x yᵀ − y xᵀ supported on a chosen pattern
                let mut upper = vec![0.0; 6];
                let mut t = 0;
                for i in 0..4 {
                    for j in i + 1..4 {
                        if (i, j) == (a, b) || mask & (1 << t) != 0 && (i == a || i == b || j == a || j == b) {
                            upper[t] = (t + 1) as f64;
                        }
                        t += 1;
                    }
                }
                let m = SkewMatrix::from_upper(4, &upper).unwrap();
                let Ok(d) = block_decompose(&m, DEFAULT_RANK_TOL) else { continue };
                if d.m0 != 1 {
                    continue;
                }
                let brute = pairs.iter().find(|p| m.get(p[0], p[1]) != 0.0).unwrap();
                assert_eq!(&d.j0, brute);
            }
        }
    }

    proptest! {
        #[test]
        fn permuted_matrix_moves_j0(seed in 0u64..10_000, perm_idx in 0usize..24) {
            let mut rng = random::rng(seed);
            let a = random_low_rank(4, 1, &mut rng);
            let perms = permutations4();
            let p = &perms[perm_idx];
            let b = a.permuted(p);
            let d = block_decompose(&b, DEFAULT_RANK_TOL).unwrap();
            let scale = b.max_abs();
            let brute = combinations_lex(4, 2)
                .into_iter()
                .find(|j| b.get(j[0], j[1]).abs() > DEFAULT_RANK_TOL * scale)
                .unwrap();
            prop_assert_eq!(d.j0, brute);
        }
    }

    fn permutations4() -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let p = vec![a, b, c, d];
                        let mut s = p.clone();
                        s.sort();
                        if s == vec![0, 1, 2, 3] {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out
    }
}
