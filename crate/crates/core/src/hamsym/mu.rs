//! The ladder `μ_r` on strata where the Goh matrix drops rank.
//!
//! Every rank decision is taken once, numerically, at a frozen basepoint.
//! The `μ_r` themselves stay symbolic and can be evaluated anywhere.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::bracket::{base_mu, BracketPoly, Gen};
use super::eval::{goh_decomposition, kappa_g_symbolic, momentum_scale, symbolic_goh, BracketEvaluator, StateCache};
use super::{ExtremalState, DEFAULT_BUDGET};
use crate::combinatorics::combinations_lex;
use crate::error::{Error, Result};
use crate::ring::{self, RMatrix, Ring};
use crate::skew::DEFAULT_RANK_TOL;
use crate::vecfield::ControlAffineSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `rank T_r = ρ_r + 1`: the new row is kept and `μ_{r+1}` is a `κ`.
    Increase,
    /// `rank T_r = ρ_r`: `μ_{r+1} = det S̃_r`.
    Stagnant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuOptions {
    pub rmax: usize,
    /// Absolute threshold on singular values of row-normalized matrices.
    pub tol: f64,
    /// Relative threshold for the rank of the Goh matrix at the basepoint.
    pub goh_tol: f64,
    pub budget: usize,
}

impl MuOptions {
    pub fn new(rmax: usize) -> Self {
        MuOptions { rmax, tol: 1e-8, goh_tol: DEFAULT_RANK_TOL, budget: DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuStep {
    pub r: usize,
    pub rho: usize,
    /// Column set `J_r`, zero-based control indices.
    pub j: Vec<usize>,
    pub mu: BracketPoly,
    pub mu_value: f64,
    /// Transition to step `r + 1`; `None` on the last step.
    pub branch: Option<Branch>,
    /// The singular value that decided the branch fell in the borderline band.
    pub ambiguous: bool,
    /// `(ρ_r + 1)`-th singular value of the normalized `T_r(λ)`.
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct MuState {
    pub m: usize,
    pub a: usize,
    pub basepoint: ExtremalState,
    pub permutation: Vec<usize>,
    pub j0: Vec<usize>,
    pub kappa: Vec<BracketPoly>,
    pub g: Vec<BracketPoly>,
    /// Rows of every `S_r`: `S_r` is the first `ρ_r` rows.
    pub rows: Vec<Vec<BracketPoly>>,
    /// Entries of every `V_r`: `V_r` is the first `ρ_r` entries.
    pub v: Vec<BracketPoly>,
    pub steps: Vec<MuStep>,
}

impl MuState {
    pub fn rho(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.rho).collect()
    }

    pub fn s(&self, r: usize) -> &[Vec<BracketPoly>] {
        &self.rows[..self.steps[r].rho]
    }

    pub fn v_at(&self, r: usize) -> &[BracketPoly] {
        &self.v[..self.steps[r].rho]
    }

    /// `Z_r`: columns `J_r` of `S_r`.
    pub fn z(&self, r: usize) -> RMatrix<BracketPoly> {
        let rows: Vec<usize> = (0..self.steps[r].rho).collect();
        ring::extract(&self.rows, &rows, &self.steps[r].j)
    }

    /// First `r` with `ρ_r = ⋯ = ρ_{r+n}`.
    pub fn plateau(&self, n: usize) -> Option<usize> {
        let rho = self.rho();
        (0..rho.len()).find(|&r| r + n < rho.len() && rho[r..=r + n].iter().all(|&x| x == rho[r]))
    }

    pub fn any_ambiguous(&self) -> bool {
        self.steps.iter().any(|s| s.ambiguous)
    }
}

/// Evaluates a polynomial matrix, zeroes entries at the cancellation-noise
/// level and scales each nonzero row to unit max-norm.
fn normalized_values(at: &StateCache<'_, '_>, rows: &[Vec<BracketPoly>], cols: usize) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(rows.len(), cols);
    for (i, row) in rows.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let (v, scale) = at.eval_with_scale(x)?;
            out[(i, j)] = if v.abs() <= 64.0 * f64::EPSILON * scale { 0.0 } else { v };
        }
        let top = out.row(i).iter().fold(0.0, |acc: f64, x| acc.max(x.abs()));
        if top > 0.0 {
            out.row_mut(i).scale_mut(1.0 / top);
        }
    }
    Ok(out)
}

fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Lexicographically first `ρ`-subset of columns giving an invertible block.
fn lex_min_columns(s: &DMatrix<f64>, tol: f64) -> Option<Vec<usize>> {
    let rho = s.nrows();
    if rho == 0 {
        return Some(Vec::new());
    }
    combinations_lex(s.ncols(), rho).into_iter().find(|cols| {
        let block = s.select_columns(cols.iter());
        singular_values_desc(&block).last().is_some_and(|&x| x > tol)
    })
}

/// `S̃ = [[V, Z], [{h₀, μ}, {h_J, μ}]]`.
fn s_tilde(v: &[BracketPoly], z: &RMatrix<BracketPoly>, mu: &BracketPoly, j: &[usize], vanishes: &dyn Fn(&[u8]) -> bool) -> RMatrix<BracketPoly> {
    let mut rows: RMatrix<BracketPoly> = v
        .iter()
        .zip(z)
        .map(|(vi, zi)| {
            let mut row = vec![vi.clone()];
            row.extend(zi.iter().cloned());
            row
        })
        .collect();
    let mut last = vec![mu.poisson_ad_pruned(0, vanishes)];
    last.extend(j.iter().map(|&c| mu.poisson_ad_pruned(c as u8 + 1, vanishes)));
    rows.push(last);
    rows
}

/// Runs the ladder from `ρ₀ = 2(m − a)`, `μ₀ = g₁` up to step `rmax`.
///
/// `S₀` holds the rows of `−H` indexed by `J₀`, with columns in the original
/// control order, so that `(1, u)` lies in the kernel of `[[V, S], …]` along
/// extremals with `h_{0I} − H u = 0`.
pub fn mu_sequence(sys: &ControlAffineSystem, base: &ExtremalState, opts: &MuOptions) -> Result<MuState> {
    let ev = BracketEvaluator::new(sys);
    let vanishes = |d: &[u8]| ev.vanishes(d);
    let at = ev.at(base);
    let m = sys.m();
    let k = 2 * m;
    let goh = at.goh()?;
    let dec = goh_decomposition(&goh, opts.goh_tol, momentum_scale(base))?;
    let a = m - dec.m0;
    let (kappa, g) = kappa_g_symbolic(m, &dec.permutation, dec.m0)?;
    let kappa: Vec<BracketPoly> = kappa.iter().map(|p| p.prune(&vanishes)).collect();
    let g: Vec<BracketPoly> = g.iter().map(|p| p.prune(&vanishes)).collect();
    let h = symbolic_goh(m);
    let mut rows: Vec<Vec<BracketPoly>> =
        dec.j0.iter().map(|&j| h[j].iter().map(|x| x.prune(&vanishes).neg()).collect()).collect();
    let mut v: Vec<BracketPoly> = dec.j0.iter().map(|&j| BracketPoly::h(&[0, j as u8 + 1]).prune(&vanishes)).collect();
    let rho0 = 2 * dec.m0;

    let mut rho = rho0;
    let mut j = dec.j0.clone();
    let mut mu = g[0].clone();
    let mut steps: Vec<MuStep> = Vec::with_capacity(opts.rmax + 1);
    for r in 0..=opts.rmax {
        if mu.len() > opts.budget {
            return Err(Error::BudgetExceeded { terms: mu.len(), budget: opts.budget });
        }
        let mu_value = at.eval(&mu)?;
        if r == opts.rmax {
            steps.push(MuStep { r, rho, j, mu, mu_value, branch: None, ambiguous: false, sigma: f64::NAN });
            break;
        }
        let ad_i: Vec<BracketPoly> = (1..=k as u8).map(|i| mu.poisson_ad_pruned(i, &vanishes)).collect();
        if let Some(big) = ad_i.iter().find(|p| p.len() > opts.budget) {
            return Err(Error::BudgetExceeded { terms: big.len(), budget: opts.budget });
        }
        let (branch, ambiguous, sigma) = if rho == k {
            (Branch::Stagnant, false, 0.0)
        } else {
            let mut t_rows = rows[..rho].to_vec();
            t_rows.push(ad_i.clone());
            let t = normalized_values(&at, &t_rows, k)?;
            let sigma = singular_values_desc(&t).get(rho).copied().unwrap_or(0.0);
            if sigma > 1e3 * opts.tol {
                (Branch::Increase, false, sigma)
            } else {
                (Branch::Stagnant, sigma > opts.tol, sigma)
            }
        };
        let next_mu = match branch {
            Branch::Increase => {
                rows.push(ad_i);
                v.push(mu.poisson_ad_pruned(0, &vanishes));
                kappa[rho + 1 - rho0 - 1].clone()
            }
            Branch::Stagnant => {
                let row_idx: Vec<usize> = (0..rho).collect();
                let z = ring::extract(&rows, &row_idx, &j);
                ring::det(&s_tilde(&v[..rho], &z, &mu, &j, &vanishes), opts.budget)?
            }
        };
        steps.push(MuStep { r, rho, j: j.clone(), mu, mu_value, branch: Some(branch), ambiguous, sigma });
        if branch == Branch::Increase {
            rho += 1;
        }
        let s_now = normalized_values(&at, &rows[..rho], k)?;
        j = lex_min_columns(&s_now, opts.tol)
            .ok_or_else(|| Error::IllConditioned(alloc::format!("no invertible column block of S_{}", r + 1)))?;
        mu = next_mu;
    }
    Ok(MuState {
        m,
        a,
        basepoint: base.clone(),
        permutation: dec.permutation,
        j0: dec.j0,
        kappa,
        g,
        rows,
        v,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relh0Report {
    /// Largest `|μ_{r+j} − (leading + P_j)| / (1 + |μ_{r+j}|)` over samples and `j`.
    pub max_residual: f64,
    /// Every remainder `P_j` is free of `ad_{h₀}^j(μ_r)` and of ad-words of `μ_r` longer than `j`.
    pub certified: bool,
    pub leading: Vec<BracketPoly>,
    pub remainder: Vec<BracketPoly>,
}

/// Checks `μ_{r+j} = ad_{h₀}^j(μ_r)·c^j + P_j` on a plateau `ρ_r = ⋯ = ρ_{r+k}`
/// that starts at `r = 0` or right after a rank increase. Here
/// `c = (−1)^{ρ_r} det Z_r` is the cofactor of the `{h₀, ·}` entry of `S̃_r`
/// (a product over the steps if `J` moves along the plateau).
pub fn relh0_check(
    sys: &ControlAffineSystem,
    state: &MuState,
    r: usize,
    k: usize,
    samples: &[ExtremalState],
) -> Result<Relh0Report> {
    let last = state.steps.len() - 1;
    if r + k > last {
        return Err(Error::Precondition(alloc::format!("steps {r}..={} not computed", r + k)));
    }
    let rho = state.steps[r].rho;
    if state.steps[r..=r + k].iter().any(|s| s.rho != rho) {
        return Err(Error::Precondition(alloc::format!("rank not constant on steps {r}..={}", r + k)));
    }
    if r > 0 && state.steps[r - 1].rho >= rho {
        return Err(Error::Precondition(alloc::format!("step {r} does not start a plateau")));
    }
    let ev = BracketEvaluator::new(sys);
    let vanishes = |d: &[u8]| ev.vanishes(d);
    let base = base_mu(r);
    let sign = if rho % 2 == 0 { 1.0 } else { -1.0 };

    let mut formal = BracketPoly::formal(base, &[]);
    let mut coeff = BracketPoly::constant(1.0);
    let mut leading = Vec::with_capacity(k + 1);
    let mut remainder = Vec::with_capacity(k + 1);
    let mut certified = true;
    for jj in 0..=k {
        let zeros = vec![0u8; jj];
        let lead = BracketPoly::formal(base, &zeros).mul(&coeff);
        let rem = formal.sub(&lead);
        certified &= !rem.any_generator(|g| match g {
            Gen::Ad { word, .. } => word.len() > jj || word.as_slice() == zeros.as_slice(),
            Gen::H(_) => false,
        });
        leading.push(lead);
        remainder.push(rem);
        if jj < k {
            let step = &state.steps[r + jj];
            let z = state.z(r + jj);
            let det_z = ring::det(&z, DEFAULT_BUDGET)?;
            coeff = coeff.mul(&det_z.scale(sign));
            formal = ring::det(&s_tilde(state.v_at(r + jj), &z, &formal, &step.j, &vanishes), DEFAULT_BUDGET)?;
        }
    }

    let mu_r = &state.steps[r].mu;
    let mut max_residual: f64 = 0.0;
    for xi in samples {
        let at = ev.at(xi);
        let mut words: alloc::collections::BTreeMap<Vec<u8>, f64> = alloc::collections::BTreeMap::new();
        let mut value = |g: &Gen| -> Result<f64> {
            match g {
                Gen::H(d) => at.h(d),
                Gen::Ad { word, .. } => {
                    if let Some(v) = words.get(word) {
                        return Ok(*v);
                    }
                    let v = at.eval(&mu_r.ad_word(word, &vanishes))?;
                    words.insert(word.clone(), v);
                    Ok(v)
                }
            }
        };
        for jj in 0..=k {
            let lhs = at.eval(&state.steps[r + jj].mu)?;
            let rhs = leading[jj].eval(&mut value)? + remainder[jj].eval(&mut value)?;
            max_residual = max_residual.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
    }
    Ok(Relh0Report { max_residual, certified, leading, remainder })
}
