//! Explicit upper bound on the generic Fuller order in dimension `n`.
//!
//! `K = max_m (2(m+1)N + 1)·N* + 2n` over `m = 1, …, ⌊(n−1)/2⌋` with `N = 2n`.
//! `N*` counts the possible index records `(ρ₀, …, ρ_L, J₀, …, J_L)`,
//! `L = (2m+1)N`; it is replaced here by the number of nondecreasing
//! sequences in `{0, …, 2m}` weighted by `∏ C(2m, ρ_r)` choices of `J_r`.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundTerm {
    pub m: usize,
    /// Upper bound on `N*` for this `m`.
    pub n_star: BigUint,
    pub value: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullerBound {
    pub n: usize,
    pub big_n: usize,
    pub terms: Vec<BoundTerm>,
    /// Maximum of the term values; an upper bound, not the sharp constant.
    pub upper_bound: BigUint,
}

fn binomials(k: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for _ in 0..k {
        let mut next = vec![BigUint::one(); row.len() + 1];
        for i in 1..row.len() {
            next[i] = &row[i - 1] + &row[i];
        }
        row = next;
    }
    row
}

/// `Σ ∏_{r=0}^{len−1} C(2m, ρ_r)` over nondecreasing `ρ` with values in `{0, …, 2m}`.
pub fn record_count(m: usize, len: usize) -> BigUint {
    let c = binomials(2 * m);
    let mut dp: Vec<BigUint> = c.clone();
    for _ in 1..len {
        let mut prefix = BigUint::zero();
        for (rho, slot) in dp.iter_mut().enumerate() {
            prefix += &*slot;
            *slot = &prefix * &c[rho];
        }
    }
    if len == 0 {
        return BigUint::one();
    }
    dp.into_iter().sum()
}

pub fn fuller_bound(n: usize) -> Result<FullerBound> {
    if n < 3 {
        return Err(Error::InvalidInput(alloc::format!("dimension must be at least 3, got {n}")));
    }
    let big_n = 2 * n;
    let terms: Vec<BoundTerm> = (1..=(n - 1) / 2)
        .map(|m| {
            let n_star = record_count(m, (2 * m + 1) * big_n + 1);
            let value = BigUint::from(2 * (m + 1) * big_n + 1) * &n_star + BigUint::from(2 * n);
            BoundTerm { m, n_star, value }
        })
        .collect();
    let upper_bound = terms.iter().map(|t| t.value.clone()).max().unwrap_or_default();
    Ok(FullerBound { n, big_n, terms, upper_bound })
}
