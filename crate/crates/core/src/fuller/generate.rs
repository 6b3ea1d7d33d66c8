//! Random test instances of prescribed Fuller order.


use num_bigint::BigInt;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::set::{CascadeSet, Geometry, Q};
use crate::error::{Error, Result};

/// Largest order accepted by [`make_cascade`].
pub const DEPTH_BOUND: usize = 5;

fn below(rng: &mut ChaCha8Rng, n: u32) -> u32 {
    rng.next_u32() % n
}

fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Rational in `[lo, hi]` with a small denominator.
fn rational(rng: &mut ChaCha8Rng, lo: &Q, hi: &Q) -> Q {
    let den = 2 + below(rng, 15) as i64;
    lo + (hi - lo) * q(below(rng, den as u32 + 1) as i64, den)
}

fn build(k: usize, rng: &mut ChaCha8Rng) -> CascadeSet {
    if k == 0 {
        let count = 1 + below(rng, 3);
        return CascadeSet::points((0..count).map(|_| rational(rng, &q(0, 1), &q(1, 1))).collect());
    }
    let ratios = [q(1, 2), q(1, 3), q(2, 5), q(3, 5), q(1, 4)];
    let ratio = ratios[below(rng, ratios.len() as u32) as usize].clone();
    let offset = [q(1, 2), q(2, 3), q(1, 1)][below(rng, 3) as usize].clone();
    // ratio·(offset + width) < offset with a margin
    let width = &offset * (q(1, 1) - &ratio) / &ratio * q(1 + below(rng, 3) as i64, 4);
    let target = rational(rng, &q(1, 4), &q(3, 4));
    let positive = below(rng, 2) == 0;
    let room = if positive { q(1, 1) - &target } else { target.clone() };
    let scale = room / (&offset + &width) * q(2 + below(rng, 3) as i64, 4);
    let mut child = build(k - 1, rng);
    if below(rng, 2) == 0 {
        let extra = build(below(rng, k as u32) as usize, rng);
        child = CascadeSet::union(alloc::vec![child, extra]).expect("generated sets are closed");
    }
    let geometry = Geometry { target, positive, scale, ratio, offset, width };
    CascadeSet::cascade(geometry, child).expect("generated geometry is valid")
}

/// Random closed subset of `[0, 1]` of Fuller order exactly `k`.
pub fn make_cascade(k: usize, seed: u64) -> Result<CascadeSet> {
    if k > DEPTH_BOUND {
        return Err(Error::DepthExceeded { bound: DEPTH_BOUND });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(build(k, &mut rng))
}
