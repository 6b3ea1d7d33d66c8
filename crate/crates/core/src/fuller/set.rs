//! Closed scattered subsets of ℝ built from finite point sets, geometric
//! cascades and finite unions, plus differences `C \ B` of two such sets.
//!
//! For closed `C, B` the relative derived sets of `C \ B` are `D^j(C) \ B`,
//! so every query reduces to derived sets of closed sets and to the subset
//! test `D^j(C) ⊆ B`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

/// Nesting depth accepted by [`fuller_order`] and [`strata`].
pub const MAX_NESTING: usize = 32;

/// Placement of the copies of a cascade. Copy `i ≥ 1` is the image of the
/// child (contained in `[0, 1]`) under
/// `x ↦ target ± scale·ratio^(i−1)·(offset + width·x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geometry {
    pub target: Q,
    /// Copies lie to the right of the target.
    pub positive: bool,
    pub scale: Q,
    pub ratio: Q,
    pub offset: Q,
    pub width: Q,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let zero = Q::zero();
        let ok = self.scale > zero
            && self.ratio > zero
            && self.ratio < Q::one()
            && self.offset > zero
            && self.width > zero
            && &self.ratio * (&self.offset + &self.width) < self.offset;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(alloc::string::String::from(
                "cascade needs scale, offset, width > 0, 0 < ratio < 1 and ratio·(offset + width) < offset",
            )))
        }
    }

    fn sign(&self) -> Q {
        if self.positive { Q::one() } else { -Q::one() }
    }

    /// Image of child coordinate `x` in copy `i ≥ 1`.
    pub fn place(&self, i: u32, x: &Q) -> Q {
        &self.target + self.sign() * &self.scale * pow(&self.ratio, i - 1) * (&self.offset + &self.width * x)
    }

    /// Copy index and child coordinate of `x`, if `x` lies in a copy interval.
    fn locate(&self, x: &Q) -> Option<(u32, Q)> {
        let s = (x - &self.target) * self.sign() / &self.scale;
        if !s.is_positive() || s > &self.offset + &self.width {
            return None;
        }
        // r^e·offset ≤ s ≤ r^e·(offset + width) has at most one solution e
        let est = Float::ceil((ln_q(&s) - ln_q(&self.offset)) / ln_q(&self.ratio));
        let est = if est.is_finite() && est > 0.0 { est as i64 } else { 0 };
        for e in (est - 1).max(0)..=est + 1 {
            let scaled = &s / pow(&self.ratio, e as u32);
            let y = (scaled - &self.offset) / &self.width;
            if !y.is_negative() && y <= Q::one() {
                return Some((e as u32 + 1, y));
            }
        }
        None
    }
}

fn pow(q: &Q, e: u32) -> Q {
    num_traits::pow(q.clone(), e as usize)
}

fn ln_int(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return Float::ln(x.to_f64().unwrap_or(f64::NAN).abs());
    }
    let shift = bits - 64;
    Float::ln((x >> shift).to_f64().unwrap_or(f64::NAN).abs()) + shift as f64 * core::f64::consts::LN_2
}

fn ln_q(q: &Q) -> f64 {
    ln_int(q.numer()) - ln_int(q.denom())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CascadeSet {
    /// Sorted, duplicate-free.
    Points(Vec<Q>),
    Cascade { geometry: Geometry, child: Box<CascadeSet> },
    Union(Vec<CascadeSet>),
    /// `minuend \ subtrahend`, both closed.
    Difference(Box<CascadeSet>, Box<CascadeSet>),
}

/// Outcome of an exact subset query; `Unknown` when the structural rules
/// neither certify inclusion nor find a witness against it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Yes,
    No,
    Unknown,
}

impl CascadeSet {
    pub fn empty() -> Self {
        CascadeSet::Points(Vec::new())
    }

    pub fn points(mut pts: Vec<Q>) -> Self {
        pts.sort();
        pts.dedup();
        CascadeSet::Points(pts)
    }

    /// Cascade with the given placement; `child` must be closed, nonempty and inside `[0, 1]`.
    pub fn cascade(geometry: Geometry, child: CascadeSet) -> Result<Self> {
        geometry.validate()?;
        if !child.is_closed() {
            return Err(Error::InvalidInput("cascade child must be closed".into()));
        }
        match child.hull() {
            None => Err(Error::InvalidInput("cascade child must be nonempty".into())),
            Some((lo, hi)) if lo.is_negative() || hi > Q::one() => {
                Err(Error::InvalidInput("cascade child must lie in [0, 1]".into()))
            }
            Some(_) => Ok(CascadeSet::Cascade { geometry, child: Box::new(child) }),
        }
    }

    /// Union of closed sets, flattened, with empty members dropped.
    pub fn union(members: Vec<CascadeSet>) -> Result<Self> {
        let mut flat = Vec::new();
        let mut pts = Vec::new();
        for m in members {
            if !m.is_closed() {
                return Err(Error::InvalidInput("unions of non-closed sets are not supported".into()));
            }
            match m {
                CascadeSet::Union(inner) => flat.extend(inner),
                CascadeSet::Points(p) => pts.extend(p),
                other => flat.push(other),
            }
        }
        if !pts.is_empty() {
            flat.push(CascadeSet::points(pts));
        }
        Ok(match flat.len() {
            0 => CascadeSet::empty(),
            1 => flat.pop().unwrap(),
            _ => CascadeSet::Union(flat),
        })
    }

    pub fn is_closed(&self) -> bool {
        !matches!(self, CascadeSet::Difference(..))
    }

    fn is_empty_closed(&self) -> bool {
        match self {
            CascadeSet::Points(p) => p.is_empty(),
            CascadeSet::Cascade { .. } => false,
            CascadeSet::Union(ms) => ms.iter().all(|m| m.is_empty_closed()),
            CascadeSet::Difference(..) => false,
        }
    }

    fn is_finite_closed(&self) -> bool {
        match self {
            CascadeSet::Points(_) => true,
            CascadeSet::Cascade { .. } => false,
            CascadeSet::Union(ms) => ms.iter().all(|m| m.is_finite_closed()),
            CascadeSet::Difference(c, _) => c.is_finite_closed(),
        }
    }

    /// Smallest closed interval containing the set (of the minuend for differences).
    pub fn hull(&self) -> Option<(Q, Q)> {
        match self {
            CascadeSet::Points(p) => Some((p.first()?.clone(), p.last()?.clone())),
            CascadeSet::Cascade { geometry: g, child } => {
                let far = g.place(1, &child.hull()?.1);
                Some(if g.positive { (g.target.clone(), far) } else { (far, g.target.clone()) })
            }
            CascadeSet::Union(ms) => ms.iter().filter_map(|m| m.hull()).reduce(|(a, b), (c, d)| (a.min(c), b.max(d))),
            CascadeSet::Difference(c, _) => c.hull(),
        }
    }

    pub fn contains(&self, x: &Q) -> bool {
        match self {
            CascadeSet::Points(p) => p.binary_search(x).is_ok(),
            CascadeSet::Cascade { geometry, child } => {
                *x == geometry.target || geometry.locate(x).is_some_and(|(_, y)| child.contains(&y))
            }
            CascadeSet::Union(ms) => ms.iter().any(|m| m.contains(x)),
            CascadeSet::Difference(c, b) => c.contains(x) && !b.contains(x),
        }
    }

    /// Image under `x ↦ alpha·x + beta`, `alpha ≠ 0`.
    pub fn affine(&self, alpha: &Q, beta: &Q) -> CascadeSet {
        match self {
            CascadeSet::Points(p) => CascadeSet::points(p.iter().map(|x| alpha * x + beta).collect()),
            CascadeSet::Cascade { geometry: g, child } => CascadeSet::Cascade {
                geometry: Geometry {
                    target: alpha * &g.target + beta,
                    positive: g.positive == alpha.is_positive(),
                    scale: &g.scale * alpha.abs(),
                    ..g.clone()
                },
                child: child.clone(),
            },
            CascadeSet::Union(ms) => CascadeSet::Union(ms.iter().map(|m| m.affine(alpha, beta)).collect()),
            CascadeSet::Difference(c, b) => {
                CascadeSet::Difference(Box::new(c.affine(alpha, beta)), Box::new(b.affine(alpha, beta)))
            }
        }
    }

    /// Cascade nesting depth.
    pub fn depth(&self) -> usize {
        match self {
            CascadeSet::Points(_) => 0,
            CascadeSet::Cascade { child, .. } => 1 + child.depth(),
            CascadeSet::Union(ms) => ms.iter().map(|m| m.depth()).max().unwrap_or(0),
            CascadeSet::Difference(c, b) => c.depth().max(b.depth()),
        }
    }

    /// Finite subset: every point set, every target and the first `copies` copies of each cascade.
    pub fn sample_points(&self, copies: u32) -> Vec<Q> {
        let mut out = match self {
            CascadeSet::Points(p) => p.clone(),
            CascadeSet::Cascade { geometry, child } => {
                let inner = child.sample_points(copies);
                let mut v = alloc::vec![geometry.target.clone()];
                for i in 1..=copies {
                    v.extend(inner.iter().map(|x| geometry.place(i, x)));
                }
                v
            }
            CascadeSet::Union(ms) => ms.iter().flat_map(|m| m.sample_points(copies)).collect(),
            CascadeSet::Difference(c, b) => c.sample_points(copies).into_iter().filter(|x| !b.contains(x)).collect(),
        };
        out.sort();
        out.dedup();
        out
    }

    /// Fuller order of a closed set, read off the structure.
    fn order_closed(&self) -> i64 {
        match self {
            CascadeSet::Points(p) => {
                if p.is_empty() {
                    -1
                } else {
                    0
                }
            }
            CascadeSet::Cascade { child, .. } => child.order_closed() + 1,
            CascadeSet::Union(ms) => ms.iter().map(|m| m.order_closed()).max().unwrap_or(-1),
            CascadeSet::Difference(..) => unreachable!("order_closed on a difference"),
        }
    }

    fn members(&self) -> &[CascadeSet] {
        match self {
            CascadeSet::Union(ms) => ms,
            other => core::slice::from_ref(other),
        }
    }
}

/// Relative derived set: the points of `s` that are limit points of `s`.
pub fn derived(s: &CascadeSet) -> CascadeSet {
    match s {
        CascadeSet::Points(_) => CascadeSet::empty(),
        CascadeSet::Cascade { geometry, child } => {
            let d = derived(child);
            if d.is_empty_closed() {
                CascadeSet::points(alloc::vec![geometry.target.clone()])
            } else {
                CascadeSet::Cascade { geometry: geometry.clone(), child: Box::new(d) }
            }
        }
        CascadeSet::Union(ms) => {
            CascadeSet::union(ms.iter().map(derived).collect()).expect("derived sets of closed sets are closed")
        }
        CascadeSet::Difference(c, b) => {
            let d = derived(c);
            if d.is_empty_closed() {
                CascadeSet::empty()
            } else {
                CascadeSet::Difference(Box::new(d), b.clone())
            }
        }
    }
}

/// Decides `a ⊆ b` for closed `a`, `b`.
pub fn subset(a: &CascadeSet, b: &CascadeSet) -> Decision {
    match a {
        CascadeSet::Points(p) => {
            if p.iter().all(|x| b.contains(x)) {
                Decision::Yes
            } else {
                Decision::No
            }
        }
        CascadeSet::Union(ms) => {
            let mut out = Decision::Yes;
            for m in ms {
                match subset(m, b) {
                    Decision::No => return Decision::No,
                    Decision::Unknown => out = Decision::Unknown,
                    Decision::Yes => {}
                }
            }
            out
        }
        CascadeSet::Difference(..) => Decision::Unknown,
        CascadeSet::Cascade { geometry, child } => {
            if b.is_finite_closed() || !b.contains(&geometry.target) {
                return Decision::No;
            }
            if a.sample_points(3).iter().any(|x| !b.contains(x)) {
                return Decision::No;
            }
            // copies placed identically: compare the children
            let same: Vec<CascadeSet> = b
                .members()
                .iter()
                .filter_map(|m| match m {
                    CascadeSet::Cascade { geometry: g, child: c } if g == geometry => Some((**c).clone()),
                    _ => None,
                })
                .collect();
            if !same.is_empty() {
                let cover = CascadeSet::union(same).expect("children are closed");
                if subset(child, &cover) == Decision::Yes {
                    return Decision::Yes;
                }
            }
            // a inside a single copy of a member cascade: pull back to child coordinates
            let (lo, hi) = a.hull().expect("cascades are nonempty");
            for m in b.members() {
                if let CascadeSet::Cascade { geometry: g, child: c } = m {
                    if let (Some((i, _)), Some((k, _))) = (g.locate(&lo), g.locate(&hi)) {
                        if i == k {
                            let unit = &g.scale * pow(&g.ratio, i - 1) * &g.width;
                            let alpha = Q::one() / (g.sign() * &unit);
                            let beta = -(&g.target * &alpha) - &g.offset / &g.width;
                            if subset(&a.affine(&alpha, &beta), c) == Decision::Yes {
                                return Decision::Yes;
                            }
                        }
                    }
                }
            }
            Decision::Unknown
        }
    }
}

fn check_nesting(s: &CascadeSet) -> Result<()> {
    if s.depth() > MAX_NESTING {
        Err(Error::DepthExceeded { bound: MAX_NESTING })
    } else {
        Ok(())
    }
}

/// Largest `j` with a nonempty stratum `Σ_j`; `−1` for the empty set.
pub fn fuller_order(s: &CascadeSet) -> Result<i64> {
    check_nesting(s)?;
    match s {
        CascadeSet::Difference(c, b) => {
            let mut d = (**c).clone();
            let mut levels = Vec::new();
            for _ in 0..=c.order_closed().max(-1) {
                levels.push(d.clone());
                d = derived(&d);
            }
            for (j, level) in levels.iter().enumerate().rev() {
                match subset(level, b) {
                    Decision::Yes => {}
                    Decision::No => return Ok(j as i64),
                    Decision::Unknown => {
                        return Err(Error::Precondition(alloc::format!(
                            "cannot decide whether derived set {j} is removed"
                        )))
                    }
                }
            }
            Ok(-1)
        }
        closed => Ok(closed.order_closed()),
    }
}

/// Removes the closed set `f` from `s`.
pub fn difference(s: &CascadeSet, f: &CascadeSet) -> Result<CascadeSet> {
    if !f.is_closed() {
        return Err(Error::InvalidInput("only closed sets can be removed".into()));
    }
    if f.is_empty_closed() {
        return Ok(s.clone());
    }
    Ok(match s {
        CascadeSet::Difference(c, b) => {
            CascadeSet::Difference(c.clone(), Box::new(CascadeSet::union(alloc::vec![(**b).clone(), f.clone()])?))
        }
        closed => CascadeSet::Difference(Box::new(closed.clone()), Box::new(f.clone())),
    })
}

/// Strata `Σ₀, …, Σ_k` with `k` the Fuller order; `Σ_j = D^j(S) \ D^{j+1}(S)`.
pub fn strata(s: &CascadeSet) -> Result<Vec<CascadeSet>> {
    let order = fuller_order(s)?;
    let (c, b) = match s {
        CascadeSet::Difference(c, b) => ((**c).clone(), Some((**b).clone())),
        closed => (closed.clone(), None),
    };
    let mut out = Vec::new();
    let mut level = c;
    for _ in 0..=order {
        let next = derived(&level);
        let mut removed = alloc::vec![next.clone()];
        removed.extend(b.clone());
        out.push(CascadeSet::Difference(Box::new(level), Box::new(CascadeSet::union(removed)?)));
        level = next;
    }
    Ok(out)
}
