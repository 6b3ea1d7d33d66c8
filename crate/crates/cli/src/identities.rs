//! Seeded identity suites over the library, run on worker threads and
//! merged in a fixed order so that reports are byte-identical per seed.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chatter_core::flow::{hamiltonian_drift, hdot_residual, integrate, FlowConfig};
use chatter_core::fuller::{derived, difference, fuller_order, make_cascade, CascadeSet};
use chatter_core::hamsym::{
    goh_matrix, h0i, mu_sequence, phi0, phi_symbolic, relh0_check, structure_split, BracketEvaluator, ExtremalState,
    MuOptions, DEFAULT_BUDGET,
};
use chatter_core::nalgebra::DVector;
use chatter_core::vecfield::ControlAffineSystem;
use chatter_core::random::{self, ChaCha8Rng};
use chatter_core::skew::{
    adj_pfaffian, block_decompose, kernel_basis, parskew_residual, pfaffian, DEFAULT_RANK_TOL,
};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Negates the adjoint Pfaffian before it is checked.
    AdjSign,
}

#[derive(Debug, Clone)]
pub struct IdentityOptions {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub mutation: Option<Mutation>,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub tolerance: f64,
    pub max_error: f64,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub mutation: Option<&'static str>,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

struct Tally(SuiteReport);

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Tally(SuiteReport { name, cases: 0, failures: 0, tolerance, max_error: 0.0, first_failure: None })
    }

    fn fail(&mut self, what: String) {
        self.0.failures += 1;
        self.0.first_failure.get_or_insert(what);
    }

    /// Records one case with error `err`; NaN counts as a failure. `max_error`
    /// only tracks finite errors.
    fn check(&mut self, err: f64, what: impl FnOnce() -> String) {
        self.0.cases += 1;
        if err.is_finite() && err > self.0.max_error {
            self.0.max_error = err;
        }
        if !(err <= self.0.tolerance) {
            self.fail(what());
        }
    }

    /// Records one pass/fail case.
    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.check(if ok { 0.0 } else { f64::INFINITY }, what);
    }

    fn error(&mut self, e: impl std::fmt::Display) {
        self.0.cases += 1;
        self.fail(e.to_string());
    }
}

type Suite = fn(&mut ChaCha8Rng, &IdentityOptions) -> SuiteReport;

fn even_sizes(o: &IdentityOptions) -> impl Iterator<Item = usize> + '_ {
    o.sizes.iter().copied().filter(|k| k % 2 == 0 && *k > 0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn pfaffian_squared(rng: &mut ChaCha8Rng, o: &IdentityOptions) -> SuiteReport {
    let mut t = Tally::new("pfaffian_squared", 1e-9);
    for k in even_sizes(o) {
        for case in 0..250 {
            let a = random::skew(k, rng);
            match pfaffian(&a) {
                Ok(pf) => t.check(rel(pf * pf, a.as_matrix().determinant()), || format!("k={k} case={case}")),
                Err(e) => t.error(e),
            }
        }
    }
    t.0
}

fn adjoint_pfaffian(rng: &mut ChaCha8Rng, o: &IdentityOptions) -> SuiteReport {
    let mut t = Tally::new("adjoint_pfaffian", 1e-9);
    for k in even_sizes(o) {
        for case in 0..250 {
            let a = random::skew(k, rng);
            let (pf, adj) = match (pfaffian(&a), adj_pfaffian(&a)) {
                (Ok(pf), Ok(adj)) => (pf, adj),
                (Err(e), _) | (_, Err(e)) => {
                    t.error(e);
                    continue;
                }
            };
            let mut b = adj.as_matrix().clone();
            if o.mutation == Some(Mutation::AdjSign) {
                b = -b;
            }
            let prod = b * a.as_matrix();
            let err = (0..k)
                .flat_map(|i| (0..k).map(move |j| (i, j)))
                .map(|(i, j)| (prod[(i, j)] - if i == j { pf } else { 0.0 }).abs())
                .fold(0.0, f64::max)
                / (1.0 + pf.abs());
            t.check(err, || format!("k={k} case={case}"));
        }
    }
    t.0
}

fn kernel(rng: &mut ChaCha8Rng, o: &IdentityOptions) -> SuiteReport {
    let mut t = Tally::new("kernel_basis", 1e-8);
    for &k in o.sizes.iter().filter(|&&k| (3..=8).contains(&k)) {
        for m0 in 1..=(k - 1) / 2 {
            for case in 0..50 {
                let a = random::skew_of_rank(k, m0, rng);
                let dec = match block_decompose(&a, DEFAULT_RANK_TOL) {
                    Ok(d) => d,
                    Err(e) => {
                        t.error(e);
                        continue;
                    }
                };
                match kernel_basis(&a, &dec) {
                    Ok(basis) => {
                        let what = || format!("k={k} m0={m0} case={case}");
                        t.expect(basis.len() == k - 2 * m0, what);
                        let na = a.as_matrix().norm();
                        let err = basis
                            .iter()
                            .map(|v| {
                                let v = DVector::from_column_slice(v);
                                (a.as_matrix() * &v).norm() / (na * v.norm())
                            })
                            .fold(0.0, f64::max);
                        t.check(err, what);
                        t.check(parskew_residual(&dec), what);
                    }
                    Err(e) => t.error(e),
                }
            }
        }
    }
    t.0
}

fn phi0_formula(rng: &mut ChaCha8Rng, o: &IdentityOptions) -> SuiteReport {
    let mut t = Tally::new("phi0_formula", 1e-9);
    for m in even_sizes(o).map(|k| k / 2).filter(|&m| m <= 2) {
        let n = 2 * m + 1;
        let sys = match random::polynomial_system(n, m, 2, rng) {
            Ok(s) => s,
            Err(e) => {
                t.error(e);
                continue;
            }
        };
        let mut done = 0;
        while done < 100 {
            let s = random::state(n, rng);
            let (Ok(h), Ok(h0), Ok(phi)) = (goh_matrix(&sys, &s), h0i(&sys, &s), phi0(&sys, &s)) else {
                t.error("evaluation failed");
                break;
            };
            let det = h.as_matrix().determinant();
            if det.abs() <= 1e-6 {
                continue;
            }
            done += 1;
            let Some(u) = h.as_matrix().clone().lu().solve(&DVector::from_vec(h0)) else { continue };
            t.check(rel(phi, det * (1.0 - u.norm_squared())), || format!("m={m} case={done}"));
        }
    }
    t.0
}

fn structure_split_suite(rng: &mut ChaCha8Rng, o: &IdentityOptions) -> SuiteReport {
    let mut t = Tally::new("structure_split", 1e-8);
    if !o.sizes.contains(&2) {
        return t.0;
    }
    let phis = match phi_symbolic(1, 2, DEFAULT_BUDGET) {
        Ok(p) => p,
        Err(e) => {
            t.error(e);
            return t.0;
        }
    };
    let sys = random::polynomial_system(3, 1, 2, rng).expect("valid random system");
    let ev = BracketEvaluator::new(&sys);
    for (l, phi) in phis.iter().enumerate() {
        let split = match structure_split(l, 1, DEFAULT_BUDGET) {
            Ok(s) => s,
            Err(e) => {
                t.error(e);
                continue;
            }
        };
        t.expect(split.certified(), || format!("l={l} not certified"));
        for case in 0..20 {
            let s = random::state(3, rng);
            let at = ev.at(&s);
            match (at.eval(phi), at.eval(&split.leading), at.eval(&split.remainder)) {
                (Ok(a), Ok(b), Ok(c)) => t.check(rel(a, b + c), || format!("l={l} case={case}")),
                _ => t.error("evaluation failed"),
            }
        }
    }
    t.0
}

/// A nilpotent system together with a basepoint where its Goh matrix is
/// singular; systems whose Pfaffian has no zero near the origin are redrawn.
pub fn degenerate_draw(rng: &mut ChaCha8Rng) -> chatter_core::Result<(ControlAffineSystem, ExtremalState)> {
    let mut last = None;
    for _ in 0..20 {
        let sys = random::nilpotent_system(1, rng)?;
        match random::degenerate_state(&sys, rng) {
            Ok(base) => return Ok((sys, base)),
            Err(e @ chatter_core::Error::Precondition(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn mu_ladder(rng: &mut ChaCha8Rng, o: &IdentityOptions) -> SuiteReport {
    let mut t = Tally::new("mu_ladder", 1e-8);
    if !o.sizes.contains(&2) {
        return t.0;
    }
    let n = 4;
    let rmax = 3 * 2 * n;
    for case in 0..3 {
        let mut run = || -> chatter_core::Result<(Vec<usize>, Option<usize>, f64, bool)> {
            let (sys, base) = degenerate_draw(rng)?;
            let st = mu_sequence(&sys, &base, &MuOptions { budget: 100_000, ..MuOptions::new(rmax) })?;
            let rho = st.rho();
            let start = st.plateau(2 * n);
            let samples: Vec<ExtremalState> = (0..10).map(|_| random::state(n, rng)).collect();
            let r = start.unwrap_or(0);
            let k = rho[r..].iter().take_while(|&&x| x == rho[r]).count().min(4) - 1;
            let rep = relh0_check(&sys, &st, r, k, &samples)?;
            Ok((rho, start, rep.max_residual, rep.certified))
        };
        match run() {
            Ok((rho, start, residual, certified)) => {
                t.expect(rho.windows(2).all(|w| w[0] <= w[1]), || format!("case={case}: rho decreases"));
                t.expect(start.is_some_and(|s| s <= 2 * n * 2), || format!("case={case}: no plateau"));
                t.expect(certified, || format!("case={case}: remainder not certified"));
                t.check(residual, || format!("case={case}: relh0 residual"));
            }
            Err(e) => t.error(e),
        }
    }
    t.0
}

fn fuller_calculus(rng: &mut ChaCha8Rng, _: &IdentityOptions) -> SuiteReport {
    let mut t = Tally::new("fuller_calculus", 0.0);
    for case in 0..40 {
        let k = 1 + random::index(rng, 4);
        let j = random::index(rng, k);
        let seed = random::next_seed(rng);
        let run = || -> chatter_core::Result<(i64, i64, i64, i64)> {
            let xi = make_cascade(k, seed)?;
            let lower = (0..k - j).fold(xi.clone(), |acc, _| derived(&acc));
            let removed = CascadeSet::union(vec![lower, make_cascade(j, seed ^ 1)?])?;
            Ok((
                fuller_order(&xi)?,
                fuller_order(&removed)?,
                fuller_order(&difference(&xi, &removed)?)?,
                fuller_order(&CascadeSet::union(vec![xi, make_cascade(j, seed ^ 2)?])?)?,
            ))
        };
        let (k, j) = (k as i64, j as i64);
        match run() {
            Ok((order, removed, rest, union)) => {
                t.expect(order == k, || format!("case={case}: order {order} != {k}"));
                t.expect(removed == j, || format!("case={case}: removed set has order {removed}"));
                t.expect(rest >= k - j - 1, || format!("case={case}: difference order {rest} below {}", k - j - 1));
                t.expect(union == k, || format!("case={case}: union order {union}"));
            }
            Err(e) => t.error(e),
        }
    }
    t.0
}

fn extremal_flow(_: &mut ChaCha8Rng, o: &IdentityOptions) -> SuiteReport {
    let mut t = Tally::new("extremal_flow", 1e-8);
    if !o.sizes.contains(&2) {
        return t.0;
    }
    let sys = random::heisenberg([0.0, 0.0, 1.0]);
    let init = ExtremalState::new(vec![0.0; 3], vec![1.0, 0.0, 0.5]).expect("valid state");
    match integrate(&sys, &init, &FlowConfig::default()) {
        Ok(tr) => {
            let h0 = tr.samples[0].h_norm;
            t.check(tr.samples.iter().map(|s| (s.h_norm - h0).abs()).fold(0.0, f64::max), || "h_I drift".into());
            t.check(hamiltonian_drift(&tr, &sys).unwrap_or(f64::NAN), || "Hamiltonian drift".into());
            t.check(hdot_residual(&tr, &sys, 1e-3).unwrap_or(f64::NAN) * 1e-2, || "hdot residual above 1e-6".into());
        }
        Err(e) => t.error(e),
    }
    t.0
}

const SUITES: &[(&str, Suite)] = &[
    ("adjoint_pfaffian", adjoint_pfaffian),
    ("extremal_flow", extremal_flow),
    ("fuller_calculus", fuller_calculus),
    ("kernel_basis", kernel),
    ("mu_ladder", mu_ladder),
    ("pfaffian_squared", pfaffian_squared),
    ("phi0_formula", phi0_formula),
    ("structure_split", structure_split_suite),
];

/// Runs every suite; suite `i` draws from its own stream seeded by `(seed, i)`.
pub fn run(opts: &IdentityOptions) -> IdentityReport {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, SuiteReport)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..opts.threads.clamp(1, SUITES.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((_, suite)) = SUITES.get(i) else { break };
                let mut rng = random::rng(opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
                let report = suite(&mut rng, opts);
                results.lock().expect("no poisoned workers").push((i, report));
            });
        }
    });
    let mut results = results.into_inner().expect("no poisoned workers");
    results.sort_by_key(|(i, _)| *i);
    let suites: Vec<SuiteReport> = results.into_iter().map(|(_, r)| r).collect();
    IdentityReport {
        seed: opts.seed,
        sizes: opts.sizes.clone(),
        mutation: opts.mutation.map(|_| "adj-sign"),
        passed: suites.iter().all(|s| s.failures == 0),
        suites,
    }
}

/// Worker count from `CHATTER_THREADS`, else the available parallelism.
pub fn default_threads() -> usize {
    std::env::var("CHATTER_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(threads: usize) -> IdentityOptions {
        IdentityOptions { seed: 5, sizes: vec![2, 4], mutation: None, threads }
    }

    #[test]
    fn thread_count_does_not_change_the_report() {
        let one = serde_json::to_string(&run(&opts(1))).unwrap();
        let many = serde_json::to_string(&run(&opts(4))).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn adjoint_sign_mutation_is_caught() {
        let report = run(&IdentityOptions { mutation: Some(Mutation::AdjSign), ..opts(2) });
        assert!(!report.passed);
        let failing: Vec<_> = report.suites.iter().filter(|s| s.failures > 0).map(|s| s.name).collect();
        assert_eq!(failing, ["adjoint_pfaffian"]);
    }

    #[test]
    fn sizes_restrict_the_suites() {
        let report = run(&IdentityOptions { sizes: vec![4], ..opts(2) });
        let find = |name: &str| report.suites.iter().find(|s| s.name == name).unwrap().cases;
        assert_eq!(find("mu_ladder"), 0);
        assert_eq!(find("pfaffian_squared"), 250);
        assert!(report.passed);
    }
}
