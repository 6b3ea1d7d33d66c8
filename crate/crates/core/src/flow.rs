//! Extremal flow of the maximum principle with bang and singular control
//! laws, switching-event localization and residual checks.
//!
//! Coordinates are global: `q̇ = f₀ + Σ uᵢfᵢ`, `ṗ = −(J_{f₀} + Σ uᵢJ_{fᵢ})ᵀp`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamsym::ExtremalState;
use crate::rk::{self, Tolerances};
use crate::vecfield::{CompiledField, ControlAffineSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub horizon: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Switch threshold on `‖h_I‖`; `None` selects `1e−9·(1 + ‖p‖·maxᵢ‖fᵢ(q)‖)` at `t = 0`.
    pub theta: Option<f64>,
    /// Goh matrices with `|det| ≤ goh_tol` count as singular.
    pub goh_tol: f64,
    pub max_step: f64,
    /// Rescale `p` to unit norm at `t = 0`.
    pub normalize_p: bool,
    /// Gain `k` of the singular law `u = H⁻¹(h_{0I} + k·h_I)`, which makes
    /// `ḣ_I = −k·h_I` and keeps the arc on `h_I = 0` despite round-off.
    pub singular_gain: f64,
    pub max_events: usize,
    pub event_tol: f64,
    pub blowup: f64,
    /// Singular arcs are entered only when `‖H⁻¹h_{0I}‖ < 1 − feasibility_tol`.
    pub feasibility_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            horizon: 10.0,
            rtol: 1e-10,
            atol: 1e-12,
            theta: None,
            goh_tol: 1e-10,
            max_step: 0.1,
            normalize_p: false,
            singular_gain: 10.0,
            max_events: 10_000,
            event_tol: 1e-12,
            blowup: 1e12,
            feasibility_tol: 1e-9,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.horizon, self.rtol, self.atol, self.max_step, self.event_tol, self.goh_tol];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) || self.theta.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidInput(String::from("horizon, tolerances and max step must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Bang,
    Singular,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: ExtremalState,
    pub u: Vec<f64>,
    pub regime: Regime,
    pub h_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// `h_I` passes through zero and the bang control jumps.
    Crossing,
    /// Start of a singular arc.
    Entry,
    /// End of a singular arc.
    Exit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    pub kind: EventKind,
    pub goh_rank: usize,
    pub h_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Horizon,
    /// More than `max_events` events; the event list is kept.
    Chattering,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<SwitchEvent>,
    pub termination: Termination,
    pub theta: f64,
    pub config: FlowConfig,
}

/// Compiled fields, drift brackets `f_{0i}` and Goh brackets `f_{ij}` of one system.
#[derive(Debug, Clone)]
pub struct FlowModel {
    n: usize,
    k: usize,
    fields: Vec<CompiledField>,
    drift: Vec<CompiledField>,
    goh: Vec<(usize, usize, CompiledField)>,
}

impl FlowModel {
    pub fn new(sys: &ControlAffineSystem) -> Result<Self> {
        let k = sys.controls();
        let f = sys.fields();
        let drift = (1..=k).map(|i| f[0].lie_bracket(&f[i]).map(|b| b.compile())).collect::<Result<_>>()?;
        let mut goh = Vec::new();
        for i in 1..=k {
            for j in i + 1..=k {
                goh.push((i - 1, j - 1, f[i].lie_bracket(&f[j])?.compile()));
            }
        }
        Ok(FlowModel { n: sys.n(), k, fields: f.iter().map(|x| x.compile()).collect(), drift, goh })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn controls(&self) -> usize {
        self.k
    }

    pub fn h0(&self, q: &[f64], p: &[f64]) -> f64 {
        self.fields[0].pair(q, p)
    }

    pub fn h_controls(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        self.fields[1..].iter().map(|f| f.pair(q, p)).collect()
    }

    pub fn h0i(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        self.drift.iter().map(|f| f.pair(q, p)).collect()
    }

    pub fn goh(&self, q: &[f64], p: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.k, self.k);
        for (i, j, f) in &self.goh {
            let v = f.pair(q, p);
            h[(*i, *j)] = v;
            h[(*j, *i)] = -v;
        }
        h
    }

    /// Writes `(q̇, ṗ)` into `out` (length `2n`).
    pub fn rhs(&self, q: &[f64], p: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let (dq, dp) = out.split_at_mut(n);
        dq.iter_mut().for_each(|x| *x = 0.0);
        dp.iter_mut().for_each(|x| *x = 0.0);
        let mut tmp = vec![0.0; n];
        for (i, f) in self.fields.iter().enumerate() {
            let w = if i == 0 { 1.0 } else { u[i - 1] };
            if w == 0.0 {
                continue;
            }
            f.eval_into(q, &mut tmp);
            for (a, b) in dq.iter_mut().zip(&tmp) {
                *a += w * b;
            }
            f.add_jacobian_transpose_times(q, p, -w, dp);
        }
    }

    fn split<'y>(&self, y: &'y [f64]) -> (&'y [f64], &'y [f64]) {
        y.split_at(self.n)
    }

    fn h_norm(&self, y: &[f64]) -> f64 {
        let (q, p) = self.split(y);
        norm(&self.h_controls(q, p))
    }

    /// `⟨h_I, h_{0I}⟩ = ½ d‖h_I‖²/dt` on bang arcs.
    fn psi(&self, y: &[f64]) -> f64 {
        let (q, p) = self.split(y);
        dot(&self.h_controls(q, p), &self.h0i(q, p))
    }

    fn singular_law(&self, y: &[f64], gain: f64) -> Option<Vec<f64>> {
        let (q, p) = self.split(y);
        let rhs: Vec<f64> =
            self.h0i(q, p).iter().zip(self.h_controls(q, p)).map(|(a, b)| a + gain * b).collect();
        self.goh(q, p).lu().solve(&DVector::from_vec(rhs)).map(|u| u.iter().copied().collect())
    }

    /// `‖H⁻¹h_{0I}‖² − 1`, the exit function of singular arcs.
    fn exit_fn(&self, y: &[f64]) -> f64 {
        let (q, p) = self.split(y);
        match self.goh(q, p).lu().solve(&DVector::from_vec(self.h0i(q, p))) {
            Some(u) => u.norm_squared() - 1.0,
            None => f64::INFINITY,
        }
    }

    fn goh_det(&self, y: &[f64]) -> f64 {
        let (q, p) = self.split(y);
        self.goh(q, p).determinant()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    num_traits::Float::sqrt(dot(a, a))
}

/// Hamiltonian vector field at `λ` for a fixed control.
pub fn extremal_rhs(sys: &ControlAffineSystem, state: &ExtremalState, u: &[f64]) -> Result<Vec<f64>> {
    if state.dim() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), found: state.dim() });
    }
    if u.len() != sys.controls() {
        return Err(Error::DimensionMismatch { expected: sys.controls(), found: u.len() });
    }
    let model = FlowModel::new(sys)?;
    let mut out = vec![0.0; 2 * sys.n()];
    model.rhs(&state.q, &state.p, u, &mut out);
    Ok(out)
}

/// Default switch threshold at `λ`.
pub fn default_theta(sys: &ControlAffineSystem, state: &ExtremalState) -> Result<f64> {
    let pn = norm(&state.p);
    let mut fmax: f64 = 0.0;
    for f in &sys.fields()[1..] {
        fmax = fmax.max(norm(&f.evaluate(&state.q)?));
    }
    Ok(1e-9 * (1.0 + pn * fmax))
}

fn select_with(model: &FlowModel, y: &[f64], theta: f64, cfg: &FlowConfig) -> (Vec<f64>, Regime) {
    let (q, p) = model.split(y);
    let hi = model.h_controls(q, p);
    let hn = norm(&hi);
    if hn > theta {
        return (hi.iter().map(|x| x / hn).collect(), Regime::Bang);
    }
    let h = model.goh(q, p);
    if h.determinant().abs() > cfg.goh_tol {
        if let Some(u) = h.lu().solve(&DVector::from_vec(model.h0i(q, p))) {
            if u.norm() <= 1.0 + cfg.feasibility_tol {
                return (u.iter().copied().collect(), Regime::Singular);
            }
        }
    }
    (vec![0.0; model.k], Regime::Degenerate)
}

/// Control and regime at `λ`: bang `h_I/‖h_I‖` when `‖h_I‖ > θ`, otherwise the
/// singular control `H⁻¹h_{0I}` if the Goh matrix is invertible and it is
/// feasible, otherwise `u = 0` flagged degenerate.
pub fn select_control(sys: &ControlAffineSystem, state: &ExtremalState, cfg: &FlowConfig) -> Result<(Vec<f64>, Regime)> {
    let model = FlowModel::new(sys)?;
    let theta = match cfg.theta {
        Some(t) => t,
        None => default_theta(sys, state)?,
    };
    let y: Vec<f64> = state.q.iter().chain(&state.p).copied().collect();
    Ok(select_with(&model, &y, theta, cfg))
}

#[derive(Clone)]
enum Law {
    /// `u = h_I / max(‖h_I‖, θ)`: the bang law, kept continuous inside the θ-ball.
    Bang(f64),
    Singular(f64),
    Frozen(Vec<f64>),
}

impl Law {
    fn control(&self, model: &FlowModel, y: &[f64]) -> Vec<f64> {
        match self {
            Law::Bang(theta) => {
                let (q, p) = model.split(y);
                let hi = model.h_controls(q, p);
                let d = norm(&hi).max(*theta);
                hi.iter().map(|x| x / d).collect()
            }
            Law::Singular(gain) => model.singular_law(y, *gain).unwrap_or_else(|| vec![0.0; model.k]),
            Law::Frozen(u) => u.clone(),
        }
    }

    fn step(&self, model: &FlowModel, t: f64, y: &[f64], h: f64, cfg: &FlowConfig) -> rk::Step {
        let n = model.n;
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
            let u = self.control(model, y);
            model.rhs(&y[..n], &y[n..], &u, out);
        };
        rk::step(&mut f, t, y, h, cfg.rtol, cfg.atol)
    }

    fn integrate(&self, model: &FlowModel, t0: f64, y: &[f64], t1: f64, tol: Tolerances) -> Result<Vec<f64>> {
        let n = model.n;
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
            let u = self.control(model, y);
            model.rhs(&y[..n], &y[n..], &u, out);
        };
        rk::integrate(&mut f, t0, y, t1, tol)
    }
}

/// Smallest `s ∈ (0, h]` where `g(step(s))` changes sign, given `g(y) < 0 ≤ g(step(h))`.
fn bisect(
    model: &FlowModel,
    law: &Law,
    t: f64,
    y: &[f64],
    h: f64,
    cfg: &FlowConfig,
    g: &dyn Fn(&[f64]) -> f64,
) -> (f64, Vec<f64>) {
    let (mut lo, mut hi) = (0.0, h);
    let mut y_hi = law.step(model, t, y, h, cfg).y;
    while hi - lo > cfg.event_tol {
        let mid = 0.5 * (lo + hi);
        let ym = law.step(model, t, y, mid, cfg).y;
        if g(&ym) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
            y_hi = ym;
        }
    }
    (hi, y_hi)
}

fn goh_rank(model: &FlowModel, y: &[f64]) -> usize {
    let (q, p) = model.split(y);
    crate::skew::numeric_rank(&model.goh(q, p), crate::skew::DEFAULT_RANK_TOL)
}

struct Run<'m> {
    model: &'m FlowModel,
    cfg: FlowConfig,
    theta: f64,
    samples: Vec<Sample>,
    events: Vec<SwitchEvent>,
}

impl Run<'_> {
    fn push(&mut self, t: f64, y: &[f64], u: Vec<f64>, regime: Regime) {
        let n = self.model.n;
        self.samples.push(Sample {
            t,
            state: ExtremalState { q: y[..n].to_vec(), p: y[n..].to_vec() },
            u,
            regime,
            h_norm: self.model.h_norm(y),
        });
    }

    /// Integrates with a frozen control until `‖h_I‖ ≥ 10θ`, leaving the
    /// neighbourhood of `h_I = 0` after a switch.
    fn leave_ball(&mut self, t: f64, y: Vec<f64>, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let law = Law::Frozen(u.to_vec());
        let cap = (1e-3 * self.cfg.horizon).min(self.cfg.max_step);
        let (mut t, mut y) = (t, y);
        let mut h = 1e-3 * self.theta.max(1e-12);
        let start = t;
        while self.model.h_norm(&y) < 10.0 * self.theta && t - start < cap && t < self.cfg.horizon {
            let hh = h.min(self.cfg.horizon - t);
            y = law.step(self.model, t, &y, hh, &self.cfg).y;
            t += hh;
            h *= 2.0;
        }
        if t > start {
            self.push(t, &y, u.to_vec(), Regime::Bang);
        }
        Ok((t, y))
    }
}

/// Integrates the extremal flow over `[0, cfg.horizon]`.
pub fn integrate(sys: &ControlAffineSystem, init: &ExtremalState, cfg: &FlowConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if init.dim() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), found: init.dim() });
    }
    if !sys.frame_independent(&init.q, 1e-12) {
        return Err(Error::Precondition(String::from("fields are not independent at the initial point")));
    }
    let model = FlowModel::new(sys)?;
    let mut start = init.clone();
    if cfg.normalize_p {
        let pn = norm(&start.p);
        start.p.iter_mut().for_each(|x| *x /= pn);
    }
    let theta = match cfg.theta {
        Some(t) => t,
        None => default_theta(sys, &start)?,
    };
    let mut y: Vec<f64> = start.q.iter().chain(&start.p).copied().collect();
    let (u0, mut regime) = select_with(&model, &y, theta, cfg);
    let mut run = Run { model: &model, cfg: cfg.clone(), theta, samples: Vec::new(), events: Vec::new() };
    run.push(0.0, &y, u0, regime);

    let horizon = cfg.horizon;
    let mut t = 0.0;
    let mut h = (horizon / 100.0).min(cfg.max_step);
    let min_h = 1e-15 * horizon.max(1.0);
    let mut termination = Termination::Horizon;
    while t < horizon {
        if run.events.len() > cfg.max_events {
            termination = Termination::Chattering;
            break;
        }
        let law = match regime {
            Regime::Bang => Law::Bang(theta),
            Regime::Singular => Law::Singular(cfg.singular_gain),
            Regime::Degenerate => Law::Frozen(vec![0.0; model.k]),
        };
        let hh = h.min(horizon - t).min(cfg.max_step);
        let trial = law.step(&model, t, &y, hh, cfg);
        if !trial.err.is_finite() || trial.y.iter().any(|x| !(x.abs() < cfg.blowup)) {
            return Err(Error::BlowUp { t });
        }
        if trial.err > 1.0 {
            if hh <= min_h {
                return Err(Error::Degenerate { t, reason: String::from("step size underflow") });
            }
            h = rk::next_step_size(hh, trial.err);
            continue;
        }
        h = rk::next_step_size(hh, trial.err);

        match regime {
            Regime::Bang => {
                let ball = |z: &[f64]| theta - model.h_norm(z);
                let psi = |z: &[f64]| model.psi(z);
                let hit = if ball(&trial.y) >= 0.0 {
                    Some(bisect(&model, &law, t, &y, hh, cfg, &ball))
                } else if psi(&y) < 0.0 && psi(&trial.y) >= 0.0 {
                    let (s, ys) = bisect(&model, &law, t, &y, hh, cfg, &psi);
                    (model.h_norm(&ys) <= theta).then_some((s, ys))
                } else {
                    None
                };
                match hit {
                    None => {
                        t += hh;
                        y = trial.y;
                        let u = law.control(&model, &y);
                        run.push(t, &y, u, regime);
                    }
                    Some((s, ys)) => {
                        let u_before = law.control(&model, &y);
                        t += s;
                        y = ys;
                        let (q, p) = model.split(&y);
                        let goh = model.goh(q, p);
                        let h0i = model.h0i(q, p);
                        let sing = (goh.determinant().abs() > cfg.goh_tol)
                            .then(|| goh.clone().lu().solve(&DVector::from_vec(h0i.clone())))
                            .flatten();
                        let rank = goh_rank(&model, &y);
                        let hn = model.h_norm(&y);
                        match sing {
                            Some(us) if us.norm() < 1.0 - cfg.feasibility_tol => {
                                regime = Regime::Singular;
                                run.events.push(SwitchEvent { t, kind: EventKind::Entry, goh_rank: rank, h_norm: hn });
                                let u = Law::Singular(cfg.singular_gain).control(&model, &y);
                                run.push(t, &y, u, regime);
                            }
                            _ => {
                                let hu = &goh * DVector::from_column_slice(&u_before);
                                let v: Vec<f64> = h0i.iter().zip(hu.iter()).map(|(a, b)| a - b).collect();
                                let vn = norm(&v);
                                if !(vn > 0.0) {
                                    return Err(Error::Degenerate {
                                        t,
                                        reason: String::from("h_I and its derivative vanish together"),
                                    });
                                }
                                run.events.push(SwitchEvent { t, kind: EventKind::Crossing, goh_rank: rank, h_norm: hn });
                                run.push(t, &y, u_before, Regime::Bang);
                                let u_after: Vec<f64> = v.iter().map(|x| x / vn).collect();
                                (t, y) = run.leave_ball(t, y, &u_after)?;
                            }
                        }
                    }
                }
            }
            Regime::Singular => {
                if model.goh_det(&trial.y).abs() <= cfg.goh_tol {
                    return Err(Error::Degenerate { t: t + hh, reason: String::from("Goh matrix became singular on a singular arc") });
                }
                let exit = |z: &[f64]| model.exit_fn(z);
                if exit(&y) < 0.0 && exit(&trial.y) >= 0.0 {
                    let (s, ys) = bisect(&model, &law, t, &y, hh, cfg, &exit);
                    t += s;
                    y = ys;
                    let u = law.control(&model, &y);
                    run.events.push(SwitchEvent {
                        t,
                        kind: EventKind::Exit,
                        goh_rank: goh_rank(&model, &y),
                        h_norm: model.h_norm(&y),
                    });
                    run.push(t, &y, u.clone(), Regime::Singular);
                    regime = Regime::Bang;
                    (t, y) = run.leave_ball(t, y, &u)?;
                } else {
                    t += hh;
                    y = trial.y;
                    let u = law.control(&model, &y);
                    run.push(t, &y, u, regime);
                }
            }
            Regime::Degenerate => {
                t += hh;
                y = trial.y;
                let (u, next) = select_with(&model, &y, theta, cfg);
                if next == Regime::Degenerate {
                    return Err(Error::Degenerate {
                        t,
                        reason: String::from("h_I vanishes with no feasible singular control"),
                    });
                }
                regime = next;
                run.push(t, &y, u, regime);
            }
        }
    }
    if run.samples.iter().any(|s| s.state.p.iter().all(|&x| x == 0.0)) {
        return Err(Error::Degenerate { t, reason: String::from("covector vanished") });
    }
    Ok(Trajectory { samples: run.samples, events: run.events, termination, theta, config: cfg.clone() })
}

/// Refined event times in increasing order.
pub fn switch_times(traj: &Trajectory) -> Vec<f64> {
    traj.events.iter().map(|e| e.t).collect()
}

/// Largest `|(h₀ + ‖h_I‖)(t) − (h₀ + ‖h_I‖)(t₀)|` over bang samples, `t₀` the first of them.
pub fn hamiltonian_drift(traj: &Trajectory, sys: &ControlAffineSystem) -> Result<f64> {
    let model = FlowModel::new(sys)?;
    let values: Vec<f64> = traj
        .samples
        .iter()
        .filter(|s| s.regime == Regime::Bang && s.h_norm > traj.theta)
        .map(|s| model.h0(&s.state.q, &s.state.p) + s.h_norm)
        .collect();
    Ok(values.first().map_or(0.0, |v0| values.iter().fold(0.0, |acc: f64, v| acc.max((v - v0).abs()))))
}

fn residual_with(model: &FlowModel, law: &Law, t: f64, y: &[f64], u: &[f64], fd_step: f64) -> Result<f64> {
    let n = model.n;
    let tol = Tolerances { rtol: 1e-13, atol: 1e-15, max_step: fd_step };
    let fwd = law.integrate(model, t, y, t + fd_step, tol)?;
    let bwd = law.integrate(model, t, y, t - fd_step, tol)?;
    let hf = model.h_controls(&fwd[..n], &fwd[n..]);
    let hb = model.h_controls(&bwd[..n], &bwd[n..]);
    let (q, p) = model.split(y);
    let hu = model.goh(q, p) * DVector::from_column_slice(u);
    let pred: Vec<f64> = model.h0i(q, p).iter().zip(hu.iter()).map(|(a, b)| a - b).collect();
    let r: Vec<f64> = (0..model.k).map(|i| (hf[i] - hb[i]) / (2.0 * fd_step) - pred[i]).collect();
    Ok(norm(&r))
}

/// `‖ḣ_I − (h_{0I} − H u)‖` at one state, with `ḣ_I` the central difference
/// of step `fd_step` along the control law selected at `state`.
pub fn hdot_residual_at(sys: &ControlAffineSystem, state: &ExtremalState, cfg: &FlowConfig, fd_step: f64) -> Result<f64> {
    let model = FlowModel::new(sys)?;
    let theta = match cfg.theta {
        Some(t) => t,
        None => default_theta(sys, state)?,
    };
    let y: Vec<f64> = state.q.iter().chain(&state.p).copied().collect();
    let (u, regime) = select_with(&model, &y, theta, cfg);
    let law = match regime {
        Regime::Bang => Law::Bang(theta),
        Regime::Singular => Law::Singular(cfg.singular_gain),
        Regime::Degenerate => return Err(Error::Degenerate { t: 0.0, reason: String::from("no control law at this state") }),
    };
    residual_with(&model, &law, 0.0, &y, &u, fd_step)
}

/// Largest `‖ḣ_I − (h_{0I} − H u)‖` over samples, with `ḣ_I` the central
/// difference of step `fd_step` obtained by re-integrating the sample's own
/// control law on both sides. Samples closer than `fd_step` to an event or to
/// the ends of the horizon are skipped.
pub fn hdot_residual(traj: &Trajectory, sys: &ControlAffineSystem, fd_step: f64) -> Result<f64> {
    let model = FlowModel::new(sys)?;
    let horizon = traj.samples.last().map_or(0.0, |s| s.t);
    let mut worst: f64 = 0.0;
    for s in &traj.samples {
        let law = match s.regime {
            Regime::Bang if s.h_norm > 10.0 * traj.theta => Law::Bang(traj.theta),
            Regime::Singular => Law::Singular(traj.config.singular_gain),
            _ => continue,
        };
        if s.t < fd_step || s.t + fd_step > horizon || traj.events.iter().any(|e| (e.t - s.t).abs() <= fd_step) {
            continue;
        }
        let y: Vec<f64> = s.state.q.iter().chain(&s.state.p).copied().collect();
        worst = worst.max(residual_with(&model, &law, s.t, &y, &s.u, fd_step)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecfield::{Monomial, PolyVectorField};

    fn mono(c: f64, e: &[u32]) -> Monomial {
        Monomial::new(c, e.to_vec())
    }

    fn heisenberg() -> ControlAffineSystem {
        let f0 = PolyVectorField::constant(&[0.0, 0.0, 1.0]);
        let f1 = PolyVectorField::new(3, vec![vec![mono(1.0, &[0, 0, 0])], vec![], vec![mono(-0.5, &[0, 1, 0])]]).unwrap();
        let f2 = PolyVectorField::new(3, vec![vec![], vec![mono(1.0, &[0, 0, 0])], vec![mono(0.5, &[1, 0, 0])]]).unwrap();
        ControlAffineSystem::new(3, 1, vec![f0, f1, f2]).unwrap()
    }

    /// `f₁ = ∂₁`, `f₂ = ∂₂`, `f₀ = x₁x₄∂₃ + ∂₄`: `h₂ = p₂` is constant and
    /// `h₁(t) = p₁ + x₄(0)p₃·(−t) − p₃t²/2` along any arc.
    fn quadratic_switch_system() -> ControlAffineSystem {
        let f0 = PolyVectorField::new(4, vec![vec![], vec![], vec![mono(1.0, &[1, 0, 0, 1])], vec![mono(1.0, &[0; 4])]]).unwrap();
        let e = |i: usize| {
            let mut v = [0.0; 4];
            v[i] = 1.0;
            PolyVectorField::constant(&v)
        };
        ControlAffineSystem::new(4, 1, vec![f0, e(0), e(1)]).unwrap()
    }

    fn st(q: &[f64], p: &[f64]) -> ExtremalState {
        ExtremalState::new(q.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let sys = heisenberg();
        let s = st(&[0.0; 3], &[1.0, 0.0, 0.0]);
        assert_eq!(extremal_rhs(&sys, &s, &[1.0, 0.0]).unwrap(), vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let s = st(&[0.0; 3], &[0.0, 0.0, 2.0]);
        // ṗ = −u₁ J_{f₁}ᵀp: J_{f₁} has row (0, −½, 0) in the z-slot
        assert_eq!(extremal_rhs(&sys, &s, &[1.0, 0.0]).unwrap(), vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let c = ControlAffineSystem::new(
            3,
            1,
            vec![
                PolyVectorField::constant(&[0.0, 0.0, 1.0]),
                PolyVectorField::constant(&[1.0, 0.0, 0.0]),
                PolyVectorField::constant(&[0.0, 1.0, 0.0]),
            ],
        )
        .unwrap();
        let out = extremal_rhs(&c, &st(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), &[0.6, 0.8]).unwrap();
        assert_eq!(&out[3..], &[0.0, 0.0, 0.0]);
        assert_eq!(extremal_rhs(&c, &st(&[0.0; 3], &[1.0, 1.0, 1.0]), &[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn select_control_examples() {
        let sys = heisenberg();
        let cfg = FlowConfig { theta: Some(1e-6), ..FlowConfig::default() };
        let (u, r) = select_control(&sys, &st(&[0.0; 3], &[3.0, 4.0, 1.0]), &cfg).unwrap();
        assert_eq!(r, Regime::Bang);
        assert!((u[0] - 0.6).abs() < 1e-15 && (u[1] - 0.8).abs() < 1e-15);
        let (u, r) = select_control(&sys, &st(&[0.0; 3], &[0.0, 0.0, 1.0]), &cfg).unwrap();
        assert_eq!((u, r), (vec![0.0, 0.0], Regime::Singular));
        let (_, r) = select_control(&quadratic_switch_system(), &st(&[0.0; 4], &[0.0, 0.0, 1.0, 1.0]), &cfg).unwrap();
        assert_eq!(r, Regime::Degenerate);
    }

    #[test]
    fn heisenberg_bang_arc() {
        let sys = heisenberg();
        let traj = integrate(&sys, &st(&[0.0; 3], &[1.0, 0.0, 0.5]), &FlowConfig::default()).unwrap();
        assert!(traj.events.is_empty());
        let h0 = traj.samples[0].h_norm;
        assert!(traj.samples.iter().all(|s| (s.h_norm - h0).abs() <= 1e-6));
        assert!(traj.samples.iter().all(|s| s.regime == Regime::Bang));
        assert!(hamiltonian_drift(&traj, &sys).unwrap() <= 1e-8);
        assert!(hdot_residual(&traj, &sys, 1e-3).unwrap() <= 1e-6);
        assert!(traj.samples.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn heisenberg_without_goh_has_constant_controls() {
        let sys = heisenberg();
        let traj = integrate(&sys, &st(&[0.0; 3], &[0.3, -0.4, 0.0]), &FlowConfig::default()).unwrap();
        assert!(switch_times(&traj).is_empty());
        let u0 = traj.samples[0].u.clone();
        assert!(traj.samples.iter().all(|s| (s.u[0] - u0[0]).abs() < 1e-12 && (s.u[1] - u0[1]).abs() < 1e-12));
    }

    #[test]
    fn singular_arc_stays_on_switching_surface() {
        // Heisenberg frame with drift ∂z + ½∂x: H⁻¹h_{0I} = (−¼, 0)
        let mut fields = heisenberg().fields().to_vec();
        fields[0] = PolyVectorField::constant(&[0.5, 0.0, 1.0]);
        let sys = ControlAffineSystem::new(3, 1, fields).unwrap();
        let traj = integrate(&sys, &st(&[0.0; 3], &[0.0, 0.0, 1.0]), &FlowConfig { horizon: 5.0, ..FlowConfig::default() }).unwrap();
        assert!(traj.samples.iter().all(|s| s.regime == Regime::Singular));
        assert!(traj.samples.iter().all(|s| s.h_norm <= traj.theta));
        assert!((traj.samples[3].u[0] + 0.25).abs() < 1e-9);
    }

    #[test]
    fn single_and_double_crossings() {
        let sys = quadratic_switch_system();
        // h₁ = 1.5 − 2t + t²/2, zeros at t = 1 and t = 3
        let init = st(&[0.0, 0.0, 0.0, -2.0], &[1.5, 0.0, -1.0, 0.0]);
        let one = integrate(&sys, &init, &FlowConfig { horizon: 2.0, ..FlowConfig::default() }).unwrap();
        let ts = switch_times(&one);
        assert_eq!(ts.len(), 1);
        assert!((ts[0] - 1.0).abs() <= 1e-9, "{ts:?}");
        assert_eq!(one.events[0].kind, EventKind::Crossing);
        let two = integrate(&sys, &init, &FlowConfig { horizon: 4.0, ..FlowConfig::default() }).unwrap();
        let ts = switch_times(&two);
        assert_eq!(ts.len(), 2);
        assert!((ts[0] - 1.0).abs() <= 1e-9 && (ts[1] - 3.0).abs() <= 1e-9, "{ts:?}");
        assert!(two.samples.iter().all(|s| s.regime != Regime::Bang || s.h_norm <= two.theta || (norm(&s.u) - 1.0).abs() < 1e-12));
    }
}
